#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "lar/errors.hpp"

namespace lar {

enum class TokenizerMode {
  words,                 // whitespace words, sentence split on .!? / newlines
  words_plus_html_tags,  // additionally lex bare <tag> runs as single tokens
};

std::string_view to_string(TokenizerMode mode);
TokenizerMode tokenizer_mode_from_string(std::string_view name);  // "words" | "words+html"

struct Token {
  std::string text;
  std::uint32_t sentence_index = 0;
  bool operator==(const Token&) const = default;
};

struct Step {
  std::string observation;
  std::string action;                // raw action text as loaded
  std::vector<Token> action_tokens;  // derived from `action` by the corpus tokenizer
};

struct Trajectory {
  std::string id;
  std::vector<Step> steps;
};

struct Corpus {
  std::vector<Trajectory> trajectories;
  TokenizerMode tokenizer_mode = TokenizerMode::words;
  std::string digest;  // content digest (hex), fixed when the corpus is built
};

enum class ParsePolicy { strict, lenient };

struct LoadIssue {
  std::size_t line = 0;
  std::string reason;
};

struct LoadReport {
  std::vector<LoadIssue> skipped;  // lenient mode: records dropped and why
};

// Splits action text into whitespace-free tokens and assigns sentence indices.
//
// Rules: split on ASCII whitespace; a sentence ends after a word whose last
// character is one of . ! ? when followed by whitespace or end of text, and
// at any newline inside a whitespace run. Consecutive boundaries collapse:
// indices are contiguous from 0 and no sentence is empty. In html mode a
// whitespace-free <...> run is one token forming its own sentence; malformed
// tags fall back to word splitting. The segment-symbol delimiters U+27E8 and
// U+27E9 are reserved and stripped from input text, so no corpus token can
// ever collide with a latent symbol.
//
// Idempotent at token level: re-tokenizing the space-joined token texts
// reproduces the same token stream.
std::vector<Token> tokenize_action(std::string_view text, TokenizerMode mode);

// Builds a corpus from in-memory trajectories: tokenizes every action,
// validates ids (non-empty, unique) and non-empty step lists, computes the
// digest. Throws ValidationError on bad input.
Corpus make_corpus(std::vector<Trajectory> trajectories, TokenizerMode mode);

// Loads JSONL: one object per line, {"id": str, "steps": [{"observation"?:
// str, "action": str}, ...]}. Blank lines are skipped. strict: first bad
// record throws ParseError with its line number. lenient: bad records are
// dropped and reported. An empty result is a ValidationError either way;
// unreadable files are IoError.
Corpus load_corpus(const std::filesystem::path& path, TokenizerMode mode,
                   ParsePolicy policy = ParsePolicy::strict, LoadReport* report = nullptr);

// Writes the corpus back out in the same JSONL shape (action = raw text).
void save_corpus(const Corpus& corpus, const std::filesystem::path& path);

// Token count of the action stream: sum over steps of |action_tokens|.
std::uint64_t effective_horizon(const Trajectory& trajectory);
std::uint64_t total_effective_horizon(const Corpus& corpus);

std::string compute_corpus_digest(const std::vector<Trajectory>& trajectories, TokenizerMode mode);

}  // namespace lar
