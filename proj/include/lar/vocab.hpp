#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "lar/corpus.hpp"
#include "lar/miner.hpp"

namespace lar {

struct LatentAction {
  std::string symbol;              // "<LAR_k>" with angle brackets U+27E8/U+27E9
  std::vector<std::string> words;  // the segment this symbol expands to
  std::uint32_t rank = 0;
  double score = 0.0;
  std::uint64_t freq = 0;
  double entropy_bits = 0.0;

  bool operator==(const LatentAction&) const = default;
};

struct LatentVocabulary {
  std::vector<LatentAction> actions;  // rank order: actions[i].rank == i
  std::string corpus_digest;          // corpus the segments were mined from
  MinerConfig config;
  TokenizerMode tokenizer_mode = TokenizerMode::words;
  std::string fingerprint;  // hash of canonical config echo + corpus digest

  std::size_t size() const { return actions.size(); }
  bool operator==(const LatentVocabulary&) const = default;
};

// "<LAR_k>" rendered with the reserved angle brackets.
std::string latent_symbol(std::uint32_t rank);

// True if text has the exact shape of a latent symbol (reserved brackets,
// "LAR_" prefix, decimal rank). Parse the rank with latent_rank().
bool is_latent_symbol(std::string_view text);
std::optional<std::uint32_t> latent_rank(std::string_view text);

std::string vocabulary_fingerprint(const MinerConfig& config, TokenizerMode mode,
                                   std::string_view corpus_digest);

// Wraps ranked identify() output into a vocabulary. Ranks and symbols are
// assigned by position. Validates: non-empty segments, no duplicate segments,
// non-increasing scores. Dedup invariants beyond that are inherited from the
// miner, not re-checked here.
LatentVocabulary build_vocabulary(const std::vector<SegmentCandidate>& segments,
                                  const MinerConfig& config, TokenizerMode mode,
                                  std::string_view corpus_digest);

// First k actions (clamped to size). Header fields are preserved: a prefix is
// still an artifact of the same corpus + config.
LatentVocabulary prefix(const LatentVocabulary& vocab, std::size_t k);

// Line-delimited file: a version header object, then one object per action in
// rank order. save/load round-trips exactly (doubles via shortest to_chars).
// load rejects unknown versions, malformed lines, rank gaps, score ordering
// violations and symbol mismatches.
void save_vocabulary(const LatentVocabulary& vocab, const std::filesystem::path& path);
LatentVocabulary load_vocabulary(const std::filesystem::path& path);

}  // namespace lar
