#include "lar/corpus.hpp"

#include <fstream>
#include <unordered_set>
#include <utility>

#include <json.hpp>

#include "lar/hash.hpp"

namespace lar {

namespace {

using nlohmann::json;

constexpr bool is_space_ch(unsigned char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

constexpr bool is_terminal_punct(char c) { return c == '.' || c == '!' || c == '?'; }

// U+27E8 / U+27E9 in UTF-8; reserved for latent symbols.
bool is_reserved_bracket(std::string_view s, std::size_t i) {
  return i + 3 <= s.size() && s[i] == '\xE2' && s[i + 1] == '\x9F' &&
         (s[i + 2] == '\xA8' || s[i + 2] == '\xA9');
}

}  // namespace

std::string_view to_string(TokenizerMode mode) {
  return mode == TokenizerMode::words ? "words" : "words+html";
}

TokenizerMode tokenizer_mode_from_string(std::string_view name) {
  if (name == "words") return TokenizerMode::words;
  if (name == "words+html" || name == "words_plus_html_tags")
    return TokenizerMode::words_plus_html_tags;
  throw ValidationError("unknown tokenizer mode: '" + std::string(name) + "'");
}

std::vector<Token> tokenize_action(std::string_view text, TokenizerMode mode) {
  std::string cleaned;
  cleaned.reserve(text.size());
  for (std::size_t i = 0; i < text.size();) {
    if (is_reserved_bracket(text, i)) {
      i += 3;
      continue;
    }
    cleaned.push_back(text[i]);
    ++i;
  }

  std::vector<Token> out;
  std::uint32_t sentence = 0;
  bool boundary_pending = false;  // next emitted token opens a new sentence
  std::string word;

  auto emit = [&](std::string&& tok) {
    if (!out.empty() && boundary_pending) ++sentence;
    boundary_pending = false;
    out.push_back(Token{std::move(tok), sentence});
  };
  // punct_eligible: the word was ended by whitespace or end of text, so the
  // terminal-punctuation sentence rule may apply.
  auto flush_word = [&](bool punct_eligible) {
    if (word.empty()) return;
    bool ends_sentence = punct_eligible && is_terminal_punct(word.back());
    emit(std::move(word));
    word.clear();
    if (ends_sentence) boundary_pending = true;
  };

  const std::size_t n = cleaned.size();
  std::size_t i = 0;
  while (i < n) {
    char c = cleaned[i];
    if (is_space_ch(static_cast<unsigned char>(c))) {
      flush_word(true);
      if (c == '\n') boundary_pending = true;
      ++i;
      continue;
    }
    if (mode == TokenizerMode::words_plus_html_tags && c == '<') {
      std::size_t j = i + 1;
      while (j < n && cleaned[j] != '<' && cleaned[j] != '>' &&
             !is_space_ch(static_cast<unsigned char>(cleaned[j])))
        ++j;
      if (j < n && cleaned[j] == '>' && j > i + 1) {
        // Bare tag: its own single-token sentence.
        flush_word(false);
        boundary_pending = true;
        emit(cleaned.substr(i, j + 1 - i));
        boundary_pending = true;
        i = j + 1;
        continue;
      }
      // Malformed or attribute-bearing tag: treat '<' as word material.
    }
    word.push_back(c);
    ++i;
  }
  flush_word(true);
  return out;
}

std::uint64_t effective_horizon(const Trajectory& trajectory) {
  std::uint64_t n = 0;
  for (const auto& step : trajectory.steps) n += step.action_tokens.size();
  return n;
}

std::uint64_t total_effective_horizon(const Corpus& corpus) {
  std::uint64_t n = 0;
  for (const auto& t : corpus.trajectories) n += effective_horizon(t);
  return n;
}

std::string compute_corpus_digest(const std::vector<Trajectory>& trajectories,
                                  TokenizerMode mode) {
  Fnv1a64 h;
  h.update_sized("lar-corpus");
  h.update_sized(to_string(mode));
  h.update_u64(trajectories.size());
  for (const auto& t : trajectories) {
    h.update_sized(t.id);
    h.update_u64(t.steps.size());
    for (const auto& s : t.steps) {
      h.update_sized(s.observation);
      h.update_sized(s.action);
    }
  }
  return hex64(h.digest());
}

namespace {

void validate_and_tokenize(std::vector<Trajectory>& trajectories, TokenizerMode mode) {
  std::unordered_set<std::string_view> ids;
  for (auto& t : trajectories) {
    if (t.id.empty()) throw ValidationError("trajectory with empty id");
    if (!ids.insert(t.id).second) throw ValidationError("duplicate trajectory id: " + t.id);
    if (t.steps.empty()) throw ValidationError("trajectory '" + t.id + "' has no steps");
    for (auto& s : t.steps) s.action_tokens = tokenize_action(s.action, mode);
  }
}

}  // namespace

Corpus make_corpus(std::vector<Trajectory> trajectories, TokenizerMode mode) {
  if (trajectories.empty()) throw ValidationError("empty corpus");
  validate_and_tokenize(trajectories, mode);
  Corpus corpus;
  corpus.digest = compute_corpus_digest(trajectories, mode);
  corpus.trajectories = std::move(trajectories);
  corpus.tokenizer_mode = mode;
  return corpus;
}

Corpus load_corpus(const std::filesystem::path& path, TokenizerMode mode, ParsePolicy policy,
                   LoadReport* report) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open corpus file: " + path.string());

  std::vector<Trajectory> trajectories;
  std::unordered_set<std::string> ids;
  std::string line;
  std::size_t line_no = 0;

  auto fail = [&](const std::string& reason) {
    if (policy == ParsePolicy::strict) throw ParseError(reason, line_no);
    if (report) report->skipped.push_back({line_no, reason});
  };

  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;

    json rec = json::parse(line, nullptr, false);
    if (rec.is_discarded() || !rec.is_object()) {
      fail("not a JSON object");
      continue;
    }
    if (!rec.contains("id") || !rec["id"].is_string()) {
      fail("missing string field 'id'");
      continue;
    }
    Trajectory t;
    t.id = rec["id"].get<std::string>();
    if (t.id.empty()) {
      fail("empty 'id'");
      continue;
    }
    if (ids.count(t.id)) {
      fail("duplicate trajectory id: " + t.id);
      continue;
    }
    if (!rec.contains("steps") || !rec["steps"].is_array() || rec["steps"].empty()) {
      fail("missing or empty 'steps' array");
      continue;
    }
    bool bad = false;
    for (const auto& s : rec["steps"]) {
      if (!s.is_object() || !s.contains("action") || !s["action"].is_string() ||
          (s.contains("observation") && !s["observation"].is_string())) {
        fail("malformed step (need string 'action', optional string 'observation')");
        bad = true;
        break;
      }
      Step step;
      if (s.contains("observation")) step.observation = s["observation"].get<std::string>();
      step.action = s["action"].get<std::string>();
      t.steps.push_back(std::move(step));
    }
    if (bad) continue;
    ids.insert(t.id);
    trajectories.push_back(std::move(t));
  }
  if (in.bad()) throw IoError("read error on corpus file: " + path.string());
  if (trajectories.empty())
    throw ValidationError("empty corpus: no usable records in " + path.string());

  validate_and_tokenize(trajectories, mode);
  Corpus corpus;
  corpus.digest = compute_corpus_digest(trajectories, mode);
  corpus.trajectories = std::move(trajectories);
  corpus.tokenizer_mode = mode;
  return corpus;
}

void save_corpus(const Corpus& corpus, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write corpus file: " + path.string());
  for (const auto& t : corpus.trajectories) {
    json steps = json::array();
    for (const auto& s : t.steps) steps.push_back({{"observation", s.observation}, {"action", s.action}});
    json rec = {{"id", t.id}, {"steps", std::move(steps)}};
    out << rec.dump() << '\n';
  }
  if (!out) throw IoError("write error on corpus file: " + path.string());
}

}  // namespace lar
