#include "lar/vocab.hpp"

#include <fstream>
#include <unordered_set>

#include <json.hpp>

#include "lar/hash.hpp"
#include "lar/version.hpp"
#include "text_util.hpp"

namespace lar {

namespace {

using nlohmann::json;

constexpr const char* kOpen = "⟨";   // U+27E8
constexpr const char* kClose = "⟩";  // U+27E9

json config_to_json(const MinerConfig& c, TokenizerMode mode) {
  return json{{"n_lo", c.n_lo},         {"n_hi", c.n_hi}, {"f_min", c.f_min},
              {"H_max", c.h_max},       {"K", c.k},       {"rho", c.rho},
              {"tokenizer", std::string(to_string(mode))}};
}

}  // namespace

std::string latent_symbol(std::uint32_t rank) {
  return std::string(kOpen) + "LAR_" + std::to_string(rank) + kClose;
}

bool is_latent_symbol(std::string_view text) { return latent_rank(text).has_value(); }

std::optional<std::uint32_t> latent_rank(std::string_view text) {
  constexpr std::string_view open = "⟨LAR_";
  constexpr std::string_view close = "⟩";
  if (text.size() <= open.size() + close.size()) return std::nullopt;
  if (text.substr(0, open.size()) != open) return std::nullopt;
  if (text.substr(text.size() - close.size()) != close) return std::nullopt;
  std::string_view digits = text.substr(open.size(), text.size() - open.size() - close.size());
  if (digits.empty() || digits.size() > 9) return std::nullopt;
  std::uint32_t rank = 0;
  for (char c : digits) {
    if (c < '0' || c > '9') return std::nullopt;
    rank = rank * 10 + static_cast<std::uint32_t>(c - '0');
  }
  // No leading zeros: the symbol must round-trip through latent_symbol.
  if (digits.size() > 1 && digits[0] == '0') return std::nullopt;
  return rank;
}

std::string vocabulary_fingerprint(const MinerConfig& config, TokenizerMode mode,
                                   std::string_view corpus_digest) {
  Fnv1a64 h;
  h.update_sized("lar-vocab-fingerprint");
  h.update_sized(config.canonical_echo());
  h.update_sized(to_string(mode));
  h.update_sized(corpus_digest);
  return hex64(h.digest());
}

LatentVocabulary build_vocabulary(const std::vector<SegmentCandidate>& segments,
                                  const MinerConfig& config, TokenizerMode mode,
                                  std::string_view corpus_digest) {
  LatentVocabulary v;
  v.corpus_digest = std::string(corpus_digest);
  v.config = config;
  v.tokenizer_mode = mode;
  v.fingerprint = vocabulary_fingerprint(config, mode, corpus_digest);
  v.actions.reserve(segments.size());

  std::unordered_set<std::size_t> seen;
  WordsHash hasher;
  double prev_score = 0.0;
  for (std::size_t i = 0; i < segments.size(); ++i) {
    const SegmentCandidate& s = segments[i];
    if (s.words.empty()) throw ValidationError("vocabulary segment with no words");
    if (!seen.insert(hasher(s.words)).second) {
      // Hash collision is possible in principle; confirm before accusing.
      for (std::size_t j = 0; j < i; ++j)
        if (segments[j].words == s.words)
          throw ValidationError("duplicate segment in vocabulary input (upstream bug)");
    }
    if (i > 0 && s.score > prev_score)
      throw ValidationError("vocabulary input not in non-increasing score order");
    prev_score = s.score;

    LatentAction a;
    a.rank = static_cast<std::uint32_t>(i);
    a.symbol = latent_symbol(a.rank);
    a.words = s.words;
    a.score = s.score;
    a.freq = s.freq;
    a.entropy_bits = s.entropy_bits;
    v.actions.push_back(std::move(a));
  }
  return v;
}

LatentVocabulary prefix(const LatentVocabulary& vocab, std::size_t k) {
  LatentVocabulary v = vocab;
  if (k < v.actions.size()) v.actions.resize(k);
  return v;
}

void save_vocabulary(const LatentVocabulary& vocab, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write vocabulary file: " + path.string());
  json header = {{"format", "lar-vocab"},
                 {"version", kVocabFileVersion},
                 {"corpus_digest", vocab.corpus_digest},
                 {"config", config_to_json(vocab.config, vocab.tokenizer_mode)},
                 {"fingerprint", vocab.fingerprint},
                 {"count", vocab.actions.size()}};
  out << header.dump() << '\n';
  for (const auto& a : vocab.actions) {
    json rec = {{"symbol", a.symbol},
                {"segment", a.words},
                {"rank", a.rank},
                // doubles as strings: byte-exact round-trip, byte-stable files
                {"score", detail::format_double(a.score)},
                {"freq", a.freq},
                {"entropy_bits", detail::format_double(a.entropy_bits)}};
    out << rec.dump() << '\n';
  }
  if (!out) throw IoError("write error on vocabulary file: " + path.string());
}

LatentVocabulary load_vocabulary(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open vocabulary file: " + path.string());
  std::string line;
  std::size_t line_no = 0;

  auto next_line = [&]() -> bool {
    while (std::getline(in, line)) {
      ++line_no;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (!line.empty()) return true;
    }
    return false;
  };

  if (!next_line()) throw ParseError("missing vocabulary header", 1);
  json header = json::parse(line, nullptr, false);
  if (header.is_discarded() || !header.is_object() || header.value("format", "") != "lar-vocab")
    throw ParseError("not a vocabulary file header", line_no);
  if (header.value("version", -1) != kVocabFileVersion)
    throw ValidationError("unsupported vocabulary schema version in " + path.string());
  if (!header.contains("corpus_digest") || !header.contains("fingerprint") ||
      !header.contains("config") || !header["config"].is_object())
    throw ParseError("vocabulary header missing fields", line_no);

  LatentVocabulary v;
  v.corpus_digest = header["corpus_digest"].get<std::string>();
  v.fingerprint = header["fingerprint"].get<std::string>();
  const json& cfg = header["config"];
  try {
    v.config.n_lo = cfg.at("n_lo").get<std::uint32_t>();
    v.config.n_hi = cfg.at("n_hi").get<std::uint32_t>();
    v.config.f_min = cfg.at("f_min").get<std::uint64_t>();
    v.config.h_max = cfg.at("H_max").get<double>();
    v.config.k = cfg.at("K").get<std::uint32_t>();
    v.config.rho = cfg.at("rho").get<double>();
    v.tokenizer_mode = tokenizer_mode_from_string(cfg.at("tokenizer").get<std::string>());
  } catch (const json::exception& e) {
    throw ParseError(std::string("bad config echo: ") + e.what(), line_no);
  }

  double prev_score = 0.0;
  while (next_line()) {
    json rec = json::parse(line, nullptr, false);
    if (rec.is_discarded() || !rec.is_object())
      throw ParseError("corrupted vocabulary record", line_no);
    LatentAction a;
    try {
      a.symbol = rec.at("symbol").get<std::string>();
      a.words = rec.at("segment").get<std::vector<std::string>>();
      a.rank = rec.at("rank").get<std::uint32_t>();
      a.score = detail::parse_double(rec.at("score").get<std::string>(), "score");
      a.freq = rec.at("freq").get<std::uint64_t>();
      a.entropy_bits = detail::parse_double(rec.at("entropy_bits").get<std::string>(), "entropy_bits");
    } catch (const json::exception& e) {
      throw ParseError(std::string("bad vocabulary record: ") + e.what(), line_no);
    }
    if (a.rank != v.actions.size())
      throw ParseError("vocabulary ranks out of order or gapped", line_no);
    if (a.symbol != latent_symbol(a.rank))
      throw ParseError("symbol does not match rank", line_no);
    if (a.words.empty()) throw ParseError("empty segment", line_no);
    if (!v.actions.empty() && a.score > prev_score)
      throw ParseError("scores increase with rank", line_no);
    prev_score = a.score;
    v.actions.push_back(std::move(a));
  }
  if (in.bad()) throw IoError("read error on vocabulary file: " + path.string());
  if (header.contains("count") && header["count"].is_number_unsigned() &&
      header["count"].get<std::uint64_t>() != v.actions.size())
    throw ValidationError("vocabulary record count does not match header in " + path.string());
  const std::string expect =
      vocabulary_fingerprint(v.config, v.tokenizer_mode, v.corpus_digest);
  if (v.fingerprint != expect)
    throw ValidationError("vocabulary fingerprint does not match its config echo in " +
                          path.string());
  return v;
}

}  // namespace lar
