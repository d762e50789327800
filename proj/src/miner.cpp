#include "lar/miner.hpp"

#include <algorithm>
#include <cmath>
#include <string_view>
#include <utility>

#include "lar/hash.hpp"
#include "parallel.hpp"
#include "text_util.hpp"

namespace lar {

void MinerConfig::validate() const {
  if (n_lo < 1 || n_lo > n_hi) throw ValidationError("miner config: need 1 <= n_lo <= n_hi");
  if (n_hi > 64) throw ValidationError("miner config: n_hi above 64 is unsupported");
  if (f_min < 1) throw ValidationError("miner config: f_min must be >= 1");
  if (!(h_max >= 0.0)) throw ValidationError("miner config: H_max must be >= 0");
  if (k < 1) throw ValidationError("miner config: K must be >= 1");
  if (!(rho >= 0.0 && rho <= 1.0)) throw ValidationError("miner config: rho must be in [0,1]");
}

std::string MinerConfig::canonical_echo() const {
  std::string s;
  s += "n_lo=" + std::to_string(n_lo);
  s += ";n_hi=" + std::to_string(n_hi);
  s += ";f_min=" + std::to_string(f_min);
  s += ";H_max=" + detail::format_double(h_max);
  s += ";K=" + std::to_string(k);
  s += ";rho=" + detail::format_double(rho);
  return s;
}

std::size_t WordsHash::operator()(const std::vector<std::string>& words) const {
  Fnv1a64 h;
  for (const auto& w : words) h.update_sized(w);
  return static_cast<std::size_t>(h.digest());
}

namespace {

// Words are interned to dense ids; n-gram keys are id sequences stored as
// u32string so windows of the stream can be looked up as views without
// copying. char32_t rather than uint32_t keeps the aliasing rules happy.
using WordId = char32_t;
constexpr WordId kEosId = static_cast<WordId>(0xFFFFFFFFu);

struct IdStream {
  std::vector<WordId> ids;                    // sentence-concatenated action tokens
  std::vector<std::uint64_t> sentence_begin;  // n_sentences + 1 offsets into ids
  std::vector<std::string_view> word_of_id;   // views into corpus token storage

  std::size_t sentences() const { return sentence_begin.size() - 1; }
  std::u32string_view window(std::uint64_t pos, std::uint32_t n) const {
    return std::u32string_view(ids.data() + pos, n);
  }
  std::string_view word(WordId id) const {
    return id == kEosId ? std::string_view(kEndOfSentence)
                        : word_of_id[static_cast<std::size_t>(id)];
  }
};

IdStream build_stream(const Corpus& corpus) {
  IdStream st;
  std::unordered_map<std::string_view, WordId> table;
  for (const auto& traj : corpus.trajectories)
    for (const auto& step : traj.steps) {
      std::uint32_t prev_sentence = 0;
      bool first = true;
      for (const auto& tok : step.action_tokens) {
        if (first || tok.sentence_index != prev_sentence) {
          st.sentence_begin.push_back(st.ids.size());
          prev_sentence = tok.sentence_index;
          first = false;
        }
        auto [it, inserted] = table.emplace(tok.text, static_cast<WordId>(st.word_of_id.size()));
        if (inserted) st.word_of_id.push_back(tok.text);
        st.ids.push_back(it->second);
      }
    }
  st.sentence_begin.push_back(st.ids.size());
  return st;
}

struct U32Hash {
  using is_transparent = void;
  std::size_t operator()(std::u32string_view s) const {
    Fnv1a64 h;
    h.update(s.data(), s.size() * sizeof(char32_t));
    return static_cast<std::size_t>(h.digest());
  }
  std::size_t operator()(const std::u32string& s) const { return (*this)(std::u32string_view(s)); }
};
struct U32Eq {
  using is_transparent = void;
  bool operator()(std::u32string_view a, std::u32string_view b) const { return a == b; }
};
template <typename V>
using SeqMap = std::unordered_map<std::u32string, V, U32Hash, U32Eq>;

// Shared entropy accumulator: terms must arrive in byte-lexicographic order
// of successor text so every caller sums in the same sequence.
template <typename Range>
double entropy_ordered(const Range& terms, std::uint64_t total) {
  if (total == 0) throw ValidationError("entropy of an empty successor distribution");
  const double dt = static_cast<double>(total);
  double h = 0.0;
  for (const auto& [text, count] : terms) {
    if (count == 0) continue;
    const double p = static_cast<double>(count) / dt;
    h -= p * std::log2(p);
  }
  return h;
}

double overlap_ratio(std::u32string_view a, std::u32string_view b) {
  std::size_t best = 0;
  std::vector<std::size_t> dp(b.size() + 1, 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    std::size_t diag = 0;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      std::size_t cur = dp[j];
      dp[j] = (a[i - 1] == b[j - 1]) ? diag + 1 : 0;
      if (dp[j] > best) best = dp[j];
      diag = cur;
    }
  }
  return static_cast<double>(best) / static_cast<double>(std::min(a.size(), b.size()));
}

}  // namespace

double entropy(const SegmentCandidate& candidate) {
  std::uint64_t total = 0;
  for (const auto& [w, c] : candidate.successors) total += c;
  // std::map iterates keys in byte-lexicographic order already.
  return entropy_ordered(candidate.successors, total);
}

double segment_score(const SegmentCandidate& candidate) {
  return static_cast<double>(candidate.freq) / (candidate.entropy_bits + 1.0);
}

double overlap(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  if (a.empty() || b.empty()) throw ValidationError("overlap of an empty word sequence");
  std::size_t best = 0;
  std::vector<std::size_t> dp(b.size() + 1, 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    std::size_t diag = 0;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      std::size_t cur = dp[j];
      dp[j] = (a[i - 1] == b[j - 1]) ? diag + 1 : 0;
      if (dp[j] > best) best = dp[j];
      diag = cur;
    }
  }
  return static_cast<double>(best) / static_cast<double>(std::min(a.size(), b.size()));
}

CandidateMap extract_candidates(const Corpus& corpus, const MinerConfig& config, unsigned threads) {
  config.validate();
  const IdStream st = build_stream(corpus);
  CandidateMap out;

  struct Stat {
    std::uint64_t freq = 0;
    std::unordered_map<WordId, std::uint64_t> succ;
  };

  const std::size_t n_sent = st.sentences();
  for (std::uint32_t n = config.n_lo; n <= config.n_hi; ++n) {
    const unsigned shards = detail::shard_count(n_sent, threads);
    if (shards == 0) break;
    std::vector<SeqMap<Stat>> partial(shards);
    detail::parallel_shards(n_sent, threads, [&](unsigned shard, std::size_t sb, std::size_t se) {
      auto& map = partial[shard];
      for (std::size_t s = sb; s < se; ++s) {
        const std::uint64_t begin = st.sentence_begin[s], end = st.sentence_begin[s + 1];
        if (end - begin < n) continue;
        for (std::uint64_t p = begin; p + n <= end; ++p) {
          auto w = st.window(p, n);
          auto it = map.find(w);
          if (it == map.end()) it = map.emplace(std::u32string(w), Stat{}).first;
          ++it->second.freq;
          const WordId succ = (p + n < end) ? st.ids[p + n] : kEosId;
          ++it->second.succ[succ];
        }
      }
    });
    for (unsigned i = 1; i < shards; ++i) {
      for (auto& [key, stat] : partial[i]) {
        auto& dst = partial[0][key];
        dst.freq += stat.freq;
        for (const auto& [id, c] : stat.succ) dst.succ[id] += c;
      }
      SeqMap<Stat>().swap(partial[i]);
    }
    if (partial[0].empty()) break;  // no window of this length fits; longer ones won't either

    for (auto& [key, stat] : partial[0]) {
      std::vector<std::string> words;
      words.reserve(key.size());
      for (char32_t id : key) words.emplace_back(st.word(id));
      SegmentCandidate cand;
      cand.words = words;
      cand.freq = stat.freq;
      for (const auto& [id, c] : stat.succ) cand.successors.emplace(std::string(st.word(id)), c);
      out.emplace(std::move(words), std::move(cand));
    }
  }
  return out;
}

void merge_candidates(CandidateMap& into, const CandidateMap& from) {
  for (const auto& [key, cand] : from) {
    auto it = into.find(key);
    if (it == into.end()) {
      SegmentCandidate copy = cand;
      copy.entropy_bits = 0.0;
      copy.score = 0.0;
      into.emplace(key, std::move(copy));
      continue;
    }
    SegmentCandidate& dst = it->second;
    dst.freq += cand.freq;
    for (const auto& [w, c] : cand.successors) dst.successors[w] += c;
    // Derived values are stale once counts change; callers recompute.
    dst.entropy_bits = 0.0;
    dst.score = 0.0;
  }
}

namespace {

struct Mined {
  std::u32string key;
  std::uint64_t freq = 0;
  std::unordered_map<WordId, std::uint64_t> successors;
};

enum class LevelResult { no_windows, none_frequent, ok };

// One n-gram level: count (optionally restricted to positions whose length
// n-1 window already met f_min), drop sub-threshold entries, mark surviving
// positions, and tally successors for collected levels. Counting runs as
// parallel partial maps merged with integer adds, so the merged counts are
// independent of the shard structure.
LevelResult run_level(const IdStream& st, std::uint32_t n, std::uint64_t f_min, bool collect,
                      const std::vector<std::uint8_t>* alive_prev,
                      std::vector<std::uint8_t>* alive_out, std::vector<Mined>& survivors,
                      std::uint64_t* raw_distinct, unsigned threads) {
  const std::size_t n_sent = st.sentences();
  const unsigned shards = detail::shard_count(n_sent, threads);
  if (shards == 0) return LevelResult::no_windows;

  std::vector<SeqMap<std::uint64_t>> partial(shards);
  detail::parallel_shards(n_sent, threads, [&](unsigned shard, std::size_t sb, std::size_t se) {
    auto& map = partial[shard];
    for (std::size_t s = sb; s < se; ++s) {
      const std::uint64_t begin = st.sentence_begin[s], end = st.sentence_begin[s + 1];
      if (end - begin < n) continue;
      for (std::uint64_t p = begin; p + n <= end; ++p) {
        if (alive_prev && !(*alive_prev)[p]) continue;
        auto w = st.window(p, n);
        auto it = map.find(w);
        if (it == map.end())
          map.emplace(std::u32string(w), 1);
        else
          ++it->second;
      }
    }
  });
  SeqMap<std::uint64_t> counts = std::move(partial[0]);
  for (unsigned i = 1; i < shards; ++i) {
    for (const auto& [key, c] : partial[i]) counts[key] += c;
    SeqMap<std::uint64_t>().swap(partial[i]);
  }
  if (counts.empty()) return LevelResult::no_windows;
  if (raw_distinct) *raw_distinct = counts.size();

  for (auto it = counts.begin(); it != counts.end();) {
    if (it->second < f_min)
      it = counts.erase(it);
    else
      ++it;
  }
  if (alive_out) std::fill(alive_out->begin(), alive_out->end(), 0);
  if (counts.empty()) return LevelResult::none_frequent;

  // Repurpose counts: value becomes the survivor slot (offset past `base`).
  const std::size_t base = survivors.size();
  if (collect) {
    for (auto& [key, value] : counts) {
      const std::uint64_t freq = value;
      value = survivors.size() - base;
      survivors.push_back(Mined{key, freq, {}});
    }
  }

  for (std::size_t s = 0; s < n_sent; ++s) {
    const std::uint64_t begin = st.sentence_begin[s], end = st.sentence_begin[s + 1];
    if (end - begin < n) continue;
    for (std::uint64_t p = begin; p + n <= end; ++p) {
      if (alive_prev && !(*alive_prev)[p]) continue;
      auto it = counts.find(st.window(p, n));
      if (it == counts.end()) continue;
      if (alive_out) (*alive_out)[p] = 1;
      if (collect) {
        const WordId succ = (p + n < end) ? st.ids[p + n] : kEosId;
        ++survivors[base + it->second].successors[succ];
      }
    }
  }
  return LevelResult::ok;
}

std::size_t histogram_bins(double h_max) {
  return std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(h_max / 0.25)));
}

}  // namespace

std::vector<SegmentCandidate> identify(const Corpus& corpus, const MinerConfig& config,
                                       IdentifyStats* stats, unsigned threads) {
  config.validate();
  const IdStream st = build_stream(corpus);
  const bool full = stats != nullptr;
  if (stats) {
    *stats = IdentifyStats{};
    stats->entropy_histogram.assign(histogram_bins(config.h_max), 0);
  }

  std::vector<Mined> survivors;
  const std::size_t n_pos = st.ids.size();

  if (full) {
    // Statistics need the raw distinct count per level, so count every level
    // in [n_lo, n_hi] unpruned.
    for (std::uint32_t n = config.n_lo; n <= config.n_hi; ++n) {
      std::uint64_t raw = 0;
      const LevelResult r =
          run_level(st, n, config.f_min, true, nullptr, nullptr, survivors, &raw, threads);
      if (r == LevelResult::no_windows) break;
      stats->raw += raw;
    }
  } else {
    // Fast path: a window is counted only where its prefix window met f_min,
    // which cannot lose survivors since freq(prefix) >= freq(window).
    std::vector<std::uint8_t> alive_prev(n_pos, 1), alive_cur(n_pos, 0);
    for (std::uint32_t n = 1; n <= config.n_hi; ++n) {
      const bool collect = n >= config.n_lo;
      const LevelResult r = run_level(st, n, config.f_min, collect,
                                      n == 1 ? nullptr : &alive_prev, &alive_cur, survivors,
                                      nullptr, threads);
      if (r != LevelResult::ok) break;
      std::swap(alive_prev, alive_cur);
    }
  }
  if (stats) stats->after_fmin = survivors.size();

  // Entropy filter. Terms are sorted by successor text for a reproducible
  // summation order; see entropy().
  struct Ranked {
    std::size_t idx = 0;
    double entropy_bits = 0.0;
    double score = 0.0;
    std::vector<std::string_view> words;
  };
  std::vector<Ranked> pool;
  pool.reserve(survivors.size());
  std::vector<std::pair<std::string_view, std::uint64_t>> terms;
  for (std::size_t i = 0; i < survivors.size(); ++i) {
    const Mined& m = survivors[i];
    terms.clear();
    for (const auto& [id, c] : m.successors) terms.emplace_back(st.word(id), c);
    std::sort(terms.begin(), terms.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    const double h = entropy_ordered(terms, m.freq);
    if (stats) {
      if (h > config.h_max) {
        ++stats->entropy_overflow;
      } else {
        std::size_t bin = static_cast<std::size_t>(h / 0.25);
        if (bin >= stats->entropy_histogram.size()) bin = stats->entropy_histogram.size() - 1;
        ++stats->entropy_histogram[bin];
      }
    }
    if (h > config.h_max) continue;
    Ranked r;
    r.idx = i;
    r.entropy_bits = h;
    r.score = static_cast<double>(m.freq) / (h + 1.0);
    r.words.reserve(m.key.size());
    for (char32_t id : m.key) r.words.push_back(st.word(id));
    pool.push_back(std::move(r));
  }
  if (stats) {
    stats->after_hmax = pool.size();
    if (!pool.empty()) {
      std::vector<double> scores;
      scores.reserve(pool.size());
      for (const auto& r : pool) scores.push_back(r.score);
      std::sort(scores.begin(), scores.end());
      stats->score_min = scores.front();
      stats->score_max = scores.back();
      double sum = 0.0;
      for (double v : scores) sum += v;
      stats->score_mean = sum / static_cast<double>(scores.size());
      const std::size_t mid = scores.size() / 2;
      stats->score_median =
          scores.size() % 2 ? scores[mid] : (scores[mid - 1] + scores[mid]) / 2.0;
    }
  }

  std::sort(pool.begin(), pool.end(), [](const Ranked& a, const Ranked& b) {
    if (a.score != b.score) return a.score > b.score;
    if (a.words.size() != b.words.size()) return a.words.size() > b.words.size();
    return a.words < b.words;
  });

  // Greedy admission: reject a candidate that is a contiguous subsequence of
  // an admitted segment (that direction only) or overlaps any admitted
  // segment at ratio >= rho.
  std::vector<std::size_t> admitted;
  for (std::size_t pi = 0; pi < pool.size() && admitted.size() < config.k; ++pi) {
    const std::u32string& cand = survivors[pool[pi].idx].key;
    bool ok = true;
    for (const std::size_t aj : admitted) {
      const std::u32string& prior = survivors[pool[aj].idx].key;
      if (prior.find(cand) != std::u32string::npos || overlap_ratio(cand, prior) >= config.rho) {
        ok = false;
        break;
      }
    }
    if (ok) admitted.push_back(pi);
  }

  std::vector<SegmentCandidate> out;
  out.reserve(admitted.size());
  for (const std::size_t pi : admitted) {
    const Ranked& r = pool[pi];
    const Mined& m = survivors[r.idx];
    SegmentCandidate c;
    c.words.assign(r.words.begin(), r.words.end());
    c.freq = m.freq;
    for (const auto& [id, cnt] : m.successors) c.successors.emplace(std::string(st.word(id)), cnt);
    c.entropy_bits = r.entropy_bits;
    c.score = r.score;
    out.push_back(std::move(c));
  }
  if (stats) stats->admitted = out.size();
  return out;
}

}  // namespace lar
