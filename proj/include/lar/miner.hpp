#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include "lar/corpus.hpp"

namespace lar {

// Token that stands in for "sentence ended" in successor distributions.
// U+27E8/U+27E9 are stripped by the tokenizer, so this cannot collide with
// a real corpus token.
inline constexpr const char* kEndOfSentence = "⟨eos⟩";

struct MinerConfig {
  std::uint32_t n_lo = 2;
  std::uint32_t n_hi = 6;
  std::uint64_t f_min = 10;
  double h_max = 10.0;  // bits
  std::uint32_t k = 100;
  double rho = 0.7;

  void validate() const;  // throws ValidationError
  // Stable key=value echo used in fingerprints and artifact headers.
  std::string canonical_echo() const;

  bool operator==(const MinerConfig&) const = default;
};

struct SegmentCandidate {
  std::vector<std::string> words;
  std::uint64_t freq = 0;
  // Successor token -> count, keyed by token text (kEndOfSentence included).
  std::map<std::string, std::uint64_t> successors;
  double entropy_bits = 0.0;
  double score = 0.0;

  bool operator==(const SegmentCandidate&) const = default;
};

struct WordsHash {
  std::size_t operator()(const std::vector<std::string>& words) const;
};

using CandidateMap = std::unordered_map<std::vector<std::string>, SegmentCandidate, WordsHash>;

// Counts every n-gram with n in [n_lo, n_hi] inside sentence boundaries of
// the action streams, together with its successor distribution (next token in
// the sentence, or the end-of-sentence sentinel). No filtering is applied;
// entropy_bits/score are left 0 for the caller to fill. Results are keyed by
// word sequence, so maps from different corpus shards merge exactly.
CandidateMap extract_candidates(const Corpus& corpus, const MinerConfig& config,
                                unsigned threads = 1);

// Adds `from` into `into`: frequencies and successor counts sum. Integer
// counts make this associative and order-independent.
void merge_candidates(CandidateMap& into, const CandidateMap& from);

// Next-token entropy in bits, -sum p log2 p over the successor distribution.
// Terms are accumulated in byte-lexicographic order of successor text, so the
// value is bit-reproducible regardless of how counts were assembled. Throws
// ValidationError if the distribution is empty.
double entropy(const SegmentCandidate& candidate);

// score = freq / (entropy + 1)
double segment_score(const SegmentCandidate& candidate);

// Longest common contiguous word run divided by min(|a|, |b|).
double overlap(const std::vector<std::string>& a, const std::vector<std::string>& b);

// Per-stage candidate counts plus distribution summaries, filled by identify
// when requested. Collecting these materializes the full unfiltered candidate
// set (the fast path prunes below f_min and never sees raw distinct counts).
struct IdentifyStats {
  std::uint64_t raw = 0;          // distinct n-grams extracted
  std::uint64_t after_fmin = 0;   // surviving the frequency filter
  std::uint64_t after_hmax = 0;   // surviving the entropy filter
  std::uint64_t admitted = 0;     // |Z|
  // 0.25-bit entropy histogram over [0, h_max] for post-f_min candidates;
  // counts above h_max land in `entropy_overflow`.
  std::vector<std::uint64_t> entropy_histogram;
  std::uint64_t entropy_overflow = 0;
  // Score distribution over the ranked pool (post-entropy-filter).
  double score_min = 0.0, score_max = 0.0, score_mean = 0.0, score_median = 0.0;
};

// Mines the latent-action segment set Z:
//   1. count candidates and successor distributions,
//   2. keep freq >= f_min, then entropy <= h_max,
//   3. rank by score desc (ties: longer first, then lexicographic words),
//   4. admit greedily unless the candidate is a contiguous subsequence of an
//      admitted segment or overlaps one at >= rho; stop at k admitted.
// Deterministic for a given corpus + config, independent of `threads`.
std::vector<SegmentCandidate> identify(const Corpus& corpus, const MinerConfig& config,
                                       IdentifyStats* stats = nullptr, unsigned threads = 1);

}  // namespace lar
