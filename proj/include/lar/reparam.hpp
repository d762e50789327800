#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <vector>

#include "lar/corpus.hpp"
#include "lar/vocab.hpp"

namespace lar {

struct SpanReplacement {
  std::uint32_t step = 0;
  std::uint32_t token_start = 0;  // offset into the step's original tokens
  std::uint32_t token_len = 0;    // equals the segment length of the action
  std::uint32_t action_rank = 0;

  bool operator==(const SpanReplacement&) const = default;
};

struct DualPair {
  Trajectory original;
  Trajectory reparameterized;
  std::vector<SpanReplacement> replacements;  // ordered by (step, token_start)
};

struct SegmentOccurrence {
  std::uint32_t action_rank = 0;
  std::uint32_t token_start = 0;
};

// Multi-pattern matcher over vocabulary segments (Aho-Corasick on word ids).
// Matching never crosses a sentence boundary or a step boundary. Build once,
// compress many trajectories; const methods are safe to call concurrently.
class SegmentMatcher {
 public:
  explicit SegmentMatcher(const LatentVocabulary& vocab);
  ~SegmentMatcher();
  SegmentMatcher(SegmentMatcher&&) noexcept;
  SegmentMatcher& operator=(SegmentMatcher&&) noexcept;

  // Greedy longest-first replacement: segments are tried longest first (ties
  // by rank), occurrences left to right, skipping any that overlap an already
  // consumed position. Replaced spans become one symbol token carrying the
  // span's sentence index.
  DualPair compress(const Trajectory& trajectory) const;

  // All segment occurrences in one step's token stream, before any greedy
  // consumption. Exposed for tests and diagnostics.
  std::vector<SegmentOccurrence> find_occurrences(const std::vector<Token>& tokens) const;

  const LatentVocabulary& vocab() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

// Validates the vocabulary fingerprint chain: unless allow_cross_corpus, the
// vocabulary must have been mined from this exact corpus (digest match).
std::vector<DualPair> compress_corpus(const Corpus& corpus, const LatentVocabulary& vocab,
                                      bool allow_cross_corpus = false, unsigned threads = 1);

// Inverse of compress: substitutes each latent symbol's segment back in.
// Exact: expand(compress(t)) reproduces t's token stream, sentence indices
// included. Unknown symbols throw ValidationError naming symbol and position.
Trajectory expand(const Trajectory& reparameterized, const LatentVocabulary& vocab);

// expand + token-level comparison against pair.original.
bool verify_pair(const DualPair& pair, const LatentVocabulary& vocab);

// Sum of reparameterized action tokens over sum of original action tokens.
// Latent symbols count 1. Throws ValidationError on an empty pair set or a
// zero-token original stream.
double reparameterization_rate(const std::vector<DualPair>& pairs);

// Token count of the reparameterized action stream of one pair.
std::uint64_t latent_horizon(const DualPair& pair);

// JSONL, one object per pair: id, original/reparameterized token streams with
// sentence indices, replacement spans. Raw action text is not preserved;
// loaded trajectories re-join tokens with single spaces.
void save_pairs(const std::vector<DualPair>& pairs, const std::filesystem::path& path);
std::vector<DualPair> load_pairs(const std::filesystem::path& path);

}  // namespace lar
