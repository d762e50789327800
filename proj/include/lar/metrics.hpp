#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "lar/corpus.hpp"
#include "lar/miner.hpp"
#include "lar/reparam.hpp"
#include "lar/vocab.hpp"

namespace lar {

struct SweepPoint {
  std::size_t k = 0;
  double rate = 0.0;
  double mean_h_lat = 0.0;
  double replaced_fraction = 0.0;  // 1 - rate
};

// Compresses the corpus with each prefix vocabulary of size k (ks ascending,
// clamped to |vocab|) and reports the rate curve. Asserts the curve is sane:
// rate(0) == 1.0 exactly when requested, rates within (0, 1], non-increasing
// in k; a violation throws, since it means the pipeline itself is broken.
std::vector<SweepPoint> sweep(const Corpus& corpus, const LatentVocabulary& vocab,
                              const std::vector<std::size_t>& ks, unsigned threads = 1);

// CSV with header k,rate,mean_H_lat,replaced_fraction; shortest round-trip
// formatting for doubles, so output is byte-stable.
void write_sweep_csv(const std::vector<SweepPoint>& points, std::ostream& out);

struct StageCounts {
  std::uint64_t raw = 0;
  std::uint64_t after_fmin = 0;
  std::uint64_t after_hmax = 0;
  std::uint64_t admitted = 0;
};

struct CorpusReport {
  std::uint64_t n_trajectories = 0;
  std::uint64_t total_h_eff = 0;
  StageCounts stages;  // recomputed from the corpus, not read from artifacts
  std::vector<std::uint64_t> entropy_histogram;  // 0.25-bit bins over [0, h_max]
  std::uint64_t entropy_overflow = 0;
  double bin_width = 0.25;
  double score_min = 0.0, score_max = 0.0, score_mean = 0.0, score_median = 0.0;
  // Compression statistics over the supplied pair set.
  double rate = 0.0;
  double replaced_fraction = 0.0;
  double mean_h_lat = 0.0;
  std::uint64_t total_replacements = 0;
};

// Replays the mining pipeline on the corpus with full statistics and combines
// with compression stats from the pairs. Refuses mismatched artifacts: the
// vocabulary fingerprint must match (config, tokenizer, corpus digest) and
// the pairs must cover exactly the corpus trajectories.
CorpusReport report(const Corpus& corpus, const MinerConfig& config,
                    const LatentVocabulary& vocab, const std::vector<DualPair>& pairs,
                    unsigned threads = 1);

std::string format_report(const CorpusReport& rep);
std::string report_to_json(const CorpusReport& rep);

}  // namespace lar
