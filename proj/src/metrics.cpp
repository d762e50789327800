#include "lar/metrics.hpp"

#include <algorithm>
#include <ostream>
#include <sstream>

#include <json.hpp>

#include "parallel.hpp"
#include "text_util.hpp"

namespace lar {

namespace {

// Streaming rate accumulation: compress each trajectory, keep only the token
// sums. Per-shard sums are reduced in shard order; integer arithmetic makes
// the result independent of the thread count.
struct RateSums {
  std::uint64_t h_lat = 0;
  std::uint64_t h_eff = 0;
};

RateSums accumulate_rate(const Corpus& corpus, const SegmentMatcher& matcher, unsigned threads) {
  const std::size_t n = corpus.trajectories.size();
  const unsigned shards = detail::shard_count(n, threads);
  std::vector<RateSums> partial(std::max(1u, shards));
  detail::parallel_shards(n, threads, [&](unsigned shard, std::size_t begin, std::size_t end) {
    RateSums local;
    for (std::size_t i = begin; i < end; ++i) {
      const DualPair pair = matcher.compress(corpus.trajectories[i]);
      local.h_lat += latent_horizon(pair);
      local.h_eff += effective_horizon(pair.original);
    }
    partial[shard] = local;
  });
  RateSums total;
  for (const auto& p : partial) {
    total.h_lat += p.h_lat;
    total.h_eff += p.h_eff;
  }
  return total;
}

}  // namespace

std::vector<SweepPoint> sweep(const Corpus& corpus, const LatentVocabulary& vocab,
                              const std::vector<std::size_t>& ks, unsigned threads) {
  for (std::size_t i = 1; i < ks.size(); ++i)
    if (ks[i] < ks[i - 1]) throw ValidationError("sweep prefix sizes must be sorted ascending");

  std::vector<SweepPoint> points;
  points.reserve(ks.size());
  for (const std::size_t k : ks) {
    const std::size_t kk = std::min(k, vocab.actions.size());
    const SegmentMatcher matcher(prefix(vocab, kk));
    const RateSums sums = accumulate_rate(corpus, matcher, threads);
    if (sums.h_eff == 0) throw ValidationError("sweep over a corpus with no action tokens");
    SweepPoint p;
    p.k = k;
    p.rate = static_cast<double>(sums.h_lat) / static_cast<double>(sums.h_eff);
    p.mean_h_lat =
        static_cast<double>(sums.h_lat) / static_cast<double>(corpus.trajectories.size());
    p.replaced_fraction = 1.0 - p.rate;
    points.push_back(p);
  }

  // The curve is a pipeline property, not a user-input property: a violation
  // means compress itself broke, so fail loudly on every sweep.
  for (std::size_t i = 0; i < points.size(); ++i) {
    const SweepPoint& p = points[i];
    if (ks[i] == 0 && p.rate != 1.0) throw Error("sweep: rate at k=0 must be exactly 1.0");
    if (!(p.rate > 0.0 && p.rate <= 1.0)) throw Error("sweep: rate outside (0, 1]");
    if (i > 0 && p.rate > points[i - 1].rate)
      throw Error("sweep: rate increased from k=" + std::to_string(ks[i - 1]) + " to k=" +
                  std::to_string(ks[i]));
  }
  return points;
}

void write_sweep_csv(const std::vector<SweepPoint>& points, std::ostream& out) {
  out << "k,rate,mean_H_lat,replaced_fraction\n";
  for (const auto& p : points)
    out << p.k << ',' << detail::format_double(p.rate) << ','
        << detail::format_double(p.mean_h_lat) << ','
        << detail::format_double(p.replaced_fraction) << '\n';
}

CorpusReport report(const Corpus& corpus, const MinerConfig& config,
                    const LatentVocabulary& vocab, const std::vector<DualPair>& pairs,
                    unsigned threads) {
  config.validate();
  const std::string expect =
      vocabulary_fingerprint(config, corpus.tokenizer_mode, corpus.digest);
  if (vocab.fingerprint != expect)
    throw ValidationError(
        "vocabulary fingerprint mismatch: artifacts were not produced from this corpus and "
        "config");
  if (pairs.size() != corpus.trajectories.size())
    throw ValidationError("pair set does not cover the corpus (" + std::to_string(pairs.size()) +
                          " pairs vs " + std::to_string(corpus.trajectories.size()) +
                          " trajectories)");
  for (std::size_t i = 0; i < pairs.size(); ++i)
    if (pairs[i].original.id != corpus.trajectories[i].id)
      throw ValidationError("pair ids do not match the corpus at index " + std::to_string(i));

  CorpusReport rep;
  rep.n_trajectories = corpus.trajectories.size();
  rep.total_h_eff = total_effective_horizon(corpus);

  IdentifyStats stats;
  identify(corpus, config, &stats, threads);
  rep.stages = {stats.raw, stats.after_fmin, stats.after_hmax, stats.admitted};
  rep.entropy_histogram = std::move(stats.entropy_histogram);
  rep.entropy_overflow = stats.entropy_overflow;
  rep.score_min = stats.score_min;
  rep.score_max = stats.score_max;
  rep.score_mean = stats.score_mean;
  rep.score_median = stats.score_median;
  if (rep.stages.raw < rep.stages.after_fmin || rep.stages.after_fmin < rep.stages.after_hmax ||
      rep.stages.after_hmax < rep.stages.admitted)
    throw Error("report: stage counts are not a non-increasing chain");

  std::uint64_t h_lat = 0, h_eff = 0, n_repl = 0;
  for (const auto& p : pairs) {
    h_lat += latent_horizon(p);
    h_eff += effective_horizon(p.original);
    n_repl += p.replacements.size();
  }
  if (h_eff != rep.total_h_eff)
    throw ValidationError("pair token counts disagree with the corpus");
  if (h_eff == 0) throw ValidationError("report over a corpus with no action tokens");
  rep.rate = static_cast<double>(h_lat) / static_cast<double>(h_eff);
  rep.replaced_fraction = 1.0 - rep.rate;
  rep.mean_h_lat = static_cast<double>(h_lat) / static_cast<double>(rep.n_trajectories);
  rep.total_replacements = n_repl;
  return rep;
}

std::string format_report(const CorpusReport& rep) {
  std::ostringstream out;
  out << "trajectories:        " << rep.n_trajectories << '\n';
  out << "action tokens:       " << rep.total_h_eff << '\n';
  out << "candidates raw:      " << rep.stages.raw << '\n';
  out << "  after f_min:       " << rep.stages.after_fmin << '\n';
  out << "  after H_max:       " << rep.stages.after_hmax << '\n';
  out << "  admitted:          " << rep.stages.admitted << '\n';
  out << "entropy histogram (" << detail::format_double(rep.bin_width) << "-bit bins):\n";
  for (std::size_t i = 0; i < rep.entropy_histogram.size(); ++i) {
    const double lo = rep.bin_width * static_cast<double>(i);
    out << "  [" << detail::format_double(lo) << ", "
        << detail::format_double(lo + rep.bin_width) << "): " << rep.entropy_histogram[i]
        << '\n';
  }
  out << "  above H_max:       " << rep.entropy_overflow << '\n';
  out << "scores:              min " << detail::format_double(rep.score_min) << ", max "
      << detail::format_double(rep.score_max) << ", mean "
      << detail::format_double(rep.score_mean) << ", median "
      << detail::format_double(rep.score_median) << '\n';
  out << "rate:                " << detail::format_double(rep.rate) << '\n';
  out << "replaced fraction:   " << detail::format_double(rep.replaced_fraction) << '\n';
  out << "replacements:        " << rep.total_replacements << '\n';
  out << "mean latent horizon: " << detail::format_double(rep.mean_h_lat) << '\n';
  return out.str();
}

std::string report_to_json(const CorpusReport& rep) {
  nlohmann::json j = {
      {"n_trajectories", rep.n_trajectories},
      {"total_H_eff", rep.total_h_eff},
      {"candidates",
       {{"raw", rep.stages.raw},
        {"after_f_min", rep.stages.after_fmin},
        {"after_H_max", rep.stages.after_hmax},
        {"admitted", rep.stages.admitted}}},
      {"entropy_histogram", rep.entropy_histogram},
      {"entropy_overflow", rep.entropy_overflow},
      {"bin_width", rep.bin_width},
      {"scores",
       {{"min", rep.score_min},
        {"max", rep.score_max},
        {"mean", rep.score_mean},
        {"median", rep.score_median}}},
      {"rate", rep.rate},
      {"replaced_fraction", rep.replaced_fraction},
      {"total_replacements", rep.total_replacements},
      {"mean_H_lat", rep.mean_h_lat},
  };
  return j.dump();
}

}  // namespace lar
