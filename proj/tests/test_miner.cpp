#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "lar/miner.hpp"
#include "oracle.hpp"
#include "synth.hpp"

using namespace lar;

namespace {

SegmentCandidate with_successors(std::map<std::string, std::uint64_t> succ) {
  SegmentCandidate cand;
  cand.words = {"x"};
  for (const auto& [_, c] : succ) cand.freq += c;
  cand.successors = std::move(succ);
  return cand;
}

bool same_counts(const CandidateMap& got,
                 const std::map<std::vector<std::string>, oracle::Candidate>& want) {
  if (got.size() != want.size()) return false;
  for (const auto& [words, cand] : want) {
    auto it = got.find(words);
    if (it == got.end()) return false;
    if (it->second.freq != cand.freq) return false;
    if (it->second.successors != cand.successors) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("entropy matches the direct formula") {
  CHECK(entropy(with_successors({{"a", 5}})) == 0.0);
  CHECK(entropy(with_successors({{"a", 1}, {"b", 1}})) == 1.0);
  CHECK(entropy(with_successors({{"a", 3}, {"b", 1}})) ==
        doctest::Approx(0.8112781244591328).epsilon(1e-12));
  CHECK(entropy(with_successors({{"a", 1}, {"b", 1}, {"c", 1}, {"d", 1}})) == 2.0);

  SegmentCandidate empty;
  empty.words = {"x"};
  CHECK_THROWS_AS((void)entropy(empty), ValidationError);
}

TEST_CASE("entropy ignores zero-count entries") {
  auto cand = with_successors({{"a", 2}, {"b", 0}, {"c", 2}});
  CHECK(entropy(cand) == 1.0);
}

TEST_CASE("score is freq over entropy plus one") {
  auto cand = with_successors({{"a", 3}, {"b", 1}});
  cand.entropy_bits = entropy(cand);
  CHECK(segment_score(cand) ==
        doctest::Approx(4.0 / (0.8112781244591328 + 1.0)).epsilon(1e-12));
}

TEST_CASE("overlap is the longest shared run over the shorter length") {
  using V = std::vector<std::string>;
  CHECK(overlap(V{"a", "b"}, V{"a", "b"}) == 1.0);
  CHECK(overlap(V{"a", "b"}, V{"c", "d"}) == 0.0);
  CHECK(overlap(V{"a", "b", "c", "d"}, V{"b", "c"}) == 1.0);
  CHECK(overlap(V{"a", "b", "c"}, V{"b", "c", "d", "e"}) == doctest::Approx(2.0 / 3.0));
  CHECK(overlap(V{"a", "b", "x", "a", "b", "c"}, V{"z", "a", "b", "c"}) ==
        doctest::Approx(3.0 / 4.0));
  CHECK(overlap(V{"a"}, V{"b", "a", "c"}) == 1.0);
  CHECK_THROWS_AS((void)overlap(V{}, V{"a"}), ValidationError);
}

TEST_CASE("overlap agrees with the exhaustive scan on random word vectors") {
  synth::Rng rng(11);
  const std::vector<std::string> alphabet = {"a", "b", "c", "d"};
  for (int it = 0; it < 500; ++it) {
    std::vector<std::string> x, y;
    for (std::size_t i = 0, n = 1 + rng() % 7; i < n; ++i)
      x.push_back(alphabet[rng() % alphabet.size()]);
    for (std::size_t i = 0, n = 1 + rng() % 7; i < n; ++i)
      y.push_back(alphabet[rng() % alphabet.size()]);
    CHECK(overlap(x, y) == oracle::overlap(x, y));
    CHECK(overlap(x, y) == overlap(y, x));
  }
}

TEST_CASE("successor distributions include the end of sentence sentinel") {
  auto corpus = synth::from_actions({{"a b. a b c"}}, TokenizerMode::words);
  MinerConfig cfg;
  cfg.n_lo = 2;
  cfg.n_hi = 2;
  auto counts = extract_candidates(corpus, cfg);
  const auto& ab = counts.at({"a", "b."});
  CHECK(ab.freq == 1);
  CHECK(ab.successors == std::map<std::string, std::uint64_t>{{kEndOfSentence, 1}});
  const auto& ab2 = counts.at({"a", "b"});
  CHECK(ab2.successors == std::map<std::string, std::uint64_t>{{"c", 1}});
  const auto& bc = counts.at({"b", "c"});
  CHECK(bc.successors == std::map<std::string, std::uint64_t>{{kEndOfSentence, 1}});
}

TEST_CASE("ngrams never cross sentence or step boundaries") {
  auto split_sentence = synth::from_actions({{"a b. c d"}}, TokenizerMode::words);
  auto split_step = synth::from_actions({{"a b", "c d"}}, TokenizerMode::words);
  MinerConfig cfg;
  cfg.n_lo = 2;
  cfg.n_hi = 4;
  for (const auto* corpus : {&split_sentence, &split_step}) {
    auto counts = extract_candidates(*corpus, cfg);
    CHECK(counts.count({"b.", "c"}) == 0);
    CHECK(counts.count({"b", "c"}) == 0);
    CHECK(counts.size() == 2);
  }
}

TEST_CASE("extraction matches the brute-force count on random corpora") {
  synth::Rng rng(23);
  for (int it = 0; it < 60; ++it) {
    const auto mode =
        it % 3 == 0 ? TokenizerMode::words_plus_html_tags : TokenizerMode::words;
    Corpus corpus = synth::random_small(rng, 200, mode);
    MinerConfig cfg;
    cfg.n_lo = 1 + rng() % 2;
    cfg.n_hi = cfg.n_lo + rng() % 3;
    auto got = extract_candidates(corpus, cfg, 1 + rng() % 4);
    auto want = oracle::count_ngrams(corpus, cfg.n_lo, cfg.n_hi);
    CHECK(same_counts(got, want));
  }
}

TEST_CASE("sharded extraction merges to the single-pass result") {
  synth::Rng rng(31);
  Corpus corpus = synth::agentish(20000, TokenizerMode::words, 5);
  MinerConfig cfg;
  cfg.n_lo = 2;
  cfg.n_hi = 4;
  auto whole = extract_candidates(corpus, cfg);

  for (int it = 0; it < 5; ++it) {
    const std::size_t cut = 1 + rng() % (corpus.trajectories.size() - 1);
    Corpus left, right;
    left.tokenizer_mode = right.tokenizer_mode = corpus.tokenizer_mode;
    left.trajectories.assign(corpus.trajectories.begin(), corpus.trajectories.begin() + cut);
    right.trajectories.assign(corpus.trajectories.begin() + cut, corpus.trajectories.end());
    auto merged = extract_candidates(left, cfg);
    merge_candidates(merged, extract_candidates(right, cfg));
    REQUIRE(merged.size() == whole.size());
    for (auto& [words, cand] : merged) {
      auto it2 = whole.find(words);
      REQUIRE(it2 != whole.end());
      CHECK(cand.freq == it2->second.freq);
      CHECK(cand.successors == it2->second.successors);
    }
  }
}

TEST_CASE("identify replays the reference algorithm on random corpora") {
  synth::Rng rng(47);
  for (int it = 0; it < 40; ++it) {
    Corpus corpus = synth::random_small(rng, 200);
    MinerConfig cfg;
    cfg.n_lo = 1 + rng() % 2;
    cfg.n_hi = cfg.n_lo + rng() % 3;
    cfg.f_min = 1 + rng() % 3;
    cfg.h_max = std::vector<double>{0.5, 1.0, 2.0, 10.0}[rng() % 4];
    cfg.k = 1 + rng() % 20;
    cfg.rho = std::vector<double>{0.3, 0.5, 0.7, 1.0}[rng() % 4];

    auto got = identify(corpus, cfg, nullptr, 1 + rng() % 3);
    auto want = oracle::replay_identify(corpus, cfg);
    REQUIRE(got.size() == want.size());
    for (std::size_t i = 0; i < got.size(); ++i) {
      CHECK(got[i].words == want[i].words);
      CHECK(got[i].freq == want[i].freq);
      CHECK(got[i].successors == want[i].successors);
      CHECK(got[i].entropy_bits == doctest::Approx(want[i].entropy_bits).epsilon(1e-9));
      CHECK(got[i].score == doctest::Approx(want[i].score).epsilon(1e-9));
    }
  }
}

TEST_CASE("identify output is independent of thread count") {
  Corpus corpus = synth::agentish(30000, TokenizerMode::words, 17);
  MinerConfig cfg;
  cfg.n_lo = 2;
  cfg.n_hi = 5;
  cfg.f_min = 3;
  cfg.k = 50;
  auto base = identify(corpus, cfg, nullptr, 1);
  for (unsigned threads : {2u, 3u, 8u}) {
    auto other = identify(corpus, cfg, nullptr, threads);
    CHECK(other == base);
  }
}

TEST_CASE("frequency filter boundary is inclusive") {
  auto corpus = synth::from_actions({{"a b\na b\na b\nc d"}}, TokenizerMode::words);
  MinerConfig cfg;
  cfg.n_lo = 2;
  cfg.n_hi = 2;
  cfg.f_min = 3;
  auto z = identify(corpus, cfg);
  REQUIRE(z.size() == 1);
  CHECK(z[0].words == std::vector<std::string>{"a", "b"});
  CHECK(z[0].freq == 3);

  cfg.f_min = 4;
  CHECK(identify(corpus, cfg).empty());
}

TEST_CASE("entropy filter boundary is inclusive") {
  // "a b" is followed by c once and d once: exactly 1 bit
  auto corpus = synth::from_actions({{"a b c\na b d"}}, TokenizerMode::words);
  MinerConfig cfg;
  cfg.n_lo = 2;
  cfg.n_hi = 2;
  cfg.f_min = 2;
  cfg.h_max = 1.0;
  auto z = identify(corpus, cfg);
  REQUIRE(z.size() == 1);
  CHECK(z[0].entropy_bits == 1.0);

  cfg.h_max = 0.999;
  CHECK(identify(corpus, cfg).empty());
}

TEST_CASE("ranking prefers high score then longer segments then lexicographic") {
  // both "a b" and "b a" occur twice with entropy 0; tie broken lexicographically
  auto corpus = synth::from_actions({{"a b\na b\nb a\nb a"}}, TokenizerMode::words);
  MinerConfig cfg;
  cfg.n_lo = 2;
  cfg.n_hi = 2;
  cfg.f_min = 2;
  cfg.rho = 1.0;
  auto z = identify(corpus, cfg);
  REQUIRE(z.size() == 2);
  CHECK(z[0].words == std::vector<std::string>{"a", "b"});
  CHECK(z[1].words == std::vector<std::string>{"b", "a"});
}

TEST_CASE("admission rejects contained and overlapping candidates") {
  // pool order: "p q" (4.0), "q r s" (3.0), "r s" (3.0), "p q r", "q r" (2.2each).
  // "r s" and "q r" are contained in the admitted "q r s"; "p q r" shares the
  // full run "p q" with the admitted "p q" (overlap 1.0).
  auto corpus = synth::from_actions(
      {{"p q r s\np q r s\np q r s\np q r t"}}, TokenizerMode::words);
  MinerConfig cfg;
  cfg.n_lo = 2;
  cfg.n_hi = 3;
  cfg.f_min = 2;
  cfg.rho = 0.6;
  auto z = identify(corpus, cfg);
  REQUIRE(z.size() == 2);
  CHECK(z[0].words == std::vector<std::string>{"p", "q"});
  CHECK(z[1].words == std::vector<std::string>{"q", "r", "s"});
  CHECK(overlap(z[0].words, z[1].words) < cfg.rho);
}

TEST_CASE("capacity stops admission at k") {
  auto corpus = synth::agentish(5000, TokenizerMode::words, 3);
  MinerConfig cfg;
  cfg.n_lo = 2;
  cfg.n_hi = 4;
  cfg.f_min = 2;
  cfg.k = 4;
  CHECK(identify(corpus, cfg).size() <= 4);
}

TEST_CASE("admitted segments always satisfy the filter contract") {
  synth::Rng rng(59);
  for (int it = 0; it < 25; ++it) {
    Corpus corpus = synth::random_small(rng, 200);
    MinerConfig cfg;
    cfg.n_lo = 1;
    cfg.n_hi = 4;
    cfg.f_min = 2;
    cfg.h_max = 1.5;
    cfg.k = 10;
    cfg.rho = 0.7;
    auto z = identify(corpus, cfg);
    for (std::size_t i = 0; i < z.size(); ++i) {
      CHECK(z[i].freq >= cfg.f_min);
      CHECK(z[i].entropy_bits <= cfg.h_max);
      if (i > 0) CHECK(z[i].score <= z[i - 1].score);
      for (std::size_t j = 0; j < i; ++j) {
        CHECK(overlap(z[i].words, z[j].words) < cfg.rho);
        CHECK(!oracle::contains_run(z[j].words, z[i].words));
      }
    }
  }
}

TEST_CASE("identify handles corpora with no candidates") {
  auto corpus = synth::from_actions({{"a"}}, TokenizerMode::words);
  MinerConfig cfg;
  cfg.n_lo = 2;
  cfg.n_hi = 3;
  CHECK(identify(corpus, cfg).empty());

  IdentifyStats stats;
  CHECK(identify(corpus, cfg, &stats).empty());
  CHECK(stats.raw == 0);
  CHECK(stats.admitted == 0);
}

TEST_CASE("stats report every pipeline stage") {
  // bigrams: "a b" x4 (succ c,c,d,eos), "b c" x2, "c e" x2, "b d" x1, "d e" x1
  auto corpus = synth::from_actions(
      {{"a b c e\na b c e\na b d e\na b"}}, TokenizerMode::words);
  MinerConfig cfg;
  cfg.n_lo = 2;
  cfg.n_hi = 2;
  cfg.f_min = 2;
  cfg.h_max = 0.9;
  cfg.k = 10;
  IdentifyStats stats;
  auto z = identify(corpus, cfg, &stats);

  CHECK(stats.raw == 5);
  CHECK(stats.after_fmin == 3);  // "a b" (4), "b c" (2), "c e" (2)
  // H("a b") over {c:2, d:1, eos:1} = 1.5 bits > 0.9; the other two are 0
  CHECK(stats.after_hmax == 2);
  CHECK(stats.admitted == 2);
  REQUIRE(z.size() == 2);
  CHECK(z[0].words == std::vector<std::string>{"b", "c"});
  CHECK(z[1].words == std::vector<std::string>{"c", "e"});

  // histogram covers post-f_min candidates: H=1.5 overflows h_max=0.9
  REQUIRE(!stats.entropy_histogram.empty());
  CHECK(stats.entropy_histogram[0] == 2);
  CHECK(stats.entropy_overflow == 1);
  CHECK(stats.score_min == 2.0);
  CHECK(stats.score_max == 2.0);
  CHECK(stats.score_mean == 2.0);
  CHECK(stats.score_median == 2.0);
}

TEST_CASE("stats and fast paths admit the same segments") {
  synth::Rng rng(67);
  for (int it = 0; it < 15; ++it) {
    Corpus corpus = synth::random_small(rng, 200);
    MinerConfig cfg;
    cfg.n_lo = 2;
    cfg.n_hi = 4;
    cfg.f_min = 2;
    cfg.k = 8;
    IdentifyStats stats;
    auto with_stats = identify(corpus, cfg, &stats);
    auto without = identify(corpus, cfg);
    CHECK(with_stats == without);
    CHECK(stats.admitted == with_stats.size());
  }
}

TEST_CASE("config validation rejects out-of-range values") {
  MinerConfig cfg;
  CHECK_NOTHROW(cfg.validate());

  auto bad = [](auto mutate) {
    MinerConfig c;
    mutate(c);
    CHECK_THROWS_AS(c.validate(), ValidationError);
  };
  bad([](MinerConfig& c) { c.n_lo = 0; });
  bad([](MinerConfig& c) { c.n_lo = 5; c.n_hi = 4; });
  bad([](MinerConfig& c) { c.n_hi = 65; });
  bad([](MinerConfig& c) { c.f_min = 0; });
  bad([](MinerConfig& c) { c.h_max = -0.1; });
  bad([](MinerConfig& c) { c.k = 0; });
  bad([](MinerConfig& c) { c.rho = -0.1; });
  bad([](MinerConfig& c) { c.rho = 1.01; });
}

TEST_CASE("canonical echo is stable and complete") {
  MinerConfig cfg;
  cfg.n_lo = 3;
  cfg.n_hi = 5;
  cfg.f_min = 2000;
  cfg.h_max = 10.0;
  cfg.k = 1000;
  cfg.rho = 0.7;
  CHECK(cfg.canonical_echo() == "n_lo=3;n_hi=5;f_min=2000;H_max=10.0;K=1000;rho=0.7");
}
