#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>
#include <json.hpp>

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include "lar/cli.hpp"
#include "lar/corpus.hpp"
#include "lar/metrics.hpp"
#include "synth.hpp"
#include "tempdir.hpp"

using nlohmann::json;

namespace {

// Runs the tool in-process with stdout/stderr captured.
int run_cli(const std::vector<std::string>& args, std::string* out = nullptr,
            std::string* err = nullptr) {
  std::ostringstream cout_buf, cerr_buf;
  std::streambuf* old_out = std::cout.rdbuf(cout_buf.rdbuf());
  std::streambuf* old_err = std::cerr.rdbuf(cerr_buf.rdbuf());
  int code = -1;
  try {
    code = lar::cli::run(args);
  } catch (...) {
    std::cout.rdbuf(old_out);
    std::cerr.rdbuf(old_err);
    throw;
  }
  std::cout.rdbuf(old_out);
  std::cerr.rdbuf(old_err);
  if (out) *out = cout_buf.str();
  if (err) *err = cerr_buf.str();
  return code;
}

std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  return std::string(std::istreambuf_iterator<char>(in), {});
}

void spit(const std::filesystem::path& path, const std::string& body) {
  std::ofstream out(path, std::ios::binary);
  out << body;
}

constexpr const char* kConfig =
    "n = [2, 3]\n"
    "f_min = 2\n"
    "H_max = 10.0\n"
    "K = 8\n"
    "rho = 0.7\n";

// Corpus with one minable trigram; expected artifacts are small enough to
// check exactly.
struct PipelineFixture {
  synth::TempDir dir;
  std::string corpus_path = dir.file("corpus.jsonl").string();
  std::string config_path = dir.file("cfg.toml").string();
  std::string vocab_path = dir.file("vocab.jsonl").string();
  std::string pairs_path = dir.file("pairs.jsonl").string();

  PipelineFixture() {
    auto corpus =
        synth::from_actions({{"a b c", "a b c"}, {"a b c", "x y"}}, lar::TokenizerMode::words);
    lar::save_corpus(corpus, corpus_path);
    spit(config_path, kConfig);
  }

  int identify(std::string* out = nullptr, std::string* err = nullptr) {
    return run_cli({"identify", "--corpus", corpus_path, "--config", config_path, "--out",
                    vocab_path},
                   out, err);
  }
  int compress(std::string* out = nullptr, std::string* err = nullptr) {
    return run_cli({"compress", "--corpus", corpus_path, "--vocab", vocab_path, "--out",
                    pairs_path},
                   out, err);
  }
};

}  // namespace

TEST_CASE("help exits zero and lists the subcommands") {
  std::string out;
  CHECK(run_cli({"--help"}, &out) == 0);
  for (const char* name :
       {"identify", "compress", "expand", "rate", "prep-distill", "sweep", "report", "vocab"})
    CHECK(out.find(name) != std::string::npos);
}

TEST_CASE("usage errors exit one") {
  std::string out, err;
  CHECK(run_cli({}, &out, &err) == 1);
  CHECK(run_cli({"frobnicate"}, &out, &err) == 1);
  CHECK(err.find("error:") != std::string::npos);

  CHECK(run_cli({"identify"}, &out, &err) == 1);
  CHECK(err.find("--corpus") != std::string::npos);

  CHECK(run_cli({"rate", "--pairs", "x.jsonl", "--bogus"}, &out, &err) == 1);
}

TEST_CASE("missing input files exit two") {
  PipelineFixture fx;
  std::string err;
  CHECK(run_cli({"identify", "--corpus", fx.dir.file("nope.jsonl").string(), "--config",
                 fx.config_path, "--out", fx.vocab_path},
                nullptr, &err) == 2);
  CHECK(err.find("error:") != std::string::npos);
  CHECK(run_cli({"rate", "--pairs", fx.dir.file("nope.jsonl").string()}, nullptr, &err) == 2);
}

TEST_CASE("invalid config values exit one") {
  PipelineFixture fx;
  spit(fx.config_path, "n = [2, 3]\nf_min = 2\nH_max = 10.0\nK = 8\nrho = 1.5\n");
  std::string err;
  CHECK(fx.identify(nullptr, &err) == 1);
  CHECK(err.find("error:") != std::string::npos);

  spit(fx.config_path, "n = [2, 3]\nwat = 1\n");
  CHECK(fx.identify(nullptr, &err) == 1);
}

TEST_CASE("identify writes vocabulary plus manifest") {
  PipelineFixture fx;
  std::string out;
  REQUIRE(fx.identify(&out) == 0);
  CHECK(out.find("identified 1 latent actions") != std::string::npos);

  auto vocab = lar::load_vocabulary(fx.vocab_path);
  REQUIRE(vocab.actions.size() == 1);
  CHECK(vocab.actions[0].words == std::vector<std::string>{"a", "b", "c"});

  auto manifest = json::parse(slurp(fx.vocab_path + ".manifest.json"));
  CHECK(manifest["command"] == "identify");
  CHECK(manifest["outputs"]["vocabulary_fingerprint"] == vocab.fingerprint);
  CHECK(manifest["params"]["config_echo"] ==
        "n_lo=2;n_hi=3;f_min=2;H_max=10.0;K=8;rho=0.7");
  CHECK(manifest["params"]["parse_policy"] == "strict");
  CHECK(manifest["argv"].size() == 7);
}

TEST_CASE("manifest path can be overridden") {
  PipelineFixture fx;
  const std::string custom = fx.dir.file("run.json").string();
  REQUIRE(run_cli({"identify", "--corpus", fx.corpus_path, "--config", fx.config_path, "--out",
                   fx.vocab_path, "--manifest", custom}) == 0);
  CHECK(json::parse(slurp(custom))["command"] == "identify");
  CHECK(!std::filesystem::exists(fx.vocab_path + ".manifest.json"));
}

TEST_CASE("compress expand rate round-trip through files") {
  PipelineFixture fx;
  REQUIRE(fx.identify() == 0);

  std::string out;
  REQUIRE(fx.compress(&out) == 0);
  CHECK(out.find("compressed 2 trajectories") != std::string::npos);
  CHECK(out.find("rate") != std::string::npos);

  REQUIRE(run_cli({"expand", "--pairs", fx.pairs_path, "--vocab", fx.vocab_path, "--verify"},
                  &out) == 0);
  CHECK(out.find("round-trip verified") != std::string::npos);

  const std::string expanded = fx.dir.file("expanded.jsonl").string();
  REQUIRE(run_cli({"expand", "--pairs", fx.pairs_path, "--vocab", fx.vocab_path, "--out",
                   expanded}) == 0);
  auto back = lar::load_corpus(expanded, lar::TokenizerMode::words);
  auto original = lar::load_corpus(fx.corpus_path, lar::TokenizerMode::words);
  REQUIRE(back.trajectories.size() == original.trajectories.size());
  CHECK(back.digest == original.digest);

  REQUIRE(run_cli({"rate", "--pairs", fx.pairs_path, "--manifest",
                   fx.dir.file("rate.json").string()},
                  &out) == 0);
  CHECK(out.find("pairs: 2") != std::string::npos);
  CHECK(out.find("original_tokens: 11") != std::string::npos);
  CHECK(out.find("reparameterized_tokens: 5") != std::string::npos);
}

TEST_CASE("expand verify flags tampered pairs") {
  PipelineFixture fx;
  REQUIRE(fx.identify() == 0);
  REQUIRE(fx.compress() == 0);

  std::istringstream in(slurp(fx.pairs_path));
  std::ostringstream rewritten;
  std::string line;
  bool tampered = false;
  while (std::getline(in, line)) {
    auto rec = json::parse(line);
    if (!tampered && rec.contains("original_steps")) {
      rec["original_steps"][0]["tokens"][2] = "zz";
      tampered = true;
    }
    rewritten << rec.dump() << '\n';
  }
  REQUIRE(tampered);
  spit(fx.pairs_path, rewritten.str());

  std::string err;
  CHECK(run_cli({"expand", "--pairs", fx.pairs_path, "--vocab", fx.vocab_path, "--verify",
                 "--manifest", fx.dir.file("m.json").string()},
                nullptr, &err) == 1);
  CHECK(err.find("round-trip mismatch") != std::string::npos);
  CHECK(err.find("failed round-trip") != std::string::npos);
}

TEST_CASE("vocab show and head print the actions") {
  PipelineFixture fx;
  REQUIRE(fx.identify() == 0);

  std::string out;
  REQUIRE(run_cli({"vocab", "show", "--vocab", fx.vocab_path, "--manifest",
                   fx.dir.file("vs.json").string()},
                  &out) == 0);
  CHECK(out.find("# fingerprint") != std::string::npos);
  CHECK(out.find("a b c") != std::string::npos);
  CHECK(out.find(lar::latent_symbol(0)) != std::string::npos);

  REQUIRE(run_cli({"vocab", "head", "--vocab", fx.vocab_path, "--k", "1", "--manifest",
                   fx.dir.file("vh.json").string()},
                  &out) == 0);
  CHECK(out.find("a b c") != std::string::npos);
}

TEST_CASE("sweep writes a csv with an exact leading point") {
  PipelineFixture fx;
  REQUIRE(fx.identify() == 0);

  const std::string csv = fx.dir.file("curve.csv").string();
  REQUIRE(run_cli({"sweep", "--corpus", fx.corpus_path, "--vocab", fx.vocab_path, "--ks",
                   "0,1,5", "--out", csv}) == 0);
  const std::string body = slurp(csv);
  CHECK(body.rfind("k,rate,mean_H_lat,replaced_fraction\n0,1.0,", 0) == 0);

  std::string err;
  CHECK(run_cli({"sweep", "--corpus", fx.corpus_path, "--vocab", fx.vocab_path, "--ks", "5,1"},
                nullptr, &err) == 1);
  CHECK(err.find("ascending") != std::string::npos);
  CHECK(run_cli({"sweep", "--corpus", fx.corpus_path, "--vocab", fx.vocab_path, "--ks", "0,,2"},
                nullptr, &err) == 1);
}

TEST_CASE("sweep refuses a vocabulary from another corpus unless told") {
  PipelineFixture fx;
  REQUIRE(fx.identify() == 0);

  const std::string other = fx.dir.file("other.jsonl").string();
  lar::save_corpus(
      synth::from_actions({{"a b c d e", "a b c q"}}, lar::TokenizerMode::words), other);

  std::string err;
  CHECK(run_cli({"sweep", "--corpus", other, "--vocab", fx.vocab_path, "--ks", "0,1"}, nullptr,
                &err) == 1);
  CHECK(err.find("--allow-cross-corpus") != std::string::npos);

  const std::string csv = fx.dir.file("cross.csv").string();
  CHECK(run_cli({"sweep", "--corpus", other, "--vocab", fx.vocab_path, "--ks", "0,1",
                 "--allow-cross-corpus", "--out", csv}) == 0);
  CHECK(slurp(csv).rfind("k,rate", 0) == 0);
}

TEST_CASE("prep-distill emits mask records") {
  PipelineFixture fx;
  REQUIRE(fx.identify() == 0);
  REQUIRE(fx.compress() == 0);

  const std::string recs = fx.dir.file("distill.jsonl").string();
  REQUIRE(run_cli({"prep-distill", "--pairs", fx.pairs_path, "--out", recs}) == 0);
  std::istringstream in(slurp(recs));
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    auto rec = json::parse(line);
    CHECK(rec.contains("teacher_tokens"));
    CHECK(rec.contains("student_tokens"));
    CHECK(rec.contains("mask_pairs"));
    ++n;
  }
  CHECK(n == 2);
}

TEST_CASE("report prints the pipeline summary") {
  PipelineFixture fx;
  REQUIRE(fx.identify() == 0);
  REQUIRE(fx.compress() == 0);

  std::string out;
  const std::string jpath = fx.dir.file("report.json").string();
  REQUIRE(run_cli({"report", "--corpus", fx.corpus_path, "--config", fx.config_path, "--vocab",
                   fx.vocab_path, "--pairs", fx.pairs_path, "--json", jpath, "--manifest",
                   fx.dir.file("rep.json").string()},
                  &out) == 0);
  CHECK(out.find("trajectories:        2") != std::string::npos);
  CHECK(out.find("action tokens:       11") != std::string::npos);

  auto j = json::parse(slurp(jpath));
  CHECK(j["n_trajectories"] == 2);
  CHECK(j["total_H_eff"] == 11);
  CHECK(j["candidates"]["admitted"] == 1);
}

TEST_CASE("tokenizer override changes the vocabulary mode") {
  synth::TempDir dir;
  const std::string corpus_path = dir.file("c.jsonl").string();
  const std::string config_path = dir.file("cfg.toml").string();
  lar::save_corpus(synth::from_actions({{"click <div> go. click <div> go."}},
                                       lar::TokenizerMode::words),
                   corpus_path);
  spit(config_path, kConfig);

  const std::string plain = dir.file("plain.jsonl").string();
  REQUIRE(run_cli({"identify", "--corpus", corpus_path, "--config", config_path, "--out",
                   plain}) == 0);
  CHECK(lar::load_vocabulary(plain).tokenizer_mode == lar::TokenizerMode::words);

  const std::string html = dir.file("html.jsonl").string();
  REQUIRE(run_cli({"identify", "--corpus", corpus_path, "--config", config_path, "--out", html,
                   "--tokenizer", "words+html"}) == 0);
  CHECK(lar::load_vocabulary(html).tokenizer_mode == lar::TokenizerMode::words_plus_html_tags);

  std::string err;
  CHECK(run_cli({"identify", "--corpus", corpus_path, "--config", config_path, "--out", plain,
                 "--tokenizer", "telepathy"},
                nullptr, &err) == 1);
}

TEST_CASE("config resolves preset names through the preset dir") {
  PipelineFixture fx;
  const auto preset_dir = fx.dir.file("presets");
  std::filesystem::create_directories(preset_dir);
  spit(preset_dir / "mini.toml", kConfig);

  REQUIRE(setenv("LAR_PRESET_DIR", preset_dir.string().c_str(), 1) == 0);
  std::string err;
  const int code = run_cli({"identify", "--corpus", fx.corpus_path, "--config", "mini", "--out",
                            fx.vocab_path},
                           nullptr, &err);
  const int missing = run_cli({"identify", "--corpus", fx.corpus_path, "--config", "absent",
                               "--out", fx.vocab_path},
                              nullptr, &err);
  REQUIRE(unsetenv("LAR_PRESET_DIR") == 0);

  CHECK(code == 0);
  CHECK(missing == 2);
  CHECK(lar::load_vocabulary(fx.vocab_path).actions.size() == 1);
}

TEST_CASE("lenient parsing skips malformed records with a warning") {
  PipelineFixture fx;
  std::string body = slurp(fx.corpus_path);
  body += "{\"id\": \"broken\"}\n";
  spit(fx.corpus_path, body);

  std::string err;
  CHECK(fx.identify(nullptr, &err) == 1);

  REQUIRE(run_cli({"identify", "--corpus", fx.corpus_path, "--config", fx.config_path, "--out",
                   fx.vocab_path, "--lenient"},
                  nullptr, &err) == 0);
  CHECK(err.find("warning: skipped 1 malformed record(s)") != std::string::npos);
  auto manifest = json::parse(slurp(fx.vocab_path + ".manifest.json"));
  CHECK(manifest["params"]["parse_policy"] == "lenient");
}
