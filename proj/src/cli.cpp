#include "lar/cli.hpp"

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <thread>

#include <CLI11.hpp>

#include "lar/config.hpp"
#include "lar/corpus.hpp"
#include "lar/distill.hpp"
#include "lar/manifest.hpp"
#include "lar/metrics.hpp"
#include "lar/miner.hpp"
#include "lar/reparam.hpp"
#include "lar/version.hpp"
#include "lar/vocab.hpp"
#include "text_util.hpp"

namespace lar::cli {

namespace {

namespace fs = std::filesystem;

class Stopwatch {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

unsigned effective_threads(unsigned requested) {
  if (requested != 0) return requested;
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : hw;
}

// Options shared by the subcommands; each command reads what it declared.
struct Options {
  std::string corpus, config, vocab, pairs, out, json_out, manifest, tokenizer, ks;
  unsigned threads = 1;
  bool lenient = false;
  bool verify = false;
  bool allow_cross_corpus = false;
  std::size_t head_k = 10;
};

ParsePolicy policy_of(const Options& o) {
  return o.lenient ? ParsePolicy::lenient : ParsePolicy::strict;
}

Corpus load_with_report(const std::string& path, TokenizerMode mode, const Options& o) {
  LoadReport report;
  Corpus corpus = load_corpus(path, mode, policy_of(o), &report);
  if (!report.skipped.empty()) {
    std::cerr << "warning: skipped " << report.skipped.size() << " malformed record(s) in "
              << path << " (first: line " << report.skipped.front().line << ": "
              << report.skipped.front().reason << ")\n";
  }
  return corpus;
}

void emit_manifest(RunManifest manifest, const Stopwatch& sw, const Options& o,
                   const std::vector<std::string>& argv, const std::string& default_stem) {
  manifest.argv = argv;
  manifest.tool_version = kVersion;
  manifest.wall_time_seconds = sw.seconds();
  manifest.timestamp_utc = utc_timestamp_now();
  fs::path path;
  if (!o.manifest.empty())
    path = o.manifest;
  else if (!o.out.empty())
    path = o.out + ".manifest.json";
  else
    path = default_stem + ".manifest.json";
  write_manifest(manifest, path);
}

std::vector<std::size_t> parse_ks(const std::string& spec) {
  std::vector<std::size_t> ks;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= spec.size(); ++i) {
    if (i == spec.size() || spec[i] == ',') {
      std::string_view item(spec.data() + start, i - start);
      while (!item.empty() && item.front() == ' ') item.remove_prefix(1);
      while (!item.empty() && item.back() == ' ') item.remove_suffix(1);
      if (item.empty()) throw ValidationError("empty entry in --ks list");
      ks.push_back(static_cast<std::size_t>(detail::parse_u64(item, "--ks")));
      start = i + 1;
    }
  }
  if (ks.empty()) throw ValidationError("--ks must list at least one prefix size");
  return ks;
}

int cmd_identify(const Options& o, const std::vector<std::string>& argv) {
  Stopwatch sw;
  const fs::path config_path = resolve_config_path(o.config);
  RunConfig rc = parse_config(config_path);
  if (!o.tokenizer.empty()) rc.tokenizer = tokenizer_mode_from_string(o.tokenizer);
  const unsigned threads = effective_threads(o.threads);

  const Corpus corpus = load_with_report(o.corpus, rc.tokenizer, o);
  const auto segments = identify(corpus, rc.miner, nullptr, threads);
  const LatentVocabulary vocab =
      build_vocabulary(segments, rc.miner, rc.tokenizer, corpus.digest);
  save_vocabulary(vocab, o.out);

  RunManifest m;
  m.command = "identify";
  m.inputs = {{"corpus", o.corpus},
              {"corpus_digest", corpus.digest},
              {"config", config_path.string()}};
  m.outputs = {{"vocabulary", o.out}, {"vocabulary_fingerprint", vocab.fingerprint}};
  m.params = {{"config_echo", rc.miner.canonical_echo()},
              {"tokenizer", std::string(to_string(rc.tokenizer))},
              {"threads", std::to_string(threads)},
              {"parse_policy", o.lenient ? "lenient" : "strict"}};
  emit_manifest(std::move(m), sw, o, argv, "identify");

  std::cout << "identified " << vocab.actions.size() << " latent actions from "
            << corpus.trajectories.size() << " trajectories ("
            << total_effective_horizon(corpus) << " action tokens) -> " << o.out << '\n';
  return 0;
}

int cmd_compress(const Options& o, const std::vector<std::string>& argv) {
  Stopwatch sw;
  const LatentVocabulary vocab = load_vocabulary(o.vocab);
  const unsigned threads = effective_threads(o.threads);
  const Corpus corpus = load_with_report(o.corpus, vocab.tokenizer_mode, o);
  const auto pairs = compress_corpus(corpus, vocab, o.allow_cross_corpus, threads);
  save_pairs(pairs, o.out);
  const double rate = reparameterization_rate(pairs);
  std::uint64_t replacements = 0;
  for (const auto& p : pairs) replacements += p.replacements.size();

  RunManifest m;
  m.command = "compress";
  m.inputs = {{"corpus", o.corpus},
              {"corpus_digest", corpus.digest},
              {"vocabulary", o.vocab},
              {"vocabulary_fingerprint", vocab.fingerprint}};
  m.outputs = {{"pairs", o.out}};
  m.params = {{"threads", std::to_string(threads)},
              {"allow_cross_corpus", o.allow_cross_corpus ? "true" : "false"},
              {"rate", detail::format_double(rate)},
              {"parse_policy", o.lenient ? "lenient" : "strict"}};
  emit_manifest(std::move(m), sw, o, argv, "compress");

  std::cout << "compressed " << pairs.size() << " trajectories: rate "
            << detail::format_double(rate) << ", " << replacements << " replacements -> "
            << o.out << '\n';
  return 0;
}

int cmd_expand(const Options& o, const std::vector<std::string>& argv) {
  Stopwatch sw;
  const LatentVocabulary vocab = load_vocabulary(o.vocab);
  const auto pairs = load_pairs(o.pairs);

  if (o.verify) {
    std::uint64_t failures = 0;
    for (const auto& p : pairs) {
      if (!verify_pair(p, vocab)) {
        if (++failures <= 5)
          std::cerr << "round-trip mismatch for pair '" << p.original.id << "'\n";
      }
    }
    if (failures) {
      std::cerr << failures << " of " << pairs.size() << " pairs failed round-trip\n";
      return 1;
    }
  }

  if (!o.out.empty()) {
    Corpus expanded;
    expanded.tokenizer_mode = vocab.tokenizer_mode;
    expanded.trajectories.reserve(pairs.size());
    for (const auto& p : pairs) expanded.trajectories.push_back(expand(p.reparameterized, vocab));
    save_corpus(expanded, o.out);
  }

  RunManifest m;
  m.command = "expand";
  m.inputs = {{"pairs", o.pairs},
              {"vocabulary", o.vocab},
              {"vocabulary_fingerprint", vocab.fingerprint}};
  if (!o.out.empty()) m.outputs = {{"corpus", o.out}};
  m.params = {{"verify", o.verify ? "true" : "false"}};
  emit_manifest(std::move(m), sw, o, argv, "expand");

  std::cout << "expanded " << pairs.size() << " pairs"
            << (o.verify ? " (round-trip verified)" : "")
            << (o.out.empty() ? "" : " -> " + o.out) << '\n';
  return 0;
}

int cmd_rate(const Options& o, const std::vector<std::string>& argv) {
  Stopwatch sw;
  const auto pairs = load_pairs(o.pairs);
  std::uint64_t h_lat = 0, h_eff = 0;
  for (const auto& p : pairs) {
    h_lat += latent_horizon(p);
    h_eff += effective_horizon(p.original);
  }
  const double rate = reparameterization_rate(pairs);

  RunManifest m;
  m.command = "rate";
  m.inputs = {{"pairs", o.pairs}};
  m.params = {{"rate", detail::format_double(rate)}};
  emit_manifest(std::move(m), sw, o, argv, "rate");

  std::cout << "pairs: " << pairs.size() << '\n'
            << "original_tokens: " << h_eff << '\n'
            << "reparameterized_tokens: " << h_lat << '\n'
            << "rate: " << detail::format_double(rate) << '\n'
            << "replaced_fraction: " << detail::format_double(1.0 - rate) << '\n';
  return 0;
}

int cmd_prep_distill(const Options& o, const std::vector<std::string>& argv) {
  Stopwatch sw;
  const auto pairs = load_pairs(o.pairs);
  write_distill_records(pairs, o.out);

  RunManifest m;
  m.command = "prep-distill";
  m.inputs = {{"pairs", o.pairs}};
  m.outputs = {{"records", o.out}};
  emit_manifest(std::move(m), sw, o, argv, "prep-distill");

  std::cout << "wrote " << pairs.size() << " distillation records -> " << o.out << '\n';
  return 0;
}

int cmd_sweep(const Options& o, const std::vector<std::string>& argv) {
  Stopwatch sw;
  const LatentVocabulary vocab = load_vocabulary(o.vocab);
  const unsigned threads = effective_threads(o.threads);
  const Corpus corpus = load_with_report(o.corpus, vocab.tokenizer_mode, o);
  if (!o.allow_cross_corpus && vocab.corpus_digest != corpus.digest)
    throw ValidationError(
        "vocabulary was mined from a different corpus; pass --allow-cross-corpus to sweep "
        "anyway");
  const auto ks = parse_ks(o.ks);
  const auto points = sweep(corpus, vocab, ks, threads);

  if (o.out.empty()) {
    write_sweep_csv(points, std::cout);
  } else {
    std::ofstream out(o.out, std::ios::binary);
    if (!out) throw IoError("cannot write sweep output: " + o.out);
    write_sweep_csv(points, out);
    if (!out) throw IoError("write error on sweep output: " + o.out);
  }

  RunManifest m;
  m.command = "sweep";
  m.inputs = {{"corpus", o.corpus},
              {"corpus_digest", corpus.digest},
              {"vocabulary", o.vocab},
              {"vocabulary_fingerprint", vocab.fingerprint}};
  if (!o.out.empty()) m.outputs = {{"csv", o.out}};
  m.params = {{"ks", o.ks}, {"threads", std::to_string(threads)}};
  emit_manifest(std::move(m), sw, o, argv, "sweep");

  if (!o.out.empty())
    std::cout << "swept " << points.size() << " prefix sizes -> " << o.out << '\n';
  return 0;
}

int cmd_report(const Options& o, const std::vector<std::string>& argv) {
  Stopwatch sw;
  const fs::path config_path = resolve_config_path(o.config);
  const RunConfig rc = parse_config(config_path);
  const LatentVocabulary vocab = load_vocabulary(o.vocab);
  const unsigned threads = effective_threads(o.threads);
  const Corpus corpus = load_with_report(o.corpus, vocab.tokenizer_mode, o);
  const auto pairs = load_pairs(o.pairs);
  const CorpusReport rep = report(corpus, rc.miner, vocab, pairs, threads);

  const std::string text = format_report(rep);
  if (o.out.empty()) {
    std::cout << text;
  } else {
    std::ofstream out(o.out, std::ios::binary);
    if (!out) throw IoError("cannot write report: " + o.out);
    out << text;
    if (!out) throw IoError("write error on report: " + o.out);
  }
  if (!o.json_out.empty()) {
    std::ofstream out(o.json_out, std::ios::binary);
    if (!out) throw IoError("cannot write report json: " + o.json_out);
    out << report_to_json(rep) << '\n';
    if (!out) throw IoError("write error on report json: " + o.json_out);
  }

  RunManifest m;
  m.command = "report";
  m.inputs = {{"corpus", o.corpus},
              {"corpus_digest", corpus.digest},
              {"config", config_path.string()},
              {"vocabulary", o.vocab},
              {"vocabulary_fingerprint", vocab.fingerprint},
              {"pairs", o.pairs}};
  if (!o.out.empty()) m.outputs["report"] = o.out;
  if (!o.json_out.empty()) m.outputs["report_json"] = o.json_out;
  m.params = {{"config_echo", rc.miner.canonical_echo()},
              {"threads", std::to_string(threads)}};
  emit_manifest(std::move(m), sw, o, argv, "report");
  return 0;
}

int cmd_vocab(const Options& o, const std::vector<std::string>& argv, bool head) {
  Stopwatch sw;
  const LatentVocabulary vocab = load_vocabulary(o.vocab);
  const std::size_t limit = head ? std::min(o.head_k, vocab.actions.size())
                                 : vocab.actions.size();

  std::cout << "# fingerprint " << vocab.fingerprint << ", corpus " << vocab.corpus_digest
            << ", " << vocab.actions.size() << " actions\n";
  std::cout << "rank\tsymbol\tscore\tfreq\tentropy_bits\tsegment\n";
  for (std::size_t i = 0; i < limit; ++i) {
    const LatentAction& a = vocab.actions[i];
    std::cout << a.rank << '\t' << a.symbol << '\t' << detail::format_double(a.score) << '\t'
              << a.freq << '\t' << detail::format_double(a.entropy_bits) << '\t';
    for (std::size_t w = 0; w < a.words.size(); ++w) {
      if (w) std::cout << ' ';
      std::cout << a.words[w];
    }
    std::cout << '\n';
  }

  RunManifest m;
  m.command = head ? "vocab-head" : "vocab-show";
  m.inputs = {{"vocabulary", o.vocab}, {"vocabulary_fingerprint", vocab.fingerprint}};
  if (head) m.params["k"] = std::to_string(o.head_k);
  emit_manifest(std::move(m), sw, o, argv, m.command);
  return 0;
}

}  // namespace

int run(const std::vector<std::string>& argv) {
  CLI::App app{"latent action reparameterization toolkit"};
  app.require_subcommand(1);
  Options o;

  auto add_threads = [&](CLI::App* cmd) {
    cmd->add_option("--threads", o.threads, "worker threads (0 = all cores)")->capture_default_str();
  };
  auto add_policy = [&](CLI::App* cmd) {
    cmd->add_flag("--lenient", o.lenient, "skip malformed corpus records instead of failing");
    cmd->add_flag("--strict{false}", o.lenient, "fail on the first malformed record (default)");
  };
  auto add_manifest = [&](CLI::App* cmd) {
    cmd->add_option("--manifest", o.manifest, "manifest path (default: <out>.manifest.json)");
  };

  CLI::App* identify = app.add_subcommand("identify", "mine a latent action vocabulary");
  identify->add_option("--corpus", o.corpus, "trajectory corpus (JSONL)")->required();
  identify->add_option("--config", o.config, "config file or preset name")->required();
  identify->add_option("--out", o.out, "output vocabulary path")->required();
  identify->add_option("--tokenizer", o.tokenizer, "override tokenizer: words | words+html");
  add_threads(identify);
  add_policy(identify);
  add_manifest(identify);

  CLI::App* compress = app.add_subcommand("compress", "reparameterize a corpus into dual pairs");
  compress->add_option("--corpus", o.corpus, "trajectory corpus (JSONL)")->required();
  compress->add_option("--vocab", o.vocab, "vocabulary file")->required();
  compress->add_option("--out", o.out, "output pairs path")->required();
  compress->add_flag("--allow-cross-corpus", o.allow_cross_corpus,
                     "apply a vocabulary mined from a different corpus");
  add_threads(compress);
  add_policy(compress);
  add_manifest(compress);

  CLI::App* expand = app.add_subcommand("expand", "expand dual pairs back to original form");
  expand->add_option("--pairs", o.pairs, "pairs file")->required();
  expand->add_option("--vocab", o.vocab, "vocabulary file")->required();
  expand->add_flag("--verify", o.verify, "assert round-trip exactness for every pair");
  expand->add_option("--out", o.out, "write expanded trajectories as corpus JSONL");
  add_manifest(expand);

  CLI::App* rate = app.add_subcommand("rate", "report the reparameterization rate of a pair set");
  rate->add_option("--pairs", o.pairs, "pairs file")->required();
  add_manifest(rate);

  CLI::App* prep = app.add_subcommand("prep-distill", "emit distillation records with masks");
  prep->add_option("--pairs", o.pairs, "pairs file")->required();
  prep->add_option("--out", o.out, "output records path")->required();
  add_manifest(prep);

  CLI::App* sweep_cmd = app.add_subcommand("sweep", "rate curve over vocabulary prefixes");
  sweep_cmd->add_option("--corpus", o.corpus, "trajectory corpus (JSONL)")->required();
  sweep_cmd->add_option("--vocab", o.vocab, "vocabulary file")->required();
  sweep_cmd->add_option("--ks", o.ks, "comma-separated prefix sizes, ascending")->required();
  sweep_cmd->add_option("--out", o.out, "CSV path (default: stdout)");
  sweep_cmd->add_flag("--allow-cross-corpus", o.allow_cross_corpus,
                      "sweep with a vocabulary mined from a different corpus");
  add_threads(sweep_cmd);
  add_policy(sweep_cmd);
  add_manifest(sweep_cmd);

  CLI::App* report_cmd = app.add_subcommand("report", "corpus statistics and filter pipeline");
  report_cmd->add_option("--corpus", o.corpus, "trajectory corpus (JSONL)")->required();
  report_cmd->add_option("--config", o.config, "config file or preset name")->required();
  report_cmd->add_option("--vocab", o.vocab, "vocabulary file")->required();
  report_cmd->add_option("--pairs", o.pairs, "pairs file")->required();
  report_cmd->add_option("--out", o.out, "report text path (default: stdout)");
  report_cmd->add_option("--json", o.json_out, "also write a machine-readable report");
  add_threads(report_cmd);
  add_policy(report_cmd);
  add_manifest(report_cmd);

  CLI::App* vocab_cmd = app.add_subcommand("vocab", "inspect a vocabulary file");
  vocab_cmd->require_subcommand(1);
  CLI::App* vocab_show = vocab_cmd->add_subcommand("show", "print every action");
  vocab_show->add_option("--vocab", o.vocab, "vocabulary file")->required();
  vocab_show->add_option("--manifest", o.manifest, "manifest path");
  CLI::App* vocab_head = vocab_cmd->add_subcommand("head", "print the top-k actions");
  vocab_head->add_option("--vocab", o.vocab, "vocabulary file")->required();
  vocab_head->add_option("--k", o.head_k, "number of actions to print")->capture_default_str();
  vocab_head->add_option("--manifest", o.manifest, "manifest path");

  try {
    std::vector<std::string> args(argv.rbegin(), argv.rend());
    app.parse(std::move(args));

    if (identify->parsed()) return cmd_identify(o, argv);
    if (compress->parsed()) return cmd_compress(o, argv);
    if (expand->parsed()) return cmd_expand(o, argv);
    if (rate->parsed()) return cmd_rate(o, argv);
    if (prep->parsed()) return cmd_prep_distill(o, argv);
    if (sweep_cmd->parsed()) return cmd_sweep(o, argv);
    if (report_cmd->parsed()) return cmd_report(o, argv);
    if (vocab_cmd->parsed()) return cmd_vocab(o, argv, vocab_head->parsed());
    std::cerr << app.help();
    return 1;
  } catch (const CLI::CallForHelp&) {
    std::cout << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    std::cout << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << '\n';
    if (std::string(e.get_name()) == "RequiredError") std::cerr << '\n' << app.help();
    return 1;
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace lar::cli
