#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <cstring>

#include "lar/config.hpp"
#include "lar/corpus.hpp"
#include "lar/distill.hpp"
#include "lar/metrics.hpp"
#include "lar/miner.hpp"
#include "lar/reparam.hpp"
#include "lar/version.hpp"
#include "lar/vocab.hpp"

namespace py = pybind11;
using namespace lar;

namespace {

MinerConfig config_from_kwargs(std::size_t n_lo, std::size_t n_hi, std::uint64_t f_min,
                               double h_max, std::size_t k, double rho) {
  MinerConfig cfg;
  cfg.n_lo = n_lo;
  cfg.n_hi = n_hi;
  cfg.f_min = f_min;
  cfg.h_max = h_max;
  cfg.k = k;
  cfg.rho = rho;
  cfg.validate();
  return cfg;
}

LogitMatrix matrix_from_array(const py::array_t<double, py::array::c_style | py::array::forcecast>& a,
                              const char* name) {
  if (a.ndim() != 2) throw ValidationError(std::string(name) + " must be a 2d array");
  LogitMatrix m;
  m.rows = static_cast<std::uint64_t>(a.shape(0));
  m.cols = static_cast<std::uint64_t>(a.shape(1));
  m.data.resize(static_cast<std::size_t>(m.rows * m.cols));
  if (!m.data.empty()) std::memcpy(m.data.data(), a.data(), m.data.size() * sizeof(double));
  return m;
}

}  // namespace

PYBIND11_MODULE(_core, mod) {
  mod.doc() = "latent action reparameterization core";
  mod.attr("__version__") = kVersion;

  // translators run newest-first, so bases go first and the most derived last
  py::register_exception<Error>(mod, "Error", PyExc_RuntimeError);
  py::register_exception<IoError>(mod, "IoError", PyExc_OSError);
  py::register_exception<ValidationError>(mod, "ValidationError", PyExc_ValueError);
  py::register_exception<ParseError>(mod, "ParseError", PyExc_ValueError);

  py::class_<Token>(mod, "Token")
      .def_readonly("text", &Token::text)
      .def_readonly("sentence_index", &Token::sentence_index)
      .def("__repr__", [](const Token& t) {
        return "Token(" + t.text + ", s" + std::to_string(t.sentence_index) + ")";
      });

  py::class_<Corpus>(mod, "Corpus")
      .def_property_readonly("digest", [](const Corpus& c) { return c.digest; })
      .def_property_readonly("tokenizer",
                             [](const Corpus& c) { return std::string(to_string(c.tokenizer_mode)); })
      .def_property_readonly("total_tokens",
                             [](const Corpus& c) { return total_effective_horizon(c); })
      .def("__len__", [](const Corpus& c) { return c.trajectories.size(); })
      .def("trajectory_ids", [](const Corpus& c) {
        std::vector<std::string> ids;
        ids.reserve(c.trajectories.size());
        for (const auto& t : c.trajectories) ids.push_back(t.id);
        return ids;
      });

  py::class_<LatentAction>(mod, "LatentAction")
      .def_readonly("symbol", &LatentAction::symbol)
      .def_readonly("words", &LatentAction::words)
      .def_readonly("rank", &LatentAction::rank)
      .def_readonly("score", &LatentAction::score)
      .def_readonly("freq", &LatentAction::freq)
      .def_readonly("entropy_bits", &LatentAction::entropy_bits);

  py::class_<LatentVocabulary>(mod, "Vocabulary")
      .def_property_readonly("fingerprint",
                             [](const LatentVocabulary& v) { return v.fingerprint; })
      .def_property_readonly("corpus_digest",
                             [](const LatentVocabulary& v) { return v.corpus_digest; })
      .def_property_readonly("actions",
                             [](const LatentVocabulary& v) { return v.actions; })
      .def("__len__", [](const LatentVocabulary& v) { return v.actions.size(); });

  py::class_<SpanReplacement>(mod, "SpanReplacement")
      .def_readonly("step", &SpanReplacement::step)
      .def_readonly("token_start", &SpanReplacement::token_start)
      .def_readonly("token_len", &SpanReplacement::token_len)
      .def_readonly("action_rank", &SpanReplacement::action_rank);

  py::class_<DualPair>(mod, "DualPair")
      .def_property_readonly("id", [](const DualPair& p) { return p.original.id; })
      .def_property_readonly("replacements", [](const DualPair& p) { return p.replacements; })
      .def_property_readonly("original_tokens",
                             [](const DualPair& p) { return effective_horizon(p.original); })
      .def_property_readonly("latent_tokens",
                             [](const DualPair& p) { return latent_horizon(p); });

  mod.def(
      "tokenize",
      [](const std::string& text, const std::string& mode) {
        return tokenize_action(text, tokenizer_mode_from_string(mode));
      },
      py::arg("text"), py::arg("mode") = "words");

  mod.def(
      "load_corpus",
      [](const std::filesystem::path& path, const std::string& mode, bool strict) {
        return load_corpus(path, tokenizer_mode_from_string(mode),
                           strict ? ParsePolicy::strict : ParsePolicy::lenient);
      },
      py::arg("path"), py::arg("mode") = "words", py::arg("strict") = true);

  mod.def(
      "identify",
      [](const Corpus& corpus, std::size_t n_lo, std::size_t n_hi, std::uint64_t f_min,
         double h_max, std::size_t k, double rho, unsigned threads) {
        const MinerConfig cfg = config_from_kwargs(n_lo, n_hi, f_min, h_max, k, rho);
        const auto segments = identify(corpus, cfg, nullptr, threads);
        return build_vocabulary(segments, cfg, corpus.tokenizer_mode, corpus.digest);
      },
      py::arg("corpus"), py::arg("n_lo") = 2, py::arg("n_hi") = 4, py::arg("f_min") = 2,
      py::arg("h_max") = 10.0, py::arg("k") = 100, py::arg("rho") = 0.7,
      py::arg("threads") = 1);

  mod.def("save_vocabulary", &save_vocabulary, py::arg("vocab"), py::arg("path"));
  mod.def("load_vocabulary", &load_vocabulary, py::arg("path"));

  mod.def(
      "compress",
      [](const Corpus& corpus, const LatentVocabulary& vocab, bool allow_cross_corpus,
         unsigned threads) { return compress_corpus(corpus, vocab, allow_cross_corpus, threads); },
      py::arg("corpus"), py::arg("vocab"), py::arg("allow_cross_corpus") = false,
      py::arg("threads") = 1);

  mod.def("save_pairs", &save_pairs, py::arg("pairs"), py::arg("path"));
  mod.def("load_pairs", &load_pairs, py::arg("path"));

  mod.def(
      "verify_pairs",
      [](const std::vector<DualPair>& pairs, const LatentVocabulary& vocab) {
        for (const auto& p : pairs)
          if (!verify_pair(p, vocab)) return false;
        return true;
      },
      py::arg("pairs"), py::arg("vocab"));

  mod.def("rate", &reparameterization_rate, py::arg("pairs"));

  mod.def(
      "alignment_mask",
      [](const DualPair& pair) { return build_mask(pair).pairs; },
      py::arg("pair"));

  mod.def(
      "kl_distill_loss",
      [](const py::array_t<double, py::array::c_style | py::array::forcecast>& teacher,
         const py::array_t<double, py::array::c_style | py::array::forcecast>& student,
         double temperature, bool scale_by_temp_sq, const std::string& units) {
        KlUnits u;
        if (units == "nats")
          u = KlUnits::nats;
        else if (units == "bits")
          u = KlUnits::bits;
        else
          throw ValidationError("units must be 'nats' or 'bits'");
        return kl_distill_loss(matrix_from_array(teacher, "teacher"),
                               matrix_from_array(student, "student"), temperature,
                               scale_by_temp_sq, u);
      },
      py::arg("teacher"), py::arg("student"), py::arg("temperature") = 2.0,
      py::arg("scale_by_temp_sq") = false, py::arg("units") = "nats");

  mod.def(
      "sweep",
      [](const Corpus& corpus, const LatentVocabulary& vocab, const std::vector<std::size_t>& ks,
         unsigned threads) {
        py::list out;
        for (const SweepPoint& p : sweep(corpus, vocab, ks, threads)) {
          py::dict d;
          d["k"] = p.k;
          d["rate"] = p.rate;
          d["mean_H_lat"] = p.mean_h_lat;
          d["replaced_fraction"] = p.replaced_fraction;
          out.append(std::move(d));
        }
        return out;
      },
      py::arg("corpus"), py::arg("vocab"), py::arg("ks"), py::arg("threads") = 1);
}
