#include "lar/distill.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <numbers>

#include <json.hpp>

#include "lar/vocab.hpp"
#include "lar/version.hpp"

namespace lar {

AlignmentMask build_mask(const DualPair& pair) {
  const auto& orig = pair.original.steps;
  const auto& rep = pair.reparameterized.steps;
  if (orig.size() != rep.size())
    throw ValidationError("pair '" + pair.original.id + "': step count mismatch");

  AlignmentMask mask;
  std::uint64_t tp = 0, sp = 0;
  std::size_t ri = 0;
  for (std::size_t si = 0; si < orig.size(); ++si) {
    const auto& teacher = orig[si].action_tokens;
    const auto& student = rep[si].action_tokens;
    std::size_t i = 0, j = 0;
    while (i < teacher.size()) {
      if (ri < pair.replacements.size() && pair.replacements[ri].step == si &&
          pair.replacements[ri].token_start == i) {
        const SpanReplacement& r = pair.replacements[ri];
        if (r.token_len == 0 || i + r.token_len > teacher.size())
          throw ValidationError("pair '" + pair.original.id + "': replacement span out of bounds");
        if (j >= student.size() || !is_latent_symbol(student[j].text))
          throw ValidationError("pair '" + pair.original.id +
                                "': replaced span not answered by a latent symbol");
        i += r.token_len;
        tp += r.token_len;
        ++j;
        ++sp;
        ++ri;
        continue;
      }
      if (j >= student.size() || student[j].text != teacher[i].text)
        throw ValidationError("pair '" + pair.original.id + "': token streams disagree at step " +
                              std::to_string(si) + " outside replaced spans");
      mask.pairs.emplace_back(tp, sp);
      ++i;
      ++j;
      ++tp;
      ++sp;
    }
    if (j != student.size())
      throw ValidationError("pair '" + pair.original.id + "': student step " +
                            std::to_string(si) + " has extra tokens");
  }
  if (ri != pair.replacements.size())
    throw ValidationError("pair '" + pair.original.id +
                          "': replacement list inconsistent with token streams");
  return mask;
}

namespace {

void log_softmax_row(const double* z, std::uint64_t cols, double temperature,
                     std::vector<double>& out) {
  double max = -std::numeric_limits<double>::infinity();
  for (std::uint64_t c = 0; c < cols; ++c) {
    if (!std::isfinite(z[c])) throw ValidationError("non-finite logit");
    const double v = z[c] / temperature;
    if (v > max) max = v;
  }
  double lse = 0.0;
  for (std::uint64_t c = 0; c < cols; ++c) {
    out[c] = z[c] / temperature - max;
    lse += std::exp(out[c]);
  }
  lse = std::log(lse);
  for (std::uint64_t c = 0; c < cols; ++c) out[c] -= lse;
}

}  // namespace

double kl_distill_loss(const LogitMatrix& teacher, const LogitMatrix& student, double temperature,
                       bool scale_by_temp_sq, KlUnits units) {
  if (!(temperature > 0.0)) throw ValidationError("temperature must be > 0");
  if (teacher.rows != student.rows || teacher.cols != student.cols)
    throw ValidationError("logit shape mismatch: teacher " + std::to_string(teacher.rows) + "x" +
                          std::to_string(teacher.cols) + " vs student " +
                          std::to_string(student.rows) + "x" + std::to_string(student.cols));
  if (teacher.data.size() != teacher.rows * teacher.cols ||
      student.data.size() != student.rows * student.cols)
    throw ValidationError("logit matrix data does not match its declared shape");
  if (teacher.rows == 0) return 0.0;  // empty mask: nothing to average
  if (teacher.cols == 0) throw ValidationError("logit matrix with zero columns");

  std::vector<double> lt(teacher.cols), ls(teacher.cols);
  double sum = 0.0;
  for (std::uint64_t r = 0; r < teacher.rows; ++r) {
    log_softmax_row(teacher.row(r), teacher.cols, temperature, lt);
    log_softmax_row(student.row(r), student.cols, temperature, ls);
    double kl = 0.0;
    for (std::uint64_t c = 0; c < teacher.cols; ++c) kl += std::exp(lt[c]) * (lt[c] - ls[c]);
    if (kl > 0.0) sum += kl;  // guard the tiny negative wobble of identical rows
  }
  double mean = sum / static_cast<double>(teacher.rows);
  if (scale_by_temp_sq) mean *= temperature * temperature;
  if (units == KlUnits::bits) mean /= std::numbers::ln2;
  return mean;
}

namespace {
constexpr char kLogitMagic[8] = {'L', 'A', 'R', 'L', 'O', 'G', 'I', 'T'};

template <typename T>
void put(std::ofstream& out, T v) {
  // Little-endian fields; asserted at build time for the host.
  static_assert(std::endian::native == std::endian::little);
  out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}
template <typename T>
T get(std::ifstream& in) {
  static_assert(std::endian::native == std::endian::little);
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(v));
  return v;
}
}  // namespace

void write_logits(const LogitMatrix& matrix, const std::filesystem::path& path) {
  if (matrix.data.size() != matrix.rows * matrix.cols)
    throw ValidationError("logit matrix data does not match its declared shape");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write logit file: " + path.string());
  out.write(kLogitMagic, sizeof(kLogitMagic));
  put<std::uint32_t>(out, kLogitFileVersion);
  put<std::uint32_t>(out, 0);
  put<std::uint64_t>(out, matrix.rows);
  put<std::uint64_t>(out, matrix.cols);
  out.write(reinterpret_cast<const char*>(matrix.data.data()),
            static_cast<std::streamsize>(matrix.data.size() * sizeof(double)));
  if (!out) throw IoError("write error on logit file: " + path.string());
}

LogitMatrix read_logits(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open logit file: " + path.string());
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kLogitMagic, sizeof(magic)) != 0)
    throw ValidationError("not a logit container: " + path.string());
  const auto version = get<std::uint32_t>(in);
  get<std::uint32_t>(in);  // reserved
  if (version != static_cast<std::uint32_t>(kLogitFileVersion))
    throw ValidationError("unsupported logit container version in " + path.string());
  LogitMatrix m;
  m.rows = get<std::uint64_t>(in);
  m.cols = get<std::uint64_t>(in);
  if (!in) throw ValidationError("truncated logit container: " + path.string());
  if (m.cols != 0 && m.rows > std::numeric_limits<std::uint64_t>::max() / m.cols / sizeof(double))
    throw ValidationError("logit container shape overflows: " + path.string());
  m.data.resize(m.rows * m.cols);
  in.read(reinterpret_cast<char*>(m.data.data()),
          static_cast<std::streamsize>(m.data.size() * sizeof(double)));
  if (!in || static_cast<std::size_t>(in.gcount()) != m.data.size() * sizeof(double))
    throw ValidationError("truncated logit container: " + path.string());
  in.peek();
  if (!in.eof()) throw ValidationError("trailing bytes in logit container: " + path.string());
  return m;
}

void write_distill_records(const std::vector<DualPair>& pairs,
                           const std::filesystem::path& path) {
  using nlohmann::json;
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write distill records: " + path.string());
  for (const auto& pair : pairs) {
    const AlignmentMask mask = build_mask(pair);
    json teacher = json::array(), student = json::array(), mask_pairs = json::array();
    for (const auto& step : pair.original.steps)
      for (const auto& t : step.action_tokens) teacher.push_back(t.text);
    for (const auto& step : pair.reparameterized.steps)
      for (const auto& t : step.action_tokens) student.push_back(t.text);
    for (const auto& [tp, sp] : mask.pairs) mask_pairs.push_back({tp, sp});
    json rec = {{"id", pair.original.id},
                {"teacher_tokens", std::move(teacher)},
                {"student_tokens", std::move(student)},
                {"mask_pairs", std::move(mask_pairs)}};
    out << rec.dump() << '\n';
  }
  if (!out) throw IoError("write error on distill records: " + path.string());
}

}  // namespace lar
