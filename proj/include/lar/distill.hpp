#pragma once

#include <cstdint>
#include <filesystem>
#include <utility>
#include <vector>

#include "lar/reparam.hpp"

namespace lar {

// Aligned (teacher_position, student_position) index pairs into the flattened
// action token streams of a dual pair. Positions inside replaced spans (and
// the symbols standing in for them) are unaligned by construction.
struct AlignmentMask {
  std::vector<std::pair<std::uint64_t, std::uint64_t>> pairs;

  std::size_t size() const { return pairs.size(); }
};

// Derives the mask structurally from the replacement spans and validates the
// pair along the way: spans in bounds, ordered, non-overlapping; every
// replaced span answered by one latent symbol; token text equal at every
// aligned position. Throws ValidationError on any inconsistency.
//
// |mask| == H_eff - sum(span lengths) == H_lat - |replacements|.
AlignmentMask build_mask(const DualPair& pair);

// Row-major logit matrix; row r scores the token at stream position r.
struct LogitMatrix {
  std::uint64_t rows = 0;
  std::uint64_t cols = 0;
  std::vector<double> data;  // rows * cols

  double* row(std::uint64_t r) { return data.data() + r * cols; }
  const double* row(std::uint64_t r) const { return data.data() + r * cols; }
};

enum class KlUnits { nats, bits };

// Reference distillation objective: mean over rows of
//   KL( softmax(teacher_row / temperature) || softmax(student_row / temperature) )
// computed via log-softmax for stability. Rows of the two matrices correspond
// to the aligned positions of one mask, in mask order. Zero rows yield 0.0
// (a fully replaced pair has an empty mask). scale_by_temp_sq multiplies by
// temperature^2, the usual gradient-preserving convention. Throws
// ValidationError on shape mismatch, non-finite input, or temperature <= 0.
double kl_distill_loss(const LogitMatrix& teacher, const LogitMatrix& student,
                       double temperature = 2.0, bool scale_by_temp_sq = false,
                       KlUnits units = KlUnits::nats);

// Binary container: magic "LARLOGIT", u32 version, u32 reserved, u64 rows,
// u64 cols, then rows*cols little-endian f64. For handing logits between
// tools and tests.
void write_logits(const LogitMatrix& matrix, const std::filesystem::path& path);
LogitMatrix read_logits(const std::filesystem::path& path);

// JSONL distillation prep: per pair {"id", "teacher_tokens", "student_tokens",
// "mask_pairs": [[t, s], ...]} with token streams flattened across steps.
void write_distill_records(const std::vector<DualPair>& pairs, const std::filesystem::path& path);

}  // namespace lar
