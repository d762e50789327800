#pragma once

namespace lar {

inline constexpr const char* kVersion = "0.1.0";

// Schema versions for on-disk artifacts.
inline constexpr int kVocabFileVersion = 1;
inline constexpr int kPairsFileVersion = 1;
inline constexpr int kLogitFileVersion = 1;

}  // namespace lar
