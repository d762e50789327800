#pragma once

#include <filesystem>
#include <string>

#include "lar/corpus.hpp"
#include "lar/miner.hpp"

namespace lar {

// Everything a mining run needs from a config file.
struct RunConfig {
  MinerConfig miner;
  TokenizerMode tokenizer = TokenizerMode::words;
};

// Minimal TOML subset: `key = value` lines, # comments, integers, floats,
// booleans, quoted strings, flat [n_lo, n_hi] arrays. Known keys: n (2-array)
// or n_lo/n_hi, f_min, H_max, K, rho, tokenizer ("words" | "words+html").
// Unknown keys are errors, as are out-of-range values.
RunConfig parse_config(const std::filesystem::path& path);
RunConfig parse_config_text(std::string_view text, std::string_view origin = "<config>");

// Resolves a --config argument: an existing path is used as-is; otherwise the
// name is looked up as <name>[.toml] under $LAR_PRESET_DIR, then under
// ./presets. Throws IoError if nothing matches.
std::filesystem::path resolve_config_path(const std::string& name_or_path);

std::string to_toml(const RunConfig& config);

}  // namespace lar
