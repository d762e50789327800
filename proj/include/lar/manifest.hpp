#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace lar {

// Reproducibility sidecar written by every CLI command. Everything except
// timestamp/wall_time is deterministic for a given invocation.
struct RunManifest {
  std::string command;                         // subcommand name
  std::vector<std::string> argv;               // full command line
  std::string tool_version;
  std::map<std::string, std::string> inputs;   // label -> digest/fingerprint/path
  std::map<std::string, std::string> outputs;  // label -> path
  std::map<std::string, std::string> params;   // resolved parameters
  double wall_time_seconds = 0.0;
  std::string timestamp_utc;
};

std::string manifest_to_json(const RunManifest& manifest);
void write_manifest(const RunManifest& manifest, const std::filesystem::path& path);
std::string utc_timestamp_now();

}  // namespace lar
