#include "lar/manifest.hpp"

#include <ctime>
#include <fstream>

#include <json.hpp>

#include "lar/errors.hpp"

namespace lar {

std::string utc_timestamp_now() {
  std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string manifest_to_json(const RunManifest& manifest) {
  nlohmann::json j = {
      {"command", manifest.command},
      {"argv", manifest.argv},
      {"tool_version", manifest.tool_version},
      {"inputs", manifest.inputs},
      {"outputs", manifest.outputs},
      {"params", manifest.params},
      {"wall_time_seconds", manifest.wall_time_seconds},
      {"timestamp_utc", manifest.timestamp_utc},
  };
  return j.dump(2);
}

void write_manifest(const RunManifest& manifest, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write manifest: " + path.string());
  out << manifest_to_json(manifest) << '\n';
  if (!out) throw IoError("write error on manifest: " + path.string());
}

}  // namespace lar
