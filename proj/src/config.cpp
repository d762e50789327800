#include "lar/config.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <unordered_set>

#include "text_util.hpp"

namespace lar {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
    s.remove_suffix(1);
  return s;
}

// Strips a # comment that is not inside a quoted string.
std::string_view strip_comment(std::string_view s) {
  bool quoted = false;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '"') quoted = !quoted;
    if (s[i] == '#' && !quoted) return s.substr(0, i);
  }
  return s;
}

std::string unquote(std::string_view v, std::size_t line_no) {
  if (v.size() < 2 || v.front() != '"' || v.back() != '"')
    throw ParseError("expected a quoted string, got '" + std::string(v) + "'", line_no);
  return std::string(v.substr(1, v.size() - 2));
}

std::vector<std::string_view> split_array(std::string_view v, std::size_t line_no) {
  if (v.size() < 2 || v.front() != '[' || v.back() != ']')
    throw ParseError("expected an array, got '" + std::string(v) + "'", line_no);
  v = v.substr(1, v.size() - 2);
  std::vector<std::string_view> items;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= v.size(); ++i) {
    if (i == v.size() || v[i] == ',') {
      const auto item = trim(v.substr(start, i - start));
      if (!item.empty()) items.push_back(item);
      start = i + 1;
    }
  }
  return items;
}

}  // namespace

RunConfig parse_config_text(std::string_view text, std::string_view origin) {
  RunConfig config;
  std::unordered_set<std::string> seen;
  bool have_n_array = false, have_n_parts = false;

  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t eol = std::min(text.find('\n', pos), text.size());
    std::string_view line = trim(strip_comment(text.substr(pos, eol - pos)));
    pos = eol + 1;
    ++line_no;
    if (line.empty()) continue;
    if (line.front() == '[' && line.back() == ']')
      throw ParseError("config sections are not supported (flat key = value only)", line_no);
    const std::size_t eq = line.find('=');
    if (eq == std::string_view::npos)
      throw ParseError("expected 'key = value', got '" + std::string(line) + "'", line_no);
    const std::string key{trim(line.substr(0, eq))};
    const std::string_view value = trim(line.substr(eq + 1));
    if (key.empty() || value.empty())
      throw ParseError("expected 'key = value', got '" + std::string(line) + "'", line_no);
    if (!seen.insert(key).second) throw ParseError("duplicate key '" + key + "'", line_no);

    if (key == "n") {
      const auto items = split_array(value, line_no);
      if (items.size() != 2) throw ParseError("'n' must be a two-element array", line_no);
      config.miner.n_lo = static_cast<std::uint32_t>(detail::parse_u64(items[0], "n[0]"));
      config.miner.n_hi = static_cast<std::uint32_t>(detail::parse_u64(items[1], "n[1]"));
      have_n_array = true;
    } else if (key == "n_lo") {
      config.miner.n_lo = static_cast<std::uint32_t>(detail::parse_u64(value, key));
      have_n_parts = true;
    } else if (key == "n_hi") {
      config.miner.n_hi = static_cast<std::uint32_t>(detail::parse_u64(value, key));
      have_n_parts = true;
    } else if (key == "f_min") {
      config.miner.f_min = detail::parse_u64(value, key);
    } else if (key == "H_max") {
      config.miner.h_max = detail::parse_double(value, key);
    } else if (key == "K") {
      config.miner.k = static_cast<std::uint32_t>(detail::parse_u64(value, key));
    } else if (key == "rho") {
      config.miner.rho = detail::parse_double(value, key);
    } else if (key == "tokenizer") {
      config.tokenizer = tokenizer_mode_from_string(unquote(value, line_no));
    } else {
      throw ParseError("unknown config key '" + key + "' in " + std::string(origin), line_no);
    }
  }
  if (have_n_array && have_n_parts)
    throw ValidationError("config mixes 'n = [lo, hi]' with n_lo/n_hi in " + std::string(origin));
  config.miner.validate();
  return config;
}

RunConfig parse_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open config file: " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  if (in.bad()) throw IoError("read error on config file: " + path.string());
  return parse_config_text(buf.str(), path.string());
}

std::filesystem::path resolve_config_path(const std::string& name_or_path) {
  namespace fs = std::filesystem;
  std::error_code ec;
  if (fs::exists(name_or_path, ec)) return name_or_path;

  std::vector<fs::path> tried{name_or_path};
  const char* env = std::getenv("LAR_PRESET_DIR");
  const fs::path base = env ? fs::path(env) : fs::path("presets");
  for (const auto& candidate : {base / name_or_path, base / (name_or_path + ".toml")}) {
    if (fs::exists(candidate, ec)) return candidate;
    tried.push_back(candidate);
  }
  std::string msg = "config not found; tried:";
  for (const auto& p : tried) msg += " " + p.string();
  throw IoError(msg);
}

std::string to_toml(const RunConfig& config) {
  std::string s;
  s += "n = [" + std::to_string(config.miner.n_lo) + ", " + std::to_string(config.miner.n_hi) +
       "]\n";
  s += "f_min = " + std::to_string(config.miner.f_min) + "\n";
  s += "H_max = " + detail::format_double(config.miner.h_max) + "\n";
  s += "K = " + std::to_string(config.miner.k) + "\n";
  s += "rho = " + detail::format_double(config.miner.rho) + "\n";
  s += "tokenizer = \"" + std::string(to_string(config.tokenizer)) + "\"\n";
  return s;
}

}  // namespace lar
