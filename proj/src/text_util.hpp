#pragma once

// Private helpers shared across the library sources.

#include <charconv>
#include <cstdint>
#include <string>
#include <string_view>
#include <system_error>

#include "lar/errors.hpp"

namespace lar::detail {

// Shortest representation that round-trips; integral doubles get a trailing
// ".0" so the value stays a float when re-parsed as JSON/TOML.
inline std::string format_double(double v) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  std::string s(buf, res.ptr);
  if (s.find_first_of(".eEnN") == std::string::npos) s += ".0";  // n: inf/nan never expected
  return s;
}

inline double parse_double(std::string_view s, std::string_view what) {
  double v = 0.0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size())
    throw ValidationError("bad number for " + std::string(what) + ": '" + std::string(s) + "'");
  return v;
}

inline std::uint64_t parse_u64(std::string_view s, std::string_view what) {
  std::uint64_t v = 0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size())
    throw ValidationError("bad integer for " + std::string(what) + ": '" + std::string(s) + "'");
  return v;
}

}  // namespace lar::detail
