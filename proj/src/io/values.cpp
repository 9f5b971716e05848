#include "ventcast/io/values.hpp"

#include <charconv>
#include <cstdio>
#include <cstdlib>

#include "ventcast/error.hpp"

namespace ventcast::io {

std::uint64_t parse_u64(std::string_view key, std::string_view value) {
  std::uint64_t out = 0;
  auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
  if (value.empty() || ec != std::errc{} || ptr != value.data() + value.size()) {
    fail(ErrorKind::parse, "'" + std::string(key) + "' is not a non-negative integer: " + std::string(value));
  }
  return out;
}

std::size_t parse_count(std::string_view key, std::string_view value) { return static_cast<std::size_t>(parse_u64(key, value)); }

double parse_real(std::string_view key, std::string_view value) {
  const std::string s(value);
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size()) fail(ErrorKind::parse, "'" + std::string(key) + "' is not a number: " + s);
  return v;
}

bool parse_bool(std::string_view key, std::string_view value) {
  if (value == "1" || value == "true") return true;
  if (value == "0" || value == "false") return false;
  fail(ErrorKind::parse, "'" + std::string(key) + "' is not a boolean: " + std::string(value));
}

std::string format_real(double value) {
  char buf[40];
  for (int precision = 1; precision <= 17; ++precision) {
    std::snprintf(buf, sizeof(buf), "%.*g", precision, value);
    if (std::strtod(buf, nullptr) == value) break;
  }
  return buf;
}

}  // namespace ventcast::io
