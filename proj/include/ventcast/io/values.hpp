#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace ventcast::io {

// Strict scalar parsing for config entries; `key` names the entry in errors.
std::size_t parse_count(std::string_view key, std::string_view value);
std::uint64_t parse_u64(std::string_view key, std::string_view value);
double parse_real(std::string_view key, std::string_view value);
bool parse_bool(std::string_view key, std::string_view value);

// Shortest decimal form that round-trips a double.
std::string format_real(double value);

}  // namespace ventcast::io
