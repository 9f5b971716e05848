#pragma once

#include <chrono>
#include <string>
#include <string_view>

namespace ventcast::io {

using Timestamp = std::chrono::sys_seconds;

// Accepts `YYYY-MM-DDTHH:MM:SS` with an optional trailing `Z`; a single space
// may replace the `T`. All values are UTC.
Timestamp parse_timestamp(std::string_view text);
bool try_parse_timestamp(std::string_view text, Timestamp& out);
// `YYYY-MM-DDTHH:MM:SSZ`
std::string format_timestamp(Timestamp t);

inline constexpr std::chrono::seconds hours(std::int64_t h) { return std::chrono::seconds(h * 3600); }
inline constexpr std::chrono::seconds days(std::int64_t d) { return std::chrono::seconds(d * 86400); }

}  // namespace ventcast::io
