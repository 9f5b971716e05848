#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace ventcast::io {

// RFC 4180 style: comma separated, double-quoted fields may contain commas,
// doubled quotes and newlines.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<std::size_t> line_numbers;  // 1-based line where each row starts
};

CsvTable parse_csv(std::string_view content, const std::string& source);
CsvTable read_csv(const std::filesystem::path& path);

std::string csv_field(std::string_view value, bool force_quotes = false);
std::string csv_line(std::span<const std::string> fields);

}  // namespace ventcast::io
