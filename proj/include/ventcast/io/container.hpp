#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "ventcast/numerics/tensor.hpp"

namespace ventcast::io {

// Binary checkpoint container:
//   magic (5 ASCII bytes)
//   u64 length + UTF-8 config block of `key=value\n` lines (keys may repeat)
//   u64 record count, then per record:
//     u32 name length, name bytes, u32 rank, rank x u64 extents,
//     extents-product x IEEE-754 binary64, all little-endian.
struct NamedTensor {
  std::string name;
  num::Shape shape;
  std::vector<double> values;
};

struct Container {
  std::string magic;
  std::vector<std::pair<std::string, std::string>> config;
  std::vector<NamedTensor> records;

  // First value stored under key; throws when absent.
  const std::string& get(std::string_view key) const;
  std::vector<std::string> get_all(std::string_view key) const;
};

std::string serialize(const Container& container);
Container deserialize(std::string_view bytes, std::string_view expected_magic);

void write_container(const std::filesystem::path& path, const Container& container);
Container read_container(const std::filesystem::path& path, std::string_view expected_magic);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view bytes);

// 64-bit FNV-1a, used for freeze checks and config hashes.
std::uint64_t fnv1a(std::string_view bytes);
std::string hex64(std::uint64_t value);

}  // namespace ventcast::io
