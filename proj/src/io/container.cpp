#include "ventcast/io/container.hpp"

#include <bit>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "ventcast/error.hpp"

namespace ventcast::io {

namespace {

template <class T>
void put_le(std::string& out, T value) {
  for (std::size_t i = 0; i < sizeof(T); ++i) out.push_back(static_cast<char>((value >> (8 * i)) & 0xff));
}

class Reader {
 public:
  explicit Reader(std::string_view bytes) : bytes_(bytes) {}

  template <class T>
  T get() {
    need(sizeof(T));
    T value = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) {
      value |= static_cast<T>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    }
    pos_ += sizeof(T);
    return value;
  }

  std::string_view take(std::size_t n) {
    need(n);
    auto s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) fail(ErrorKind::parse, "checkpoint truncated at byte " + std::to_string(pos_));
  }

  std::string_view bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

const std::string& Container::get(std::string_view key) const {
  for (const auto& [k, v] : config) {
    if (k == key) return v;
  }
  fail(ErrorKind::parse, "checkpoint config lacks key '" + std::string(key) + "'");
}

std::vector<std::string> Container::get_all(std::string_view key) const {
  std::vector<std::string> out;
  for (const auto& [k, v] : config) {
    if (k == key) out.push_back(v);
  }
  return out;
}

std::string serialize(const Container& c) {
  std::string block;
  for (const auto& [k, v] : c.config) {
    if (k.find_first_of("=\n") != std::string::npos || v.find('\n') != std::string::npos) {
      fail(ErrorKind::validation, "config entry '" + k + "' cannot be encoded as a key=value line");
    }
    block += k + "=" + v + "\n";
  }
  std::string out = c.magic;
  put_le<std::uint64_t>(out, block.size());
  out += block;
  put_le<std::uint64_t>(out, c.records.size());
  for (const auto& r : c.records) {
    if (num::shape_size(r.shape) != r.values.size()) {
      fail(ErrorKind::dimension, "record '" + r.name + "' shape does not match its values");
    }
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(r.name.size()));
    out += r.name;
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(r.shape.size()));
    for (auto e : r.shape) put_le<std::uint64_t>(out, e);
    for (double v : r.values) put_le<std::uint64_t>(out, std::bit_cast<std::uint64_t>(v));
  }
  return out;
}

Container deserialize(std::string_view bytes, std::string_view expected_magic) {
  Reader in(bytes);
  Container c;
  c.magic = std::string(in.take(expected_magic.size()));
  if (c.magic != expected_magic) {
    fail(ErrorKind::parse, "bad checkpoint magic: expected " + std::string(expected_magic));
  }
  const auto block_len = in.get<std::uint64_t>();
  std::istringstream block{std::string(in.take(block_len))};
  for (std::string line; std::getline(block, line);) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) fail(ErrorKind::parse, "config line without '=': " + line);
    c.config.emplace_back(line.substr(0, eq), line.substr(eq + 1));
  }
  const auto count = in.get<std::uint64_t>();
  for (std::uint64_t i = 0; i < count; ++i) {
    NamedTensor r;
    r.name = std::string(in.take(in.get<std::uint32_t>()));
    const auto rank = in.get<std::uint32_t>();
    for (std::uint32_t d = 0; d < rank; ++d) r.shape.push_back(in.get<std::uint64_t>());
    r.values.resize(num::shape_size(r.shape));
    for (auto& v : r.values) v = std::bit_cast<double>(in.get<std::uint64_t>());
    c.records.push_back(std::move(r));
  }
  if (!in.done()) fail(ErrorKind::parse, "trailing bytes after checkpoint records");
  return c;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::io, "cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, std::string_view bytes) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorKind::io, "cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) fail(ErrorKind::io, "failed writing " + path.string());
}

void write_container(const std::filesystem::path& path, const Container& container) {
  write_file(path, serialize(container));
}

Container read_container(const std::filesystem::path& path, std::string_view expected_magic) {
  return deserialize(read_file(path), expected_magic);
}

std::uint64_t fnv1a(std::string_view bytes) {
  std::uint64_t h = 1469598103934665603ull;
  for (char c : bytes) {
    h ^= static_cast<unsigned char>(c);
    h *= 1099511628211ull;
  }
  return h;
}

std::string hex64(std::uint64_t value) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(value));
  return buf;
}

}  // namespace ventcast::io
