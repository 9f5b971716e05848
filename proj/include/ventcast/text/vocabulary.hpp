#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace ventcast::text {

using TokenId = std::int64_t;

// Lowercased word/punctuation pieces: runs of letters, digits and non-ASCII
// bytes form one word, every ASCII punctuation character is its own piece.
std::vector<std::string> split_words(std::string_view text);

class Vocabulary {
 public:
  static constexpr std::string_view kCls = "[CLS]";
  static constexpr std::string_view kUnk = "[UNK]";
  static constexpr std::string_view kPad = "[PAD]";
  static constexpr std::size_t kSpecialCount = 3;

  // Specials only.
  Vocabulary();

  // Frequency-ranked build; ties broken lexicographically. max_size caps the
  // number of non-special tokens (0 = unlimited).
  static Vocabulary build(std::span<const std::string> corpus, std::size_t min_frequency, std::size_t max_size);
  static Vocabulary from_tokens(std::vector<std::string> tokens);
  static Vocabulary load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;

  TokenId cls() const { return 0; }
  TokenId unk() const { return 1; }
  TokenId pad() const { return 2; }
  bool is_special(TokenId id) const { return id >= 0 && id < static_cast<TokenId>(kSpecialCount); }

  std::size_t size() const { return tokens_.size(); }
  std::size_t min_frequency() const { return min_frequency_; }
  // Unknown tokens map to unk().
  TokenId id(std::string_view token) const;
  bool contains(std::string_view token) const;
  const std::string& token(TokenId id) const;
  const std::vector<std::string>& tokens() const { return tokens_; }

  bool operator==(const Vocabulary& other) const { return tokens_ == other.tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, TokenId> index_;
  std::size_t min_frequency_ = 1;
};

}  // namespace ventcast::text
