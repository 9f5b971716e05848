#include "ventcast/text/vocabulary.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>

#include "ventcast/error.hpp"

namespace ventcast::text {

std::vector<std::string> split_words(std::string_view text) {
  std::vector<std::string> words;
  std::string current;
  auto flush = [&] {
    if (!current.empty()) words.push_back(std::move(current));
    current.clear();
  };
  for (char raw : text) {
    const auto c = static_cast<unsigned char>(raw);
    if (c >= 0x80 || std::isalnum(c)) {
      current.push_back(static_cast<char>(std::tolower(c)));
    } else if (std::isspace(c) || std::iscntrl(c)) {
      flush();
    } else {
      flush();
      words.emplace_back(1, raw);
    }
  }
  flush();
  return words;
}

Vocabulary::Vocabulary() : tokens_{std::string(kCls), std::string(kUnk), std::string(kPad)} {
  for (std::size_t i = 0; i < tokens_.size(); ++i) index_[tokens_[i]] = static_cast<TokenId>(i);
}

Vocabulary Vocabulary::from_tokens(std::vector<std::string> tokens) {
  Vocabulary v;
  for (auto& t : tokens) {
    if (t.empty()) fail(ErrorKind::validation, "vocabulary: empty token");
    if (!v.index_.emplace(t, static_cast<TokenId>(v.tokens_.size())).second) {
      fail(ErrorKind::validation, "vocabulary: duplicate token '" + t + "'");
    }
    v.tokens_.push_back(std::move(t));
  }
  return v;
}

Vocabulary Vocabulary::build(std::span<const std::string> corpus, std::size_t min_frequency, std::size_t max_size) {
  if (corpus.empty()) fail(ErrorKind::validation, "build_vocab: empty corpus");
  std::map<std::string, std::size_t> counts;
  for (const auto& doc : corpus) {
    for (auto& w : split_words(doc)) ++counts[w];
  }
  std::vector<std::pair<std::string, std::size_t>> ranked;
  for (auto& [w, c] : counts) {
    if (c >= min_frequency && c > 0) ranked.emplace_back(w, c);
  }
  std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  if (max_size > 0 && ranked.size() > max_size) ranked.resize(max_size);
  std::vector<std::string> tokens;
  for (auto& [w, c] : ranked) tokens.push_back(w);
  auto v = from_tokens(std::move(tokens));
  v.min_frequency_ = min_frequency;
  return v;
}

TokenId Vocabulary::id(std::string_view token) const {
  auto it = index_.find(std::string(token));
  return it == index_.end() ? unk() : it->second;
}

bool Vocabulary::contains(std::string_view token) const { return index_.contains(std::string(token)); }

const std::string& Vocabulary::token(TokenId id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size()) {
    fail(ErrorKind::dimension, "vocabulary: id " + std::to_string(id) + " out of range");
  }
  return tokens_[static_cast<std::size_t>(id)];
}

void Vocabulary::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::io, "cannot write vocabulary " + path.string());
  for (const auto& t : tokens_) out << t << '\n';
  if (!out) fail(ErrorKind::io, "failed writing vocabulary " + path.string());
}

Vocabulary Vocabulary::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::io, "cannot read vocabulary " + path.string());
  std::vector<std::string> lines;
  for (std::string line; std::getline(in, line);) lines.push_back(line);
  if (lines.size() < kSpecialCount || lines[0] != kCls || lines[1] != kUnk || lines[2] != kPad) {
    fail(ErrorKind::parse, "vocabulary file " + path.string() + " does not start with the special tokens");
  }
  lines.erase(lines.begin(), lines.begin() + kSpecialCount);
  return from_tokens(std::move(lines));
}

}  // namespace ventcast::text
