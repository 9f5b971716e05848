#include "ventcast/text/tokenize.hpp"

#include "ventcast/error.hpp"

namespace ventcast::text {

TokenSequence tokenize(std::string_view text, const Vocabulary& vocab, std::size_t max_len, std::string note_id) {
  if (max_len < 2) fail(ErrorKind::contract, "tokenize: max_len must be at least 2");
  TokenSequence seq;
  seq.note_id = std::move(note_id);
  seq.ids.reserve(max_len);
  seq.ids.push_back(vocab.cls());
  for (const auto& word : split_words(text)) {
    if (seq.ids.size() == max_len) break;
    seq.ids.push_back(vocab.id(word));
  }
  seq.true_length = seq.ids.size();
  seq.ids.resize(max_len, vocab.pad());
  return seq;
}

TokenSequence trim_padding(TokenSequence seq) {
  seq.ids.resize(seq.true_length);
  return seq;
}

std::string detokenize(const TokenSequence& seq, const Vocabulary& vocab) {
  std::string out;
  for (std::size_t i = 1; i < seq.true_length; ++i) {
    if (i > 1) out.push_back(' ');
    out += vocab.token(seq.ids[i]);
  }
  return out;
}

void validate(const TokenSequence& seq, const Vocabulary& vocab) {
  if (seq.ids.empty() || seq.ids[0] != vocab.cls()) fail(ErrorKind::internal, "token sequence must start with CLS");
  if (seq.true_length < 1 || seq.true_length > seq.ids.size()) {
    fail(ErrorKind::internal, "token sequence true_length out of range");
  }
  for (std::size_t i = 0; i < seq.ids.size(); ++i) {
    const auto id = seq.ids[i];
    if (id < 0 || static_cast<std::size_t>(id) >= vocab.size()) fail(ErrorKind::internal, "token id out of range");
    if (i >= seq.true_length && id != vocab.pad()) fail(ErrorKind::internal, "non-PAD token after true_length");
    if (i > 0 && i < seq.true_length && (id == vocab.pad() || id == vocab.cls())) {
      fail(ErrorKind::internal, "special token inside the body of a sequence");
    }
  }
}

}  // namespace ventcast::text
