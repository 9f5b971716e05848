#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "ventcast/text/vocabulary.hpp"

namespace ventcast::text {

struct TokenSequence {
  std::vector<TokenId> ids;      // always max_len long, ids[0] == CLS
  std::size_t true_length = 1;   // tokens before padding, CLS included
  std::string note_id;
};

TokenSequence tokenize(std::string_view text, const Vocabulary& vocab, std::size_t max_len,
                       std::string note_id = {});

// Drops the PAD tail. Encoder outputs at non-PAD positions are unchanged,
// since PAD keys are never attended and attention is relative.
TokenSequence trim_padding(TokenSequence seq);

// Space-joined tokens of the non-special prefix; retokenizing reproduces ids
// for in-vocabulary text.
std::string detokenize(const TokenSequence& seq, const Vocabulary& vocab);

// Throws if any TokenSequence invariant is broken.
void validate(const TokenSequence& seq, const Vocabulary& vocab);

}  // namespace ventcast::text
