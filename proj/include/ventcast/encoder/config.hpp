#pragma once

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

namespace ventcast::encoder {

struct EncoderConfig {
  std::size_t n_layers = 4;
  std::size_t d_model = 64;
  std::size_t n_heads = 4;
  std::size_t d_head = 16;
  std::size_t d_inner = 256;
  std::size_t max_len = 128;
  std::size_t vocab_size = 0;  // filled from the vocabulary
  std::size_t mem_len = 0;
  double predict_fraction = 1.0 / 6.0;
  double dropout = 0.0;

  void validate() const;
  std::vector<std::pair<std::string, std::string>> to_entries() const;
  // Reads every field from `entries`; unknown keys are ignored so the same
  // list can carry other metadata.
  static EncoderConfig from_entries(const std::vector<std::pair<std::string, std::string>>& entries);
};

}  // namespace ventcast::encoder
