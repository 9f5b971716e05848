#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "ventcast/encoder/config.hpp"
#include "ventcast/encoder/permutation.hpp"
#include "ventcast/io/container.hpp"
#include "ventcast/numerics/tensor.hpp"
#include "ventcast/text/tokenize.hpp"
#include "ventcast/text/vocabulary.hpp"

namespace ventcast::encoder {

inline constexpr std::string_view kEncoderMagic = "CXLN1";

// Transformer-XL style encoder with relative positional attention and a
// shared-weight query stream for permutation language modelling. Instances
// are values: copying shares parameter storage, clone() deep-copies.
class EncoderModel {
 public:
  static EncoderModel initialize(EncoderConfig config, text::Vocabulary vocab, std::uint64_t seed);
  static std::vector<std::string> parameter_names(const EncoderConfig& config);

  const EncoderConfig& config() const { return config_; }
  const text::Vocabulary& vocab() const { return vocab_; }
  std::uint64_t seed() const { return seed_; }
  std::uint64_t steps() const { return steps_; }
  void set_steps(std::uint64_t steps) { steps_ = steps; }

  const num::Tensor& param(std::string_view name) const;
  const std::vector<std::pair<std::string, num::Tensor>>& named_parameters() const { return params_; }
  std::vector<num::Tensor> parameters() const;
  // Size of the prediction space: every non-special token.
  std::size_t predictable_vocab() const { return vocab_.size() - text::Vocabulary::kSpecialCount; }

  EncoderModel clone() const;

  // Records named `head.*` are tolerated on load and left to the caller.
  io::Container to_container() const;
  static EncoderModel from_container(const io::Container& container);
  void save(const std::filesystem::path& path) const;
  static EncoderModel load(const std::filesystem::path& path);
  // FNV-1a over the serialized checkpoint bytes.
  std::uint64_t checksum() const;

 private:
  EncoderConfig config_;
  text::Vocabulary vocab_;
  std::uint64_t seed_ = 0;
  std::uint64_t steps_ = 0;
  std::vector<std::pair<std::string, num::Tensor>> params_;
};

// Per-layer recurrence memory for one sequence; empty when mem_len == 0.
using Memory = std::vector<num::Tensor>;

struct EncodeOptions {
  // Added to every absolute position; relative attention makes outputs
  // independent of it.
  std::int64_t position_offset = 0;
  // Dropout is active only when a generator is supplied and the rate is > 0.
  std::mt19937_64* dropout_rng = nullptr;
  // Compute only the [CLS] row of the final layer.
  bool cls_only = false;
};

struct EncodeResult {
  std::vector<num::Tensor> hidden;  // per sequence: [L x d_model] or [1 x d_model] with cls_only
  std::vector<Memory> mems;         // per sequence, when mem_len > 0
};

EncodeResult encode_content(const EncoderModel& model, std::span<const text::TokenSequence> batch,
                            const std::vector<Memory>* mems = nullptr, const EncodeOptions& options = {});

// Stacks per-sequence hidden states into [batch x L x d_model].
num::Tensor stack_hidden(const EncodeResult& result);

struct PlmTarget {
  std::size_t sequence = 0;
  std::size_t position = 0;
  text::TokenId token = 0;
};

struct PlmOutput {
  num::Tensor log_probs;  // [n_targets]; undefined when no sequence has a target
  std::vector<PlmTarget> targets;
};

// Positions that may never be predicted: CLS, UNK, and everything at or beyond
// true_length.
std::vector<std::uint8_t> fixed_positions(const text::TokenSequence& seq, const text::Vocabulary& vocab);

PlmOutput plm_forward(const EncoderModel& model, std::span<const text::TokenSequence> batch,
                      std::span<const PermutationPlan> plans, const EncodeOptions& options = {});

// Mean negative log-likelihood over all targets.
num::Tensor plm_loss(const PlmOutput& output);

}  // namespace ventcast::encoder
