#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "ventcast/encoder/model.hpp"

namespace ventcast::encoder {

struct CorpusEntry {
  std::string note_id;
  std::string text;
};

struct PretrainOptions {
  std::size_t steps = 1000;
  std::size_t batch_size = 16;
  double lr = 1e-4;
  std::uint64_t seed = 0;
  // Called after every optimizer update with (step, loss).
  std::function<void(std::size_t, double)> on_step;
};

struct PretrainResult {
  EncoderModel model;
  std::vector<double> loss_trace;  // one entry per optimizer update
};

// Permutation-language-model pretraining with Adam on the mean target NLL.
// Refuses to run when any corpus note id appears in `holdout_note_ids`.
PretrainResult pretrain(std::span<const CorpusEntry> corpus, const text::Vocabulary& vocab, const EncoderConfig& config,
                        const PretrainOptions& options, const std::set<std::string>& holdout_note_ids = {});

// `step,loss` CSV with a header row; steps are 1-based.
void write_loss_trace(const std::filesystem::path& path, std::span<const double> trace);

// Trailing-window mean of the last `window` entries.
double smoothed_tail(std::span<const double> trace, std::size_t window);

}  // namespace ventcast::encoder
