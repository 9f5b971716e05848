#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "ventcast/aggregator/aggregator.hpp"
#include "ventcast/cohort/records.hpp"
#include "ventcast/cohort/synth.hpp"
#include "ventcast/encoder/config.hpp"
#include "ventcast/harness/split.hpp"

namespace ventcast::config {

// Sectioned key = value file. Sections: data, synth, vocab, encoder,
// pretrain, meta, finetune, split, task. Unknown sections or keys are errors.
struct RunConfig {
  // [data]
  std::string tables;  // directory of the six CSVs; empty means <run>/data
  std::string corpus;  // optional extra pretraining text, one document per line

  // [synth]
  cohort::SynthConfig synth;
  std::uint64_t synth_seed = 1;

  // [vocab]
  std::size_t vocab_min_frequency = 1;
  std::size_t vocab_max_size = 0;

  // [encoder]
  encoder::EncoderConfig encoder;

  // [pretrain]
  std::size_t pretrain_steps = 200000;
  std::size_t pretrain_batch = 16;
  double pretrain_lr = 1e-4;
  std::uint64_t pretrain_seed = 1;

  // [meta]
  std::size_t meta_epochs = 4;
  std::size_t meta_batch = 32;
  double meta_lr = 1e-5;
  std::size_t meta_patience = 0;

  // [finetune]
  std::size_t finetune_layers = 2;
  std::size_t finetune_batch = 128;
  double finetune_lr = 1e-4;
  std::size_t finetune_hidden = 64;
  std::size_t finetune_predictor_hidden = 64;
  std::size_t finetune_patience = 3;
  std::size_t finetune_max_epochs = 50;
  std::vector<agg::Pooling> poolings{agg::Pooling::bilstm, agg::Pooling::mean};

  // [split]
  harness::SplitSpec split;
  std::vector<std::uint64_t> seeds{1, 2, 3};

  // [task]
  std::vector<cohort::Task> tasks{cohort::Task::pmv, cohort::Task::mortality};

  void validate() const;
  // Canonical text: every key in a fixed order; parsing it gives back an
  // equal config.
  std::string to_text() const;
  // FNV-1a of to_text(), hex.
  std::string hash() const;
  agg::AggregatorConfig aggregator(agg::Pooling pooling) const;
};

RunConfig parse_run_config(const std::string& text, const std::string& source = "config");
RunConfig load_run_config(const std::filesystem::path& path);

}  // namespace ventcast::config
