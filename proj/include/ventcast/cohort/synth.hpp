#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>

#include "ventcast/cohort/records.hpp"

namespace ventcast::cohort {

enum class Signal { none, keyword, temporal };
std::string to_string(Signal signal);
Signal parse_signal(const std::string& name);

struct SynthConfig {
  std::size_t patients = 500;      // patients that survive every selection stage
  double excluded_fraction = 0.1;  // extra patients, each built to fail one stage
  Signal signal = Signal::keyword;
  double strength = 1.0;           // probability that a planted signal follows the label
  // Distribution targets; word counts are multiplied by length_scale and
  // note counts by note_scale.
  double word_mean = 1774.0;
  double word_sd = 1645.0;
  double length_scale = 0.01;
  double note_mean = 9.78;
  double note_sd = 4.70;
  double note_scale = 1.0;
  double pmv_rate = 0.5;
  double mortality_rate = 0.5;
  // Sentinels are placed among the first words so truncation keeps them.
  std::size_t sentinel_window = 16;

  void validate() const;
};

// Keyword sentinel for a task, and the (first, second) pair used by the
// temporal signal.
std::string keyword_sentinel(Task task);
std::pair<std::string, std::string> order_sentinels(Task task);

struct SynthSummary {
  std::size_t included = 0;
  std::size_t excluded = 0;
  std::size_t notes = 0;
};

// Writes the six tables and manifest.jsonl into `dir`. Same config and seed
// give byte-identical files.
SynthSummary synth_generate(const SynthConfig& config, std::uint64_t seed, const std::filesystem::path& dir);

}  // namespace ventcast::cohort
