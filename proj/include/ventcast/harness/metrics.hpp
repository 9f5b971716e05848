#pragma once

#include <span>
#include <string>
#include <vector>

namespace ventcast::harness {

// Mann-Whitney AUROC: fraction of (positive, negative) pairs with the
// positive scored higher, ties counting one half. Labels must be 0 or 1 and
// both classes must be present.
double auroc(std::span<const double> scores, std::span<const double> labels);

struct EarlyStopState {
  std::size_t best_epoch = 0;
  bool stop = false;  // `patience` epochs have passed without improvement
};

// Earliest epoch attaining the maximum; patience 0 never stops.
EarlyStopState early_stop(std::span<const double> track, std::size_t patience);

struct Summary {
  double mean = 0.0;
  double sd = 0.0;  // sample formula; 0 for a single value
};

Summary summarize(std::span<const double> values);
// "0.720 ± 0.020"
std::string format_mean_sd(const Summary& s);

}  // namespace ventcast::harness
