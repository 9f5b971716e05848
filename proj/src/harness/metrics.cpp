#include "ventcast/harness/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "ventcast/error.hpp"

namespace ventcast::harness {

double auroc(std::span<const double> scores, std::span<const double> labels) {
  if (scores.size() != labels.size()) fail(ErrorKind::dimension, "auroc: scores and labels differ in length");
  std::size_t pos = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] != 0.0 && labels[i] != 1.0) fail(ErrorKind::contract, "auroc: labels must be 0 or 1");
    if (!std::isfinite(scores[i])) fail(ErrorKind::contract, "auroc: scores must be finite");
    pos += labels[i] == 1.0;
  }
  const std::size_t neg = labels.size() - pos;
  if (pos == 0 || neg == 0) fail(ErrorKind::undefined_metric, "auroc is undefined unless both classes are present");

  // Rank-sum form with midranks for ties.
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  double pos_rank_sum = 0.0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
    const double midrank = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
    for (std::size_t k = i; k < j; ++k) {
      if (labels[order[k]] == 1.0) pos_rank_sum += midrank;
    }
    i = j;
  }
  const double p = static_cast<double>(pos), n = static_cast<double>(neg);
  return (pos_rank_sum - p * (p + 1.0) / 2.0) / (p * n);
}

EarlyStopState early_stop(std::span<const double> track, std::size_t patience) {
  if (track.empty()) fail(ErrorKind::contract, "early_stop needs at least one epoch");
  EarlyStopState s;
  for (std::size_t i = 1; i < track.size(); ++i) {
    if (track[i] > track[s.best_epoch]) s.best_epoch = i;
  }
  s.stop = patience > 0 && track.size() - 1 - s.best_epoch >= patience;
  return s;
}

Summary summarize(std::span<const double> values) {
  if (values.empty()) fail(ErrorKind::contract, "summarize needs at least one value");
  Summary s;
  for (double v : values) s.mean += v;
  s.mean /= static_cast<double>(values.size());
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - s.mean) * (v - s.mean);
    s.sd = std::sqrt(ss / static_cast<double>(values.size() - 1));
  }
  return s;
}

std::string format_mean_sd(const Summary& s) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.3f \xC2\xB1 %.3f", s.mean, s.sd);
  return buf;
}

}  // namespace ventcast::harness
