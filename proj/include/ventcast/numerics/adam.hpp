#pragma once

#include <cstdint>
#include <vector>

#include "ventcast/numerics/tensor.hpp"

namespace ventcast::num {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Moment accumulators for a fixed parameter list, one pair per parameter.
struct OptimizerState {
  std::uint64_t step = 0;
  std::vector<std::vector<double>> first_moment;
  std::vector<std::vector<double>> second_moment;
  AdamConfig config;
};

OptimizerState make_optimizer_state(const std::vector<Tensor>& params, AdamConfig config);

// One bias-corrected Adam update using each parameter's accumulated gradient
// (a parameter without a gradient is treated as having a zero gradient).
void optimizer_step(std::vector<Tensor>& params, OptimizerState& state);

// Same update with explicitly supplied gradients.
void optimizer_step(std::vector<Tensor>& params, const std::vector<std::vector<double>>& grads,
                    OptimizerState& state);

void zero_grads(std::vector<Tensor>& params);

}  // namespace ventcast::num
