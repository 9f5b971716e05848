#include "ventcast/encoder/permutation.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "ventcast/error.hpp"

namespace ventcast::encoder {

std::vector<std::size_t> PermutationPlan::targets() const {
  return {order.begin() + static_cast<std::ptrdiff_t>(cutoff), order.end()};
}

PermutationPlan make_plan(std::vector<std::size_t> order, std::size_t cutoff) {
  const auto n = order.size();
  if (n == 0) fail(ErrorKind::contract, "permutation plan needs at least one position");
  if (cutoff > n) fail(ErrorKind::contract, "permutation cutoff beyond sequence length");
  PermutationPlan plan;
  plan.rank.assign(n, n);
  for (std::size_t r = 0; r < n; ++r) {
    if (order[r] >= n || plan.rank[order[r]] != n) fail(ErrorKind::contract, "order is not a permutation");
    plan.rank[order[r]] = r;
  }
  plan.order = std::move(order);
  plan.cutoff = cutoff;
  plan.content_mask.assign(n * n, 0);
  plan.query_mask.assign(n * n, 0);
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t k = 0; k < n; ++k) {
      plan.content_mask[j * n + k] = plan.rank[k] <= plan.rank[j];
      plan.query_mask[j * n + k] = plan.rank[k] < plan.rank[j];
    }
  }
  return plan;
}

PermutationPlan sample_permutation(std::size_t length, std::uint64_t seed, double predict_fraction,
                                   std::span<const std::uint8_t> fixed) {
  if (length == 0) fail(ErrorKind::contract, "sample_permutation: length must be positive");
  if (!fixed.empty() && fixed.size() != length) fail(ErrorKind::dimension, "sample_permutation: fixed mask length");
  std::vector<std::size_t> order, free;
  for (std::size_t i = 0; i < length; ++i) {
    (!fixed.empty() && fixed[i] ? order : free).push_back(i);
  }
  std::mt19937_64 rng(seed);
  std::shuffle(free.begin(), free.end(), rng);
  std::size_t n_targets = 0;
  if (!free.empty()) {
    const auto planned = static_cast<std::size_t>(std::floor(predict_fraction * static_cast<double>(free.size())));
    n_targets = std::min(free.size(), std::max<std::size_t>(1, planned));
  }
  order.insert(order.end(), free.begin(), free.end());
  return make_plan(std::move(order), length - n_targets);
}

void check_plan(const PermutationPlan& plan, std::span<const std::uint8_t> fixed) {
  const auto n = plan.length();
  auto violation = [](const char* what) { fail(ErrorKind::internal, std::string("permutation plan: ") + what); };
  if (plan.rank.size() != n || plan.content_mask.size() != n * n || plan.query_mask.size() != n * n) {
    violation("inconsistent sizes");
  }
  std::vector<std::uint8_t> seen(n, 0);
  for (std::size_t r = 0; r < n; ++r) {
    if (plan.order[r] >= n || seen[plan.order[r]]++) violation("order is not a bijection");
    if (plan.rank[plan.order[r]] != r) violation("rank is not the inverse of order");
  }
  for (std::size_t j = 0; j < n; ++j) {
    if (!plan.content_visible(j, j)) violation("content diagonal must be visible");
    if (plan.query_visible(j, j)) violation("query diagonal must be hidden");
    for (std::size_t k = 0; k < n; ++k) {
      if (plan.content_visible(j, k) != (plan.rank[k] <= plan.rank[j])) violation("content mask precedence");
      if (plan.query_visible(j, k) != (plan.rank[k] < plan.rank[j])) violation("query mask precedence");
    }
  }
  if (!fixed.empty()) {
    if (fixed.size() != n) violation("fixed mask length");
    for (std::size_t i = 0; i < n; ++i) {
      if (fixed[i] && plan.is_target(i)) violation("special position selected as a target");
    }
  }
}

}  // namespace ventcast::encoder
