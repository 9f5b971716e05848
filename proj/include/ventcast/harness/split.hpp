#pragma once

#include <cstdint>
#include <set>
#include <span>
#include <string>
#include <vector>

namespace ventcast::harness {

struct SplitSpec {
  double holdout_fraction = 0.10;
  std::size_t train_ratio = 8;
  std::size_t val_ratio = 1;
  std::uint64_t holdout_seed = 17;  // fixed across run seeds

  void validate() const;
};

struct Split {
  std::vector<std::string> holdout;  // each list sorted
  std::vector<std::string> train;
  std::vector<std::string> val;
};

// Patient-level split: the holdout is carved with `spec.holdout_seed`, then
// the remainder is divided train:val with `seed`.
Split split(std::span<const std::string> patient_ids, const SplitSpec& spec, std::uint64_t seed);

// Throws a leakage error when any id appears in more than one set.
void check_disjoint(const Split& s);

}  // namespace ventcast::harness
