#include "ventcast/harness/split.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "ventcast/error.hpp"

namespace ventcast::harness {

void SplitSpec::validate() const {
  if (!(holdout_fraction > 0.0 && holdout_fraction < 1.0)) fail(ErrorKind::config, "split: holdout fraction must lie in (0,1)");
  if (train_ratio == 0 || val_ratio == 0) fail(ErrorKind::config, "split: train:val ratio terms must be positive");
}

Split split(std::span<const std::string> patient_ids, const SplitSpec& spec, std::uint64_t seed) {
  spec.validate();
  std::vector<std::string> ids(patient_ids.begin(), patient_ids.end());
  std::sort(ids.begin(), ids.end());
  if (std::adjacent_find(ids.begin(), ids.end()) != ids.end()) fail(ErrorKind::validation, "split: duplicate patient id");
  if (ids.size() < 10) fail(ErrorKind::validation, "split: need at least 10 patients, got " + std::to_string(ids.size()));

  const auto n = ids.size();
  const auto n_holdout = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(spec.holdout_fraction * static_cast<double>(n))));
  std::mt19937_64 holdout_rng(spec.holdout_seed);
  std::shuffle(ids.begin(), ids.end(), holdout_rng);
  Split s;
  s.holdout.assign(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(n_holdout));
  std::vector<std::string> rest(ids.begin() + static_cast<std::ptrdiff_t>(n_holdout), ids.end());
  std::sort(rest.begin(), rest.end());

  const double val_share = static_cast<double>(spec.val_ratio) / static_cast<double>(spec.train_ratio + spec.val_ratio);
  const auto n_val = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(val_share * static_cast<double>(rest.size()))));
  if (n_val >= rest.size()) fail(ErrorKind::validation, "split: too few patients for a training set");
  std::mt19937_64 rng(seed);
  std::shuffle(rest.begin(), rest.end(), rng);
  s.val.assign(rest.begin(), rest.begin() + static_cast<std::ptrdiff_t>(n_val));
  s.train.assign(rest.begin() + static_cast<std::ptrdiff_t>(n_val), rest.end());
  for (auto* v : {&s.holdout, &s.train, &s.val}) std::sort(v->begin(), v->end());
  return s;
}

void check_disjoint(const Split& s) {
  std::set<std::string> seen;
  for (const auto* part : {&s.holdout, &s.train, &s.val}) {
    for (const auto& id : *part) {
      if (!seen.insert(id).second) fail(ErrorKind::leakage, "patient " + id + " appears in more than one split");
    }
  }
}

}  // namespace ventcast::harness
