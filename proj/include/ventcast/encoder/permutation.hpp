#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace ventcast::encoder {

// A factorization order over positions 0..L-1. Positions whose rank is at or
// beyond `cutoff` are prediction targets. Masks are L x L row-major, entry
// [j*L+k] != 0 meaning position j may attend to position k.
struct PermutationPlan {
  std::vector<std::size_t> order;
  std::vector<std::size_t> rank;  // inverse of order
  std::size_t cutoff = 0;
  std::vector<std::uint8_t> content_mask;  // rank(k) <= rank(j)
  std::vector<std::uint8_t> query_mask;    // rank(k) <  rank(j)

  std::size_t length() const { return order.size(); }
  bool content_visible(std::size_t j, std::size_t k) const { return content_mask[j * length() + k] != 0; }
  bool query_visible(std::size_t j, std::size_t k) const { return query_mask[j * length() + k] != 0; }
  bool is_target(std::size_t position) const { return rank[position] >= cutoff; }
  // Target positions in factorization order.
  std::vector<std::size_t> targets() const;
};

// Builds masks for an explicit order; throws if `order` is not a permutation.
PermutationPlan make_plan(std::vector<std::size_t> order, std::size_t cutoff);

// Uniformly samples the order of the free positions; positions flagged in
// `fixed` (CLS, PAD) are ranked first in ascending position order so they are
// never targets and always precede every target. The number of targets is
// max(1, floor(predict_fraction * free)) capped at the free count, or 0 when
// nothing is free.
PermutationPlan sample_permutation(std::size_t length, std::uint64_t seed, double predict_fraction = 1.0 / 6.0,
                                   std::span<const std::uint8_t> fixed = {});

// Internal assertion over every plan invariant; `fixed` positions must not
// be targets.
void check_plan(const PermutationPlan& plan, std::span<const std::uint8_t> fixed = {});

}  // namespace ventcast::encoder
