#pragma once

#include <cstddef>
#include <vector>

#include "vitask/data/types.hpp"
#include "vitask/numerics/random.hpp"

namespace vitask::data {

/// Draws a negative for `anchor`: uniformly among records of `dataset` with
/// identical instruction tokens and a different response. Throws
/// std::runtime_error("no valid negative") when none exists.
const InstructionRecord& sample_negative(const InstructionRecord& anchor, const std::vector<InstructionRecord>& dataset,
                                         numerics::Rng& rng);

/// Index-based sampler with the eligibility lists precomputed; draws the same
/// distribution as sample_negative.
class NegativeSampler {
 public:
  explicit NegativeSampler(const std::vector<InstructionRecord>& dataset);

  /// Throws when any record lacks an eligible negative.
  void require_all_eligible() const;
  bool has_negative(std::size_t anchor) const { return !eligible_[anchor].empty(); }
  std::size_t sample(std::size_t anchor, numerics::Rng& rng) const;

 private:
  std::vector<std::vector<std::size_t>> eligible_;
};

}  // namespace vitask::data
