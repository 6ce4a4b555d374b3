#pragma once

#include <cstddef>
#include <vector>

#include "vitask/numerics/tensor.hpp"

namespace vitask::numerics::detail {

/// Records the forward values of stop_gradient nodes and, in replay mode,
/// substitutes them back in call order. The gradient checker uses this so
/// finite differences treat detached quantities as the constants they are.
struct DetachTape {
  std::vector<Tensor> values;
  std::size_t cursor = 0;
  bool replay = false;
};

DetachTape*& active_detach_tape() noexcept;

}  // namespace vitask::numerics::detail
