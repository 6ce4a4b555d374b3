#pragma once

#include <cstddef>
#include <vector>

#include "vitask/numerics/autograd.hpp"

namespace vitask::pipeline {

using numerics::Tensor;
using numerics::Var;

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  /// Decoupled decay, applied as p -= lr * weight_decay * p.
  double weight_decay = 0.0;
};

struct AdamState {
  std::size_t step = 0;
  std::vector<Tensor> m;
  std::vector<Tensor> v;
};

/// One bias-corrected Adam update of `params` in place. Moments are created
/// on first use. Throws std::domain_error on non-finite gradients, before any
/// parameter changes.
void optimizer_step(const std::vector<Var>& params, const std::vector<Tensor>& grads, AdamState& state,
                    const AdamConfig& config);

}  // namespace vitask::pipeline
