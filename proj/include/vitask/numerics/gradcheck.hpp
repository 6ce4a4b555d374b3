#pragma once

#include <functional>
#include <string>
#include <vector>

#include "vitask/numerics/autograd.hpp"

namespace vitask::numerics {

struct GradCheckReport {
  double max_relative_error = 0.0;
  std::size_t components = 0;
  /// Parameter index and flat component of the worst mismatch.
  std::size_t worst_param = 0;
  std::size_t worst_component = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
};

/// Compares reverse-mode gradients of `f` against central differences
/// (f(p+eps) - f(p-eps)) / (2 eps) for every component of every parameter.
/// Relative error uses the denominator max(|a|, |n|, 1e-8).
///
/// stop_gradient outputs from the analytic pass are replayed during the
/// perturbed evaluations, so detached branches act as constants.
GradCheckReport check_gradients(const std::function<Var()>& f, const std::vector<Var>& params, double eps = 1e-5);

}  // namespace vitask::numerics
