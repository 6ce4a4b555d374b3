#include "vitask/pipeline/optimizer.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace vitask::pipeline {

void optimizer_step(const std::vector<Var>& params, const std::vector<Tensor>& grads, AdamState& state,
                    const AdamConfig& config) {
  if (params.size() != grads.size()) throw std::invalid_argument("optimizer: parameter/gradient count mismatch");
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i].shape() != grads[i].shape()) {
      throw std::invalid_argument("optimizer: gradient shape " + numerics::shape_string(grads[i].shape()) +
                                  " does not match parameter " + numerics::shape_string(params[i].shape()));
    }
    if (!grads[i].all_finite()) throw std::domain_error("optimizer: non-finite gradient for parameter " + std::to_string(i));
  }
  if (state.m.empty()) {
    for (const Var& p : params) {
      state.m.emplace_back(p.shape(), 0.0);
      state.v.emplace_back(p.shape(), 0.0);
    }
  }
  if (state.m.size() != params.size()) throw std::invalid_argument("optimizer: state does not match parameters");

  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(config.beta1, t);
  const double c2 = 1.0 - std::pow(config.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    Var p = params[i];
    Tensor& value = p.mutable_value();
    Tensor& m = state.m[i];
    Tensor& v = state.v[i];
    const Tensor& g = grads[i];
    for (std::size_t k = 0; k < value.size(); ++k) {
      m[k] = config.beta1 * m[k] + (1.0 - config.beta1) * g[k];
      v[k] = config.beta2 * v[k] + (1.0 - config.beta2) * g[k] * g[k];
      const double mhat = m[k] / c1;
      const double vhat = v[k] / c2;
      double update = config.learning_rate * mhat / (std::sqrt(vhat) + config.eps);
      if (config.weight_decay != 0.0) update += config.learning_rate * config.weight_decay * value[k];
      value[k] -= update;
    }
  }
}

}  // namespace vitask::pipeline
