#include "vitask/numerics/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "vitask/numerics/detach_tape.hpp"

namespace vitask::numerics {

namespace {

class TapeScope {
 public:
  explicit TapeScope(detail::DetachTape& tape) : previous_(detail::active_detach_tape()) {
    detail::active_detach_tape() = &tape;
  }
  ~TapeScope() { detail::active_detach_tape() = previous_; }
  TapeScope(const TapeScope&) = delete;
  TapeScope& operator=(const TapeScope&) = delete;

 private:
  detail::DetachTape* previous_;
};

double evaluate(const std::function<Var()>& f, detail::DetachTape& tape) {
  tape.cursor = 0;
  NoGradGuard no_grad;
  const double v = f().value().item();
  if (!std::isfinite(v)) throw std::domain_error("gradient check: objective is not finite");
  return v;
}

}  // namespace

GradCheckReport check_gradients(const std::function<Var()>& f, const std::vector<Var>& params, double eps) {
  if (!(eps > 0.0)) throw std::invalid_argument("gradient check: eps must be positive");
  detail::DetachTape tape;
  GradientMap grads;
  {
    TapeScope scope(tape);
    Var loss = f();
    if (!std::isfinite(loss.value().item())) throw std::domain_error("gradient check: objective is not finite");
    grads = backward(loss, params);
  }
  tape.replay = true;
  TapeScope scope(tape);

  GradCheckReport report;
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    Var p = params[pi];
    const Tensor analytic = gradient_of(grads, p);
    Tensor& value = p.mutable_value();
    for (std::size_t i = 0; i < value.size(); ++i) {
      const double original = value[i];
      value[i] = original + eps;
      const double plus = evaluate(f, tape);
      value[i] = original - eps;
      const double minus = evaluate(f, tape);
      value[i] = original;
      const double numeric = (plus - minus) / (2.0 * eps);
      const double a = analytic[i];
      const double denom = std::max({std::abs(a), std::abs(numeric), 1e-8});
      const double rel = std::abs(a - numeric) / denom;
      ++report.components;
      if (rel > report.max_relative_error) {
        report.max_relative_error = rel;
        report.worst_param = pi;
        report.worst_component = i;
        report.worst_analytic = a;
        report.worst_numeric = numeric;
      }
    }
  }
  return report;
}

}  // namespace vitask::numerics
