#include "vitask/objectives/losses.hpp"

#include <stdexcept>
#include <string>

#include "vitask/numerics/ops.hpp"

namespace vitask::objectives {

namespace ops = numerics;

namespace {

void require_same_shape(const ResponseLogits& a, const ResponseLogits& b, const char* what) {
  if (a.logits.shape() != b.logits.shape()) {
    throw std::invalid_argument(std::string(what) + ": logit shapes differ (" + numerics::shape_string(a.logits.shape()) +
                                " vs " + numerics::shape_string(b.logits.shape()) + ")");
  }
}

Var mean_target_nll(const Var& log_probs, const data::TokenIds& targets) {
  const Tensor& lp = log_probs.value();
  if (lp.rows() != targets.size()) {
    throw std::invalid_argument("loss: " + std::to_string(lp.rows()) + " logit rows for " +
                                std::to_string(targets.size()) + " response tokens");
  }
  for (std::size_t t : targets) {
    if (t >= lp.cols()) throw std::out_of_range("loss: token id " + std::to_string(t) + " outside vocabulary");
  }
  return ops::scale(ops::mean(ops::gather(log_probs, targets)), -1.0);
}

Var kl_rows(const Var& plain, const Var& target_log_probs) {
  const Var lp = ops::log_softmax(plain);
  const Var per_entry = ops::mul(ops::exp(lp), ops::sub(lp, target_log_probs));
  return ops::scale(ops::sum(per_entry), 1.0 / static_cast<double>(plain.value().rows()));
}

}  // namespace

Var nll_loss(const ResponseLogits& logits, const data::TokenIds& response) {
  return mean_target_nll(ops::log_softmax(logits.logits), response);
}

Var rda_loss(const ResponseLogits& plain, const ResponseLogits& ep) {
  require_same_shape(plain, ep, "rda_loss");
  return kl_rows(plain.logits, ops::stop_gradient(ops::log_softmax(ep.logits)));
}

Var rda_star_loss(const ResponseLogits& plain, const ResponseLogits& ep) {
  require_same_shape(plain, ep, "rda_star_loss");
  return kl_rows(plain.logits, ops::log_softmax(ep.logits));
}

Var margin_distribution(const ResponseLogits& pos, const ResponseLogits& neg) {
  require_same_shape(pos, neg, "margin_distribution");
  return ops::softmax(ops::sub(pos.logits, neg.logits));
}

Var crt_loss(const ResponseLogits& pos, const ResponseLogits& neg, const data::TokenIds& response) {
  require_same_shape(pos, neg, "crt_loss");
  return mean_target_nll(ops::log_softmax(ops::sub(pos.logits, neg.logits)), response);
}

LossBreakdown stage_loss(int stage, double van, double ep, double rda, double crt, double alpha, double beta) {
  if (stage != 1 && stage != 2) throw std::invalid_argument("stage must be 1 or 2");
  if (!(alpha >= 0.0) || !(beta >= 0.0)) throw std::invalid_argument("loss weights must be non-negative");
  LossBreakdown b;
  b.stage = stage;
  b.van = van;
  b.ep = ep;
  b.rda = rda;
  b.crt = stage == 2 ? crt : 0.0;
  b.alpha = alpha;
  b.beta = beta;
  b.total = van + ep + alpha * rda;
  if (stage == 2) b.total += beta * crt;
  return b;
}

Var compose_stage_loss(int stage, const Var& van, const Var& ep, const Var& rda, const Var& crt, double alpha,
                       double beta) {
  if (stage != 1 && stage != 2) throw std::invalid_argument("stage must be 1 or 2");
  if (!(alpha >= 0.0) || !(beta >= 0.0)) throw std::invalid_argument("loss weights must be non-negative");
  Var total = ops::add(ops::add(van, ep), ops::scale(rda, alpha));
  if (stage == 2) {
    if (!crt.defined()) throw std::invalid_argument("stage 2 needs a contrastive term");
    total = ops::add(total, ops::scale(crt, beta));
  }
  return total;
}

}  // namespace vitask::objectives
