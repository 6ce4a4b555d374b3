#pragma once

#include <vector>

#include "vitask/data/vocabulary.hpp"
#include "vitask/models/vlm.hpp"
#include "vitask/numerics/autograd.hpp"

namespace vitask::objectives {

using models::ResponseLogits;
using numerics::Tensor;
using numerics::Var;

/// Mean over response positions of -log softmax(logits)[target].
Var nll_loss(const ResponseLogits& logits, const data::TokenIds& response);

/// Mean over positions of KL(softmax(plain) || softmax(ep)) with the EP branch
/// detached: gradient reaches `plain` only.
Var rda_loss(const ResponseLogits& plain, const ResponseLogits& ep);

/// Same value as rda_loss; gradient reaches both branches.
Var rda_star_loss(const ResponseLogits& plain, const ResponseLogits& ep);

/// Per-position softmax(y_pos - y_neg), [T, V].
Var margin_distribution(const ResponseLogits& pos, const ResponseLogits& neg);

/// Mean over positions of -log q[target], q the margin distribution.
Var crt_loss(const ResponseLogits& pos, const ResponseLogits& neg, const data::TokenIds& response);

struct LossBreakdown {
  int stage = 1;
  double van = 0.0;
  double ep = 0.0;
  double rda = 0.0;
  double crt = 0.0;
  double total = 0.0;
  double alpha = 1.0;
  double beta = 1.0;
};

/// Stage 1: van + ep + alpha * rda, with crt reported as 0.
/// Stage 2: van + ep + alpha * rda + beta * crt.
LossBreakdown stage_loss(int stage, double van, double ep, double rda, double crt, double alpha, double beta);

/// Differentiable form of stage_loss; `crt` may be undefined in stage 1.
Var compose_stage_loss(int stage, const Var& van, const Var& ep, const Var& rda, const Var& crt, double alpha,
                       double beta);

}  // namespace vitask::objectives
