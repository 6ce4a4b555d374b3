#pragma once

// Independent reference computations for the tests. Everything here is
// written from the formulas in long double, without the library's ops.

#include <cmath>
#include <cstddef>
#include <random>
#include <vector>

namespace oracle {

using Real = long double;

inline std::vector<Real> log_softmax(const std::vector<double>& x) {
  Real total = 0.0L;
  for (double v : x) total += std::exp(static_cast<Real>(v));
  std::vector<Real> out;
  for (double v : x) out.push_back(static_cast<Real>(v) - std::log(total));
  return out;
}

inline std::vector<Real> softmax(const std::vector<double>& x) {
  auto lp = log_softmax(x);
  for (Real& v : lp) v = std::exp(v);
  return lp;
}

/// Mean over rows of -log p[target].
inline Real nll(const std::vector<std::vector<double>>& logits, const std::vector<std::size_t>& targets) {
  Real total = 0.0L;
  for (std::size_t t = 0; t < logits.size(); ++t) total -= log_softmax(logits[t])[targets[t]];
  return total / static_cast<Real>(logits.size());
}

/// Mean over rows of KL(softmax(p) || softmax(q)).
inline Real kl(const std::vector<std::vector<double>>& p, const std::vector<std::vector<double>>& q) {
  Real total = 0.0L;
  for (std::size_t t = 0; t < p.size(); ++t) {
    const auto lp = log_softmax(p[t]);
    const auto lq = log_softmax(q[t]);
    for (std::size_t j = 0; j < lp.size(); ++j) total += std::exp(lp[j]) * (lp[j] - lq[j]);
  }
  return total / static_cast<Real>(p.size());
}

/// Mean over rows of -log softmax(pos - neg)[target].
inline Real crt(const std::vector<std::vector<double>>& pos, const std::vector<std::vector<double>>& neg,
                const std::vector<std::size_t>& targets) {
  std::vector<std::vector<double>> diff(pos.size());
  for (std::size_t t = 0; t < pos.size(); ++t) {
    for (std::size_t j = 0; j < pos[t].size(); ++j) diff[t].push_back(pos[t][j] - neg[t][j]);
  }
  return nll(diff, targets);
}

/// Row-major [m, k] x [k, n].
inline std::vector<Real> matmul(const std::vector<double>& a, const std::vector<double>& b, std::size_t m,
                                std::size_t k, std::size_t n) {
  std::vector<Real> c(m * n, 0.0L);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j)
      for (std::size_t p = 0; p < k; ++p) c[i * n + j] += static_cast<Real>(a[i * k + p]) * b[p * n + j];
  return c;
}

/// Multinomial logistic regression by full-batch gradient descent; returns
/// training-free accuracy on `test`.
struct LogisticProbe {
  std::size_t classes = 0, dims = 0;
  std::vector<double> w, b;

  void fit(const std::vector<std::vector<double>>& x, const std::vector<std::size_t>& y, std::size_t classes_,
           std::size_t steps = 300, double lr = 0.1) {
    classes = classes_;
    dims = x.front().size();
    w.assign(classes * dims, 0.0);
    b.assign(classes, 0.0);
    for (std::size_t s = 0; s < steps; ++s) {
      std::vector<double> gw(w.size(), 0.0), gb(classes, 0.0);
      for (std::size_t i = 0; i < x.size(); ++i) {
        const auto p = softmax(scores(x[i]));
        for (std::size_t c = 0; c < classes; ++c) {
          const double g = static_cast<double>(p[c]) - (c == y[i] ? 1.0 : 0.0);
          gb[c] += g;
          for (std::size_t d = 0; d < dims; ++d) gw[c * dims + d] += g * x[i][d];
        }
      }
      const double inv = lr / static_cast<double>(x.size());
      for (std::size_t k = 0; k < w.size(); ++k) w[k] -= inv * gw[k];
      for (std::size_t c = 0; c < classes; ++c) b[c] -= inv * gb[c];
    }
  }

  std::vector<double> scores(const std::vector<double>& v) const {
    std::vector<double> s(classes, 0.0);
    for (std::size_t c = 0; c < classes; ++c) {
      s[c] = b[c];
      for (std::size_t d = 0; d < dims; ++d) s[c] += w[c * dims + d] * v[d];
    }
    return s;
  }

  std::size_t predict(const std::vector<double>& v) const {
    const auto s = scores(v);
    std::size_t best = 0;
    for (std::size_t c = 1; c < classes; ++c)
      if (s[c] > s[best]) best = c;
    return best;
  }
};

inline std::vector<double> random_vector(std::size_t n, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> d(0.0, scale);
  std::vector<double> v(n);
  for (double& x : v) x = d(rng);
  return v;
}

}  // namespace oracle
