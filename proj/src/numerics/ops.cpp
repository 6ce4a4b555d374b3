#include "vitask/numerics/ops.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

#include "vitask/numerics/detach_tape.hpp"
#include "vitask/numerics/kernels.hpp"

namespace vitask::numerics {

namespace kernels {

double dot(const double* a, const double* b, std::size_t n) {
  double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    s0 += a[i] * b[i];
    s1 += a[i + 1] * b[i + 1];
    s2 += a[i + 2] * b[i + 2];
    s3 += a[i + 3] * b[i + 3];
  }
  for (; i < n; ++i) s0 += a[i] * b[i];
  return (s0 + s1) + (s2 + s3);
}

void gemm_nn(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    double* ci = c + i * n;
    const double* ai = a + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = ai[p];
      if (av == 0.0) continue;
      const double* bp = b + p * n;
      for (std::size_t j = 0; j < n; ++j) ci[j] += av * bp[j];
    }
  }
}

void gemm_nt(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* ai = a + i * k;
    double* ci = c + i * n;
    for (std::size_t j = 0; j < n; ++j) ci[j] += dot(ai, b + j * k, k);
  }
}

void gemm_tn(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* ai = a + i * k;
    const double* bi = b + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = ai[p];
      if (av == 0.0) continue;
      double* cp = c + p * n;
      for (std::size_t j = 0; j < n; ++j) cp[j] += av * bi[j];
    }
  }
}

}  // namespace kernels

namespace detail {
DetachTape*& active_detach_tape() noexcept {
  thread_local DetachTape* tape = nullptr;
  return tape;
}
}  // namespace detail

namespace {

using detail::make_result;

void require_rank2(const Var& v, const char* op) {
  if (v.value().rank() != 2) {
    throw std::invalid_argument(std::string(op) + " expects a rank-2 tensor, got " + shape_string(v.shape()));
  }
}

void require_same_shape(const Var& a, const Var& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw std::invalid_argument(std::string(op) + ": shape mismatch " + shape_string(a.shape()) + " vs " +
                                shape_string(b.shape()));
  }
}

Node& parent(Node& self, std::size_t i) { return *self.parents[i]; }

}  // namespace

Var add(const Var& a, const Var& b) {
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  if (av.shape() == bv.shape()) {
    Tensor out = av;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += bv[i];
    return make_result(std::move(out), {a, b}, [](Node& self) {
      for (std::size_t p = 0; p < 2; ++p) {
        Node& in = parent(self, p);
        if (!in.requires_grad) continue;
        Tensor& g = in.grad_buffer();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
      }
    });
  }
  // Row broadcast: b is a vector matching the last axis of a.
  if (bv.rank() == 1 && bv.size() == av.cols()) {
    Tensor out = av;
    const std::size_t cols = av.cols();
    for (std::size_t r = 0; r < out.rows(); ++r)
      for (std::size_t c = 0; c < cols; ++c) out[r * cols + c] += bv[c];
    return make_result(std::move(out), {a, b}, [cols](Node& self) {
      Node& in_a = parent(self, 0);
      Node& in_b = parent(self, 1);
      if (in_a.requires_grad) {
        Tensor& g = in_a.grad_buffer();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
      }
      if (in_b.requires_grad) {
        Tensor& g = in_b.grad_buffer();
        for (std::size_t r = 0; r < self.grad.rows(); ++r)
          for (std::size_t c = 0; c < cols; ++c) g[c] += self.grad[r * cols + c];
      }
    });
  }
  throw std::invalid_argument("add: incompatible shapes " + shape_string(av.shape()) + " and " +
                              shape_string(bv.shape()));
}

Var sub(const Var& a, const Var& b) {
  require_same_shape(a, b, "sub");
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= b.value()[i];
  return make_result(std::move(out), {a, b}, [](Node& self) {
    Node& in_a = parent(self, 0);
    Node& in_b = parent(self, 1);
    if (in_a.requires_grad) {
      Tensor& g = in_a.grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    }
    if (in_b.requires_grad) {
      Tensor& g = in_b.grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] -= self.grad[i];
    }
  });
}

Var mul(const Var& a, const Var& b) {
  require_same_shape(a, b, "mul");
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= b.value()[i];
  return make_result(std::move(out), {a, b}, [](Node& self) {
    Node& in_a = parent(self, 0);
    Node& in_b = parent(self, 1);
    if (in_a.requires_grad) {
      Tensor& g = in_a.grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * in_b.value[i];
    }
    if (in_b.requires_grad) {
      Tensor& g = in_b.grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * in_a.value[i];
    }
  });
}

Var scale(const Var& a, double c) {
  Tensor out = a.value();
  for (double& v : out.values()) v *= c;
  return make_result(std::move(out), {a}, [c](Node& self) {
    Tensor& g = parent(self, 0).grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += c * self.grad[i];
  });
}

Var matmul(const Var& a, const Var& b) {
  require_rank2(a, "matmul");
  require_rank2(b, "matmul");
  const std::size_t m = a.shape()[0], k = a.shape()[1], n = b.shape()[1];
  if (b.shape()[0] != k) {
    throw std::invalid_argument("matmul: inner extents differ " + shape_string(a.shape()) + " x " +
                                shape_string(b.shape()));
  }
  Tensor out({m, n}, 0.0);
  kernels::gemm_nn(a.value().data(), b.value().data(), out.data(), m, k, n);
  return make_result(std::move(out), {a, b}, [m, k, n](Node& self) {
    Node& in_a = parent(self, 0);
    Node& in_b = parent(self, 1);
    if (in_a.requires_grad) kernels::gemm_nt(self.grad.data(), in_b.value.data(), in_a.grad_buffer().data(), m, n, k);
    if (in_b.requires_grad) kernels::gemm_tn(in_a.value.data(), self.grad.data(), in_b.grad_buffer().data(), m, k, n);
  });
}

Var matmul_nt(const Var& a, const Var& b) {
  require_rank2(a, "matmul_nt");
  require_rank2(b, "matmul_nt");
  const std::size_t m = a.shape()[0], k = a.shape()[1], n = b.shape()[0];
  if (b.shape()[1] != k) {
    throw std::invalid_argument("matmul_nt: inner extents differ " + shape_string(a.shape()) + " x " +
                                shape_string(b.shape()) + "^T");
  }
  Tensor out({m, n}, 0.0);
  kernels::gemm_nt(a.value().data(), b.value().data(), out.data(), m, k, n);
  return make_result(std::move(out), {a, b}, [m, k, n](Node& self) {
    Node& in_a = parent(self, 0);
    Node& in_b = parent(self, 1);
    if (in_a.requires_grad) kernels::gemm_nn(self.grad.data(), in_b.value.data(), in_a.grad_buffer().data(), m, n, k);
    if (in_b.requires_grad) kernels::gemm_tn(self.grad.data(), in_a.value.data(), in_b.grad_buffer().data(), m, n, k);
  });
}

Var affine(const Var& x, const Var& weight, const Var& bias) {
  require_rank2(x, "affine");
  require_rank2(weight, "affine");
  const std::size_t m = x.shape()[0], in = x.shape()[1], out_dim = weight.shape()[0];
  if (weight.shape()[1] != in) {
    throw std::invalid_argument("affine: input width " + std::to_string(in) + " does not match weight " +
                                shape_string(weight.shape()));
  }
  const bool has_bias = bias.defined();
  if (has_bias && (bias.value().rank() != 1 || bias.value().size() != out_dim)) {
    throw std::invalid_argument("affine: bias shape " + shape_string(bias.shape()) + " does not match output width " +
                                std::to_string(out_dim));
  }
  Tensor out({m, out_dim}, 0.0);
  if (has_bias) {
    for (std::size_t r = 0; r < m; ++r)
      std::copy(bias.value().data(), bias.value().data() + out_dim, out.data() + r * out_dim);
  }
  kernels::gemm_nt(x.value().data(), weight.value().data(), out.data(), m, in, out_dim);
  std::vector<Var> inputs{x, weight};
  if (has_bias) inputs.push_back(bias);
  return make_result(std::move(out), std::move(inputs), [m, in, out_dim](Node& self) {
    Node& in_x = parent(self, 0);
    Node& in_w = parent(self, 1);
    if (in_x.requires_grad)
      kernels::gemm_nn(self.grad.data(), in_w.value.data(), in_x.grad_buffer().data(), m, out_dim, in);
    if (in_w.requires_grad)
      kernels::gemm_tn(self.grad.data(), in_x.value.data(), in_w.grad_buffer().data(), m, out_dim, in);
    if (self.parents.size() > 2) {
      Node& in_b = parent(self, 2);
      if (in_b.requires_grad) {
        Tensor& g = in_b.grad_buffer();
        for (std::size_t r = 0; r < m; ++r)
          for (std::size_t c = 0; c < out_dim; ++c) g[c] += self.grad[r * out_dim + c];
      }
    }
  });
}

Var gelu(const Var& x) {
  Tensor out = x.value();
  for (double& v : out.values()) v = 0.5 * v * (1.0 + std::erf(v * std::numbers::sqrt2 / 2.0));
  return make_result(std::move(out), {x}, [](Node& self) {
    Node& in = parent(self, 0);
    Tensor& g = in.grad_buffer();
    constexpr double inv_sqrt_2pi = 0.3989422804014327;
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double v = in.value[i];
      const double cdf = 0.5 * (1.0 + std::erf(v * std::numbers::sqrt2 / 2.0));
      const double pdf = inv_sqrt_2pi * std::exp(-0.5 * v * v);
      g[i] += self.grad[i] * (cdf + v * pdf);
    }
  });
}

Var exp(const Var& x) {
  Tensor out = x.value();
  for (double& v : out.values()) v = std::exp(v);
  return make_result(std::move(out), {x}, [](Node& self) {
    Tensor& g = parent(self, 0).grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * self.value[i];
  });
}

Var log(const Var& x) {
  Tensor out = x.value();
  for (double& v : out.values()) {
    if (!(v > 0.0)) throw std::domain_error("log of non-positive value");
    v = std::log(v);
  }
  return make_result(std::move(out), {x}, [](Node& self) {
    Node& in = parent(self, 0);
    Tensor& g = in.grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] / in.value[i];
  });
}

std::vector<double> log_softmax(std::span<const double> x) {
  if (x.empty()) throw std::invalid_argument("empty distribution");
  const double mx = *std::max_element(x.begin(), x.end());
  double s = 0.0;
  for (double v : x) s += std::exp(v - mx);
  const double lse = mx + std::log(s);
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] - lse;
  return out;
}

std::vector<double> softmax(std::span<const double> x) {
  std::vector<double> out = log_softmax(x);
  for (double& v : out) v = std::exp(v);
  return out;
}

Tensor log_softmax(const Tensor& x) {
  Tensor out = x;
  for (std::size_t r = 0; r < x.rows(); ++r) {
    auto row = log_softmax(x.row(r));
    std::copy(row.begin(), row.end(), out.row(r).begin());
  }
  return out;
}

Tensor softmax(const Tensor& x) {
  Tensor out = log_softmax(x);
  for (double& v : out.values()) v = std::exp(v);
  return out;
}

Var log_softmax(const Var& x) {
  Tensor out = log_softmax(x.value());
  return make_result(std::move(out), {x}, [](Node& self) {
    Tensor& g = parent(self, 0).grad_buffer();
    const std::size_t cols = self.value.cols();
    for (std::size_t r = 0; r < self.value.rows(); ++r) {
      const double* y = self.value.data() + r * cols;
      const double* gy = self.grad.data() + r * cols;
      double total = 0.0;
      for (std::size_t c = 0; c < cols; ++c) total += gy[c];
      double* gx = g.data() + r * cols;
      for (std::size_t c = 0; c < cols; ++c) gx[c] += gy[c] - std::exp(y[c]) * total;
    }
  });
}

Var softmax(const Var& x) {
  Tensor out = softmax(x.value());
  return make_result(std::move(out), {x}, [](Node& self) {
    Tensor& g = parent(self, 0).grad_buffer();
    const std::size_t cols = self.value.cols();
    for (std::size_t r = 0; r < self.value.rows(); ++r) {
      const double* s = self.value.data() + r * cols;
      const double* gy = self.grad.data() + r * cols;
      const double inner = kernels::dot(s, gy, cols);
      double* gx = g.data() + r * cols;
      for (std::size_t c = 0; c < cols; ++c) gx[c] += s[c] * (gy[c] - inner);
    }
  });
}

Var gather(const Var& x, std::span<const std::size_t> index) {
  const Tensor& xv = x.value();
  const std::size_t rows = xv.rows(), cols = xv.cols();
  if (index.size() != rows) {
    throw std::invalid_argument("gather: " + std::to_string(index.size()) + " indices for " + std::to_string(rows) +
                                " rows");
  }
  std::vector<std::size_t> idx(index.begin(), index.end());
  Tensor out({rows}, 0.0);
  for (std::size_t r = 0; r < rows; ++r) {
    if (idx[r] >= cols) {
      throw std::out_of_range("gather: index " + std::to_string(idx[r]) + " out of range for width " +
                              std::to_string(cols));
    }
    out[r] = xv[r * cols + idx[r]];
  }
  return make_result(std::move(out), {x}, [idx = std::move(idx), cols](Node& self) {
    Tensor& g = parent(self, 0).grad_buffer();
    for (std::size_t r = 0; r < idx.size(); ++r) g[r * cols + idx[r]] += self.grad[r];
  });
}

Var embedding(const Var& table, std::span<const std::size_t> ids) {
  require_rank2(table, "embedding");
  const std::size_t n = table.shape()[0], d = table.shape()[1];
  if (ids.empty()) throw std::invalid_argument("embedding: empty id list");
  std::vector<std::size_t> rows(ids.begin(), ids.end());
  Tensor out({rows.size(), d}, 0.0);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] >= n) {
      throw std::out_of_range("embedding: id " + std::to_string(rows[i]) + " out of range for table of " +
                              std::to_string(n) + " rows");
    }
    std::copy_n(table.value().data() + rows[i] * d, d, out.data() + i * d);
  }
  return make_result(std::move(out), {table}, [rows = std::move(rows), d](Node& self) {
    Tensor& g = parent(self, 0).grad_buffer();
    for (std::size_t i = 0; i < rows.size(); ++i) {
      double* dst = g.data() + rows[i] * d;
      const double* src = self.grad.data() + i * d;
      for (std::size_t c = 0; c < d; ++c) dst[c] += src[c];
    }
  });
}

Var sum(const Var& x) {
  double s = 0.0;
  for (double v : x.value().values()) s += v;
  return make_result(Tensor::scalar(s), {x}, [](Node& self) {
    Tensor& g = parent(self, 0).grad_buffer();
    const double gs = self.grad[0];
    for (double& v : g.values()) v += gs;
  });
}

Var mean(const Var& x) {
  const double n = static_cast<double>(x.value().size());
  double s = 0.0;
  for (double v : x.value().values()) s += v;
  return make_result(Tensor::scalar(s / n), {x}, [n](Node& self) {
    Tensor& g = parent(self, 0).grad_buffer();
    const double gs = self.grad[0] / n;
    for (double& v : g.values()) v += gs;
  });
}

Var stop_gradient(const Var& x) {
  auto node = std::make_shared<Node>();
  node->id = detail::next_node_id();
  node->detached = true;
  node->requires_grad = false;
  node->is_leaf = true;
  detail::DetachTape* tape = detail::active_detach_tape();
  if (tape && tape->replay) {
    if (tape->cursor >= tape->values.size() || tape->values[tape->cursor].shape() != x.shape()) {
      throw std::logic_error("stop_gradient replay out of step with the recorded pass");
    }
    node->value = tape->values[tape->cursor++];
  } else {
    node->value = x.value();
    if (tape) tape->values.push_back(x.value());
  }
  return Var(std::move(node));
}

Var concat_rows(const std::vector<Var>& parts) {
  if (parts.empty()) throw std::invalid_argument("concat_rows: no inputs");
  const std::size_t cols = parts.front().value().cols();
  std::size_t rows = 0;
  for (const Var& p : parts) {
    require_rank2(p, "concat_rows");
    if (p.value().cols() != cols) throw std::invalid_argument("concat_rows: column counts differ");
    rows += p.value().rows();
  }
  Tensor out({rows, cols}, 0.0);
  std::size_t offset = 0;
  for (const Var& p : parts) {
    std::copy(p.value().data(), p.value().data() + p.value().size(), out.data() + offset);
    offset += p.value().size();
  }
  return make_result(std::move(out), parts, [](Node& self) {
    std::size_t offset = 0;
    for (auto& pp : self.parents) {
      const std::size_t n = pp->value.size();
      if (pp->requires_grad) {
        Tensor& g = pp->grad_buffer();
        for (std::size_t i = 0; i < n; ++i) g[i] += self.grad[offset + i];
      }
      offset += n;
    }
  });
}

Var concat_cols(const std::vector<Var>& parts) {
  if (parts.empty()) throw std::invalid_argument("concat_cols: no inputs");
  const std::size_t rows = parts.front().value().rows();
  std::size_t cols = 0;
  for (const Var& p : parts) {
    require_rank2(p, "concat_cols");
    if (p.value().rows() != rows) throw std::invalid_argument("concat_cols: row counts differ");
    cols += p.value().cols();
  }
  Tensor out({rows, cols}, 0.0);
  std::size_t c0 = 0;
  for (const Var& p : parts) {
    const std::size_t w = p.value().cols();
    for (std::size_t r = 0; r < rows; ++r) std::copy_n(p.value().data() + r * w, w, out.data() + r * cols + c0);
    c0 += w;
  }
  return make_result(std::move(out), parts, [rows, cols](Node& self) {
    std::size_t c0 = 0;
    for (auto& pp : self.parents) {
      const std::size_t w = pp->value.cols();
      if (pp->requires_grad) {
        Tensor& g = pp->grad_buffer();
        for (std::size_t r = 0; r < rows; ++r)
          for (std::size_t c = 0; c < w; ++c) g[r * w + c] += self.grad[r * cols + c0 + c];
      }
      c0 += w;
    }
  });
}

Var slice_rows(const Var& x, std::size_t begin, std::size_t end) {
  require_rank2(x, "slice_rows");
  const std::size_t cols = x.value().cols();
  if (begin >= end || end > x.value().rows()) {
    throw std::out_of_range("slice_rows: [" + std::to_string(begin) + ", " + std::to_string(end) +
                            ") outside " + shape_string(x.shape()));
  }
  Tensor out({end - begin, cols}, 0.0);
  std::copy(x.value().data() + begin * cols, x.value().data() + end * cols, out.data());
  return make_result(std::move(out), {x}, [begin, cols](Node& self) {
    Tensor& g = parent(self, 0).grad_buffer();
    double* dst = g.data() + begin * cols;
    for (std::size_t i = 0; i < self.grad.size(); ++i) dst[i] += self.grad[i];
  });
}

Var slice_cols(const Var& x, std::size_t begin, std::size_t end) {
  require_rank2(x, "slice_cols");
  const std::size_t rows = x.value().rows(), cols = x.value().cols();
  if (begin >= end || end > cols) {
    throw std::out_of_range("slice_cols: [" + std::to_string(begin) + ", " + std::to_string(end) +
                            ") outside " + shape_string(x.shape()));
  }
  const std::size_t w = end - begin;
  Tensor out({rows, w}, 0.0);
  for (std::size_t r = 0; r < rows; ++r) std::copy_n(x.value().data() + r * cols + begin, w, out.data() + r * w);
  return make_result(std::move(out), {x}, [begin, w, rows, cols](Node& self) {
    Tensor& g = parent(self, 0).grad_buffer();
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t c = 0; c < w; ++c) g[r * cols + begin + c] += self.grad[r * w + c];
  });
}

Var causal_mask(const Var& scores) {
  require_rank2(scores, "causal_mask");
  const std::size_t n = scores.shape()[0];
  if (scores.shape()[1] != n) throw std::invalid_argument("causal_mask expects a square matrix");
  Tensor out = scores.value();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) out[i * n + j] = kMaskedScore;
  return make_result(std::move(out), {scores}, [n](Node& self) {
    Tensor& g = parent(self, 0).grad_buffer();
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j <= i; ++j) g[i * n + j] += self.grad[i * n + j];
  });
}

}  // namespace vitask::numerics
