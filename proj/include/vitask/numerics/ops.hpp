#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "vitask/numerics/autograd.hpp"

namespace vitask::numerics {

// Differentiable operators. Matrix operators take rank-2 inputs; row-wise
// operators (softmax family, gather) treat the last axis as the row.

Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var scale(const Var& a, double c);

/// [m,k] x [k,n] -> [m,n]
Var matmul(const Var& a, const Var& b);
/// [m,k] x [n,k]^T -> [m,n]
Var matmul_nt(const Var& a, const Var& b);
/// x [m,in], weight [out,in], optional bias [out] -> x weight^T + bias
Var affine(const Var& x, const Var& weight, const Var& bias = Var());

Var gelu(const Var& x);
Var exp(const Var& x);
/// Natural log; inputs must be positive.
Var log(const Var& x);

Var log_softmax(const Var& x);
Var softmax(const Var& x);

/// Picks x[r, index[r]] for each row r -> [rows]
Var gather(const Var& x, std::span<const std::size_t> index);
/// Row lookup into a table [n,d] -> [ids.size(), d]
Var embedding(const Var& table, std::span<const std::size_t> ids);

Var sum(const Var& x);
Var mean(const Var& x);

/// Forward identity, backward zero.
Var stop_gradient(const Var& x);

Var concat_rows(const std::vector<Var>& parts);
Var concat_cols(const std::vector<Var>& parts);
Var slice_rows(const Var& x, std::size_t begin, std::size_t end);
Var slice_cols(const Var& x, std::size_t begin, std::size_t end);

/// Square score matrix with entries above the diagonal replaced by a large
/// negative constant, so softmax assigns them exactly zero weight.
Var causal_mask(const Var& scores);

// Plain-tensor helpers shared with oracles and evaluation code.

/// log(exp(x_i) / sum_j exp(x_j)) with max subtraction. Throws
/// std::invalid_argument("empty distribution") on an empty input.
std::vector<double> log_softmax(std::span<const double> x);
std::vector<double> softmax(std::span<const double> x);
Tensor log_softmax(const Tensor& x);
Tensor softmax(const Tensor& x);

inline constexpr double kMaskedScore = -1.0e30;

}  // namespace vitask::numerics
