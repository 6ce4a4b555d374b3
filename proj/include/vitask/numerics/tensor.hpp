#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace vitask::numerics {

using Shape = std::vector<std::size_t>;

/// Dense row-major tensor of 64-bit floats. Every extent is positive.
///
/// Most of the library only needs rank 1 and rank 2; `rows()` collapses all
/// leading axes so row-wise kernels work for any rank.
class Tensor {
 public:
  Tensor();
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> values);

  static Tensor scalar(double value);
  static Tensor vector(std::vector<double> values);
  static Tensor matrix(std::size_t rows, std::size_t cols, std::vector<double> values);

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t size() const noexcept { return values_.size(); }
  std::size_t cols() const noexcept { return shape_.back(); }
  std::size_t rows() const noexcept { return values_.size() / shape_.back(); }

  std::span<double> values() noexcept { return values_; }
  std::span<const double> values() const noexcept { return values_; }
  double* data() noexcept { return values_.data(); }
  const double* data() const noexcept { return values_.data(); }

  double& operator[](std::size_t i) { return values_[i]; }
  double operator[](std::size_t i) const { return values_[i]; }
  double& at(std::size_t r, std::size_t c) { return values_[r * cols() + c]; }
  double at(std::size_t r, std::size_t c) const { return values_[r * cols() + c]; }

  std::span<double> row(std::size_t r) { return {values_.data() + r * cols(), cols()}; }
  std::span<const double> row(std::size_t r) const { return {values_.data() + r * cols(), cols()}; }

  /// Value of a single-element tensor.
  double item() const;
  bool all_finite() const noexcept;
  bool is_scalar() const noexcept { return values_.size() == 1; }

  void fill(double v);

  friend bool operator==(const Tensor& a, const Tensor& b) {
    return a.shape_ == b.shape_ && a.values_ == b.values_;
  }

 private:
  Shape shape_;
  std::vector<double> values_;
};

std::string shape_string(const Shape& shape);
std::size_t shape_size(const Shape& shape);

/// Bitwise equality, distinguishing -0.0 from 0.0 and matching NaN payloads.
bool bit_identical(const Tensor& a, const Tensor& b);

}  // namespace vitask::numerics
