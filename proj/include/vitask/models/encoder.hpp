#pragma once

#include <cstdint>
#include <span>

#include "vitask/numerics/tensor.hpp"

namespace vitask::models {

using numerics::Tensor;

/// Fixed random projection standing in for a frozen vision encoder. The
/// feature vector is mapped to P patch embeddings of width d_v; the pooled
/// embedding is their mean. There is no bias, so zero maps to zero.
class FrozenEncoder {
 public:
  FrozenEncoder() = default;
  FrozenEncoder(std::size_t input_dim, std::size_t patches, std::size_t patch_dim, std::uint64_t seed);
  /// Wraps an explicit [patches * patch_dim, input_dim] projection.
  FrozenEncoder(Tensor projection, std::size_t patches);

  std::size_t input_dim() const noexcept { return projection_.cols(); }
  std::size_t patches() const noexcept { return patches_; }
  std::size_t patch_dim() const noexcept { return projection_.rows() / patches_; }
  const Tensor& projection() const noexcept { return projection_; }

  /// [P, d_v]
  Tensor patch_embeddings(std::span<const double> features) const;
  /// [d_v]
  Tensor pooled(std::span<const double> features) const;

 private:
  Tensor projection_;
  std::size_t patches_ = 1;
};

}  // namespace vitask::models
