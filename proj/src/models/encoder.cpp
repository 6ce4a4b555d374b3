#include "vitask/models/encoder.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "vitask/numerics/kernels.hpp"
#include "vitask/numerics/random.hpp"

namespace vitask::models {

namespace {
constexpr std::uint64_t kEncoderStream = 0x454e43;
}

FrozenEncoder::FrozenEncoder(std::size_t input_dim, std::size_t patches, std::size_t patch_dim, std::uint64_t seed)
    : patches_(patches) {
  if (input_dim == 0 || patches == 0 || patch_dim == 0) throw std::invalid_argument("encoder dimensions must be positive");
  auto rng = numerics::make_rng(seed, kEncoderStream);
  projection_ = numerics::gaussian({patches * patch_dim, input_dim}, 1.0 / std::sqrt(static_cast<double>(input_dim)), rng);
}

FrozenEncoder::FrozenEncoder(Tensor projection, std::size_t patches) : projection_(std::move(projection)), patches_(patches) {
  if (projection_.rank() != 2 || patches == 0 || projection_.rows() % patches != 0) {
    throw std::invalid_argument("encoder projection rows must be a multiple of the patch count");
  }
}

Tensor FrozenEncoder::patch_embeddings(std::span<const double> features) const {
  if (features.size() != input_dim()) {
    throw std::invalid_argument("encoder expects " + std::to_string(input_dim()) + " features, got " +
                                std::to_string(features.size()));
  }
  Tensor out({patches_, patch_dim()}, 0.0);
  for (std::size_t r = 0; r < projection_.rows(); ++r) {
    out[r] = numerics::kernels::dot(projection_.row(r).data(), features.data(), features.size());
  }
  return out;
}

Tensor FrozenEncoder::pooled(std::span<const double> features) const {
  const Tensor patches = patch_embeddings(features);
  Tensor out({patch_dim()}, 0.0);
  for (std::size_t p = 0; p < patches_; ++p) {
    for (std::size_t j = 0; j < patch_dim(); ++j) out[j] += patches.at(p, j);
  }
  for (double& v : out.values()) v /= static_cast<double>(patches_);
  return out;
}

}  // namespace vitask::models
