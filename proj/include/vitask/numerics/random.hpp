#pragma once

#include <cstdint>
#include <random>
#include <string>

#include "vitask/numerics/tensor.hpp"

namespace vitask::numerics {

using Rng = std::mt19937_64;

/// Independent generator for (seed, stream). Streams let one run seed keep
/// shuffling, negative sampling and initialisation decoupled.
Rng make_rng(std::uint64_t seed, std::uint64_t stream);

std::string save_rng(const Rng& rng);
Rng load_rng(const std::string& state);

Tensor gaussian(Shape shape, double stddev, Rng& rng);

}  // namespace vitask::numerics
