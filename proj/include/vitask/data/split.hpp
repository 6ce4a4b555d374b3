#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "vitask/data/types.hpp"

namespace vitask::data {

struct DatasetSplit {
  std::vector<ClassificationSample> train;
  std::vector<ClassificationSample> val;
  std::vector<ClassificationSample> test;
};

inline constexpr std::array<double, 3> kDefaultSplitRatios = {0.70, 0.10, 0.20};

/// Stratified train/val/test split. Split sizes follow largest-remainder
/// rounding of N * ratio; each class contributes floor or ceil of its ideal
/// share to every split. Samples keep their input order within a split.
DatasetSplit split_dataset(const std::vector<ClassificationSample>& samples,
                           std::array<double, 3> ratios = kDefaultSplitRatios, std::uint64_t seed = 0);

}  // namespace vitask::data
