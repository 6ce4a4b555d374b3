#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "vitask/data/types.hpp"

namespace vitask::data {

/// Class-conditional Gaussian clusters. Class k has mean `separation * e_k`
/// over the first `classes` axes; the trailing `noise_dims` axes carry pure
/// N(0, 1) noise, so `dims` must equal `classes + noise_dims`. Labels are
/// interleaved (sample i has label i % classes).
std::vector<ClassificationSample> generate_synthetic_task(std::size_t classes, std::size_t dims,
                                                          std::size_t n_per_class, double separation,
                                                          std::size_t noise_dims, std::uint64_t seed,
                                                          const std::string& dataset_id = "task");

/// Random direction over the class axes scaled to `magnitude`.
std::vector<double> random_mean_shift(std::size_t dims, std::size_t classes, double magnitude, std::uint64_t seed);

/// Adds `shift` to every feature vector.
void apply_mean_shift(std::vector<ClassificationSample>& samples, std::span<const double> shift);

/// The seven-class dermatoscopy task used throughout the toy experiments.
DatasetInfo dermatology_dataset();

/// Built-in dataset descriptions keyed by id.
const std::vector<DatasetInfo>& builtin_datasets();
const DatasetInfo& find_dataset(const std::string& dataset_id);

}  // namespace vitask::data
