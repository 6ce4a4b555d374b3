#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "vitask/data/types.hpp"

namespace vitask::data {

/// Reads `sample_id,dataset_id,label,f0,...,f{D-1}`. Errors carry the file
/// name and 1-based line number. When `known_datasets` is non-empty, rows
/// naming other datasets and out-of-range labels are rejected.
std::vector<ClassificationSample> load_feature_table(const std::filesystem::path& path,
                                                     const std::vector<DatasetInfo>& known_datasets = {});

/// Shortest round-trip decimal form, so a reload is bit-exact.
void save_feature_table(const std::filesystem::path& path, const std::vector<ClassificationSample>& samples);

std::string format_double(double v);
/// Strict parse of a whole field; throws std::invalid_argument otherwise.
double parse_double(std::string_view text);

}  // namespace vitask::data
