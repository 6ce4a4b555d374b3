#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

namespace vitask::evaluation {

/// Prediction value for a generated response that names no class.
inline constexpr std::size_t kReject = std::numeric_limits<std::size_t>::max();

struct ClassMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t support = 0;
};

struct MetricsReport {
  std::string method;
  std::uint64_t seed = 0;
  bool ep_used = false;
  double accuracy = 0.0;
  double macro_f1 = 0.0;
  double reject_rate = 0.0;
  std::size_t n_samples = 0;
  std::vector<ClassMetrics> per_class;
};

/// Accuracy and macro-F1. REJECT is wrong and a false negative for the true
/// class. Undefined precision, recall or F1 (zero denominators) count as 0,
/// including classes absent from both predictions and labels.
MetricsReport compute_metrics(std::span<const std::size_t> preds, std::span<const std::size_t> labels,
                              std::size_t n_classes);

}  // namespace vitask::evaluation
