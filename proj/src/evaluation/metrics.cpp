#include "vitask/evaluation/metrics.hpp"

#include <stdexcept>

namespace vitask::evaluation {

MetricsReport compute_metrics(std::span<const std::size_t> preds, std::span<const std::size_t> labels,
                              std::size_t n_classes) {
  if (preds.empty()) throw std::invalid_argument("metrics: empty input");
  if (preds.size() != labels.size()) throw std::invalid_argument("metrics: prediction/label length mismatch");
  if (n_classes == 0) throw std::invalid_argument("metrics: no classes");

  std::vector<std::size_t> tp(n_classes, 0), predicted(n_classes, 0), actual(n_classes, 0);
  std::size_t correct = 0, rejects = 0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    if (labels[i] >= n_classes) throw std::out_of_range("metrics: label outside class range");
    ++actual[labels[i]];
    if (preds[i] == kReject) {
      ++rejects;
      continue;
    }
    if (preds[i] >= n_classes) throw std::out_of_range("metrics: prediction outside class range");
    ++predicted[preds[i]];
    if (preds[i] == labels[i]) {
      ++tp[labels[i]];
      ++correct;
    }
  }

  MetricsReport r;
  const double n = static_cast<double>(preds.size());
  r.n_samples = preds.size();
  r.accuracy = static_cast<double>(correct) / n;
  r.reject_rate = static_cast<double>(rejects) / n;
  r.per_class.resize(n_classes);
  double f1_sum = 0.0;
  for (std::size_t c = 0; c < n_classes; ++c) {
    ClassMetrics& m = r.per_class[c];
    m.support = actual[c];
    m.precision = predicted[c] ? static_cast<double>(tp[c]) / static_cast<double>(predicted[c]) : 0.0;
    m.recall = actual[c] ? static_cast<double>(tp[c]) / static_cast<double>(actual[c]) : 0.0;
    m.f1 = (m.precision + m.recall) > 0.0 ? 2.0 * m.precision * m.recall / (m.precision + m.recall) : 0.0;
    f1_sum += m.f1;
  }
  r.macro_f1 = f1_sum / static_cast<double>(n_classes);
  return r;
}

}  // namespace vitask::evaluation
