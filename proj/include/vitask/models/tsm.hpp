#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "vitask/data/types.hpp"
#include "vitask/numerics/autograd.hpp"

namespace vitask::models {

using numerics::Tensor;
using numerics::Var;

/// Contiguous block of the joint head owned by one dataset.
struct ClassRange {
  std::string dataset_id;
  std::size_t begin = 0;
  std::size_t count = 0;
};

/// Two-layer classifier D -> d_t (GELU) -> C_total with one head block per
/// dataset. The hidden activation is the exemplar feature space.
class TsmModel {
 public:
  TsmModel() = default;
  TsmModel(std::size_t input_dim, std::size_t hidden_dim, std::vector<ClassRange> ranges, std::uint64_t seed);

  std::size_t input_dim() const { return w1.shape()[1]; }
  std::size_t hidden_dim() const { return w1.shape()[0]; }
  std::size_t total_classes() const { return w2.shape()[0]; }
  const std::vector<ClassRange>& ranges() const noexcept { return ranges_; }
  const ClassRange& range_of(const std::string& dataset_id) const;

  /// x: [n, D] -> [n, d_t]
  Var hidden(const Var& x) const;
  /// x: [n, D] -> [n, C_total]
  Var logits(const Var& x) const;

  /// Arg-max inside the dataset's block, as a dataset-local label.
  std::size_t predict(const std::vector<double>& features, const std::string& dataset_id) const;

  std::vector<Var> parameters() const { return {w1, b1, w2, b2}; }
  /// Deep copy with fresh parameter nodes.
  TsmModel clone() const;
  /// FNV-1a over dimensions, ranges and parameter bytes.
  std::uint64_t hash() const;

  Var w1, b1, w2, b2;

 private:
  std::vector<ClassRange> ranges_;
};

/// Class ranges laid out in dataset order.
std::vector<ClassRange> make_class_ranges(const std::vector<data::DatasetInfo>& datasets);

struct TsmConfig {
  std::size_t hidden_dim = 32;
  std::size_t epochs = 40;
  std::size_t batch_size = 32;
  double learning_rate = 1e-2;
  std::uint64_t seed = 0;
};

/// Minibatch Adam on the per-dataset masked cross-entropy: each sample's
/// softmax runs over its own dataset's block only. Returns the epoch with
/// the best validation macro-F1 (ties keep the earlier epoch). `init`
/// warm-starts from an existing model with the same layout.
TsmModel train_tsm(const std::vector<data::ClassificationSample>& train,
                   const std::vector<data::ClassificationSample>& val, const std::vector<data::DatasetInfo>& datasets,
                   const TsmConfig& config, const TsmModel* init = nullptr);

/// Masked cross-entropy of a batch (mean over samples).
Var tsm_masked_loss(const TsmModel& tsm, const std::vector<const data::ClassificationSample*>& batch);

/// Macro-F1 of the TSM's predictions over `samples`, averaged per dataset.
double tsm_macro_f1(const TsmModel& tsm, const std::vector<data::ClassificationSample>& samples,
                    const std::vector<data::DatasetInfo>& datasets);

/// cls: [d_t] hidden activation on the full feature vector.
/// patches: [P, d_t] hidden activations on P contiguous feature chunks, each
/// evaluated with the other chunks zeroed.
struct ExemplarFeatures {
  Tensor cls;
  Tensor patches;
};

ExemplarFeatures extract_exemplar(const TsmModel& tsm, const std::vector<double>& features, std::size_t patches);

}  // namespace vitask::models
