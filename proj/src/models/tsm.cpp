#include "vitask/models/tsm.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "vitask/data/vocabulary.hpp"
#include "vitask/evaluation/metrics.hpp"
#include "vitask/numerics/ops.hpp"
#include "vitask/numerics/random.hpp"
#include "vitask/pipeline/optimizer.hpp"

namespace vitask::models {

namespace ops = numerics;

namespace {
constexpr std::uint64_t kInitStream = 0x54534d49;
constexpr std::uint64_t kShuffleStream = 0x54534d53;

Var features_matrix(const std::vector<const data::ClassificationSample*>& batch, std::size_t dims) {
  Tensor x({batch.size(), dims}, 0.0);
  for (std::size_t i = 0; i < batch.size(); ++i) {
    if (batch[i]->features.size() != dims) throw std::invalid_argument("TSM: feature dimension mismatch");
    std::copy(batch[i]->features.begin(), batch[i]->features.end(), x.row(i).begin());
  }
  return Var::constant(std::move(x));
}

Var fresh(const Tensor& t) {
  Var v = Var::parameter(t);
  return v;
}
}  // namespace

TsmModel::TsmModel(std::size_t input_dim, std::size_t hidden_dim, std::vector<ClassRange> ranges, std::uint64_t seed)
    : ranges_(std::move(ranges)) {
  if (ranges_.empty()) throw std::invalid_argument("TSM needs at least one dataset");
  std::size_t total = 0;
  for (const ClassRange& r : ranges_) {
    if (r.begin != total || r.count == 0) throw std::invalid_argument("TSM class ranges must tile [0, C_total)");
    total += r.count;
  }
  auto rng = numerics::make_rng(seed, kInitStream);
  w1 = Var::parameter(numerics::gaussian({hidden_dim, input_dim}, 1.0 / std::sqrt(static_cast<double>(input_dim)), rng));
  b1 = Var::parameter(Tensor({hidden_dim}, 0.0));
  w2 = Var::parameter(numerics::gaussian({total, hidden_dim}, 1.0 / std::sqrt(static_cast<double>(hidden_dim)), rng));
  b2 = Var::parameter(Tensor({total}, 0.0));
}

const ClassRange& TsmModel::range_of(const std::string& dataset_id) const {
  for (const ClassRange& r : ranges_) {
    if (r.dataset_id == dataset_id) return r;
  }
  throw std::out_of_range("TSM has no head for dataset '" + dataset_id + "'");
}

Var TsmModel::hidden(const Var& x) const { return ops::gelu(ops::affine(x, w1, b1)); }

Var TsmModel::logits(const Var& x) const { return ops::affine(hidden(x), w2, b2); }

std::size_t TsmModel::predict(const std::vector<double>& features, const std::string& dataset_id) const {
  const ClassRange& range = range_of(dataset_id);
  numerics::NoGradGuard no_grad;
  data::ClassificationSample s{"", features, dataset_id, 0};
  const Tensor z = logits(features_matrix({&s}, input_dim())).value();
  std::size_t best = 0;
  for (std::size_t c = 1; c < range.count; ++c) {
    if (z[range.begin + c] > z[range.begin + best]) best = c;
  }
  return best;
}

TsmModel TsmModel::clone() const {
  TsmModel out;
  out.ranges_ = ranges_;
  out.w1 = fresh(w1.value());
  out.b1 = fresh(b1.value());
  out.w2 = fresh(w2.value());
  out.b2 = fresh(b2.value());
  return out;
}

std::uint64_t TsmModel::hash() const {
  std::string bytes;
  for (const ClassRange& r : ranges_) bytes += r.dataset_id + ":" + std::to_string(r.begin) + ":" + std::to_string(r.count) + ";";
  for (const Var& p : parameters()) {
    bytes += numerics::shape_string(p.shape());
    const auto values = p.value().values();
    bytes.append(reinterpret_cast<const char*>(values.data()), values.size() * sizeof(double));
  }
  return data::fnv1a(bytes);
}

std::vector<ClassRange> make_class_ranges(const std::vector<data::DatasetInfo>& datasets) {
  std::vector<ClassRange> ranges;
  std::size_t begin = 0;
  for (const data::DatasetInfo& d : datasets) {
    ranges.push_back({d.dataset_id, begin, d.class_names.size()});
    begin += d.class_names.size();
  }
  return ranges;
}

Var tsm_masked_loss(const TsmModel& tsm, const std::vector<const data::ClassificationSample*>& batch) {
  if (batch.empty()) throw std::invalid_argument("TSM: empty batch");
  const Var z = tsm.logits(features_matrix(batch, tsm.input_dim()));
  Var total;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const ClassRange& range = tsm.range_of(batch[i]->dataset_id);
    if (batch[i]->label >= range.count) throw std::out_of_range("TSM: label outside its dataset's range");
    const Var block = ops::slice_cols(ops::slice_rows(z, i, i + 1), range.begin, range.begin + range.count);
    const std::size_t target = batch[i]->label;
    const Var term = ops::sum(ops::gather(ops::log_softmax(block), std::span<const std::size_t>(&target, 1)));
    total = total.defined() ? ops::add(total, term) : term;
  }
  return ops::scale(total, -1.0 / static_cast<double>(batch.size()));
}

double tsm_macro_f1(const TsmModel& tsm, const std::vector<data::ClassificationSample>& samples,
                    const std::vector<data::DatasetInfo>& datasets) {
  double total = 0.0;
  std::size_t counted = 0;
  for (const data::DatasetInfo& d : datasets) {
    std::vector<std::size_t> preds, labels;
    for (const data::ClassificationSample& s : samples) {
      if (s.dataset_id != d.dataset_id) continue;
      preds.push_back(tsm.predict(s.features, d.dataset_id));
      labels.push_back(s.label);
    }
    if (preds.empty()) continue;
    total += evaluation::compute_metrics(preds, labels, d.class_names.size()).macro_f1;
    ++counted;
  }
  if (counted == 0) throw std::invalid_argument("TSM: no samples to evaluate");
  return total / static_cast<double>(counted);
}

TsmModel train_tsm(const std::vector<data::ClassificationSample>& train,
                   const std::vector<data::ClassificationSample>& val, const std::vector<data::DatasetInfo>& datasets,
                   const TsmConfig& config, const TsmModel* init) {
  if (train.empty()) throw std::invalid_argument("TSM: empty training set");
  if (config.batch_size == 0) throw std::invalid_argument("TSM: batch size must be positive");
  const std::size_t dims = train.front().features.size();
  TsmModel model = init ? init->clone() : TsmModel(dims, config.hidden_dim, make_class_ranges(datasets), config.seed);
  if (model.input_dim() != dims) throw std::invalid_argument("TSM: initial model expects a different input dimension");
  for (const data::DatasetInfo& d : datasets) {
    if (model.range_of(d.dataset_id).count != d.class_names.size()) {
      throw std::invalid_argument("TSM: class count mismatch for dataset " + d.dataset_id);
    }
  }

  const std::vector<data::ClassificationSample>& selection = val.empty() ? train : val;
  TsmModel best = model.clone();
  double best_f1 = tsm_macro_f1(model, selection, datasets);

  auto rng = numerics::make_rng(config.seed, kShuffleStream);
  pipeline::AdamState state;
  pipeline::AdamConfig adam;
  adam.learning_rate = config.learning_rate;
  const std::vector<Var> params = model.parameters();
  std::vector<std::size_t> order(train.size());
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      std::vector<const data::ClassificationSample*> batch;
      for (std::size_t i = start; i < std::min(order.size(), start + config.batch_size); ++i) batch.push_back(&train[order[i]]);
      const Var loss = tsm_masked_loss(model, batch);
      if (!std::isfinite(loss.value().item())) throw std::domain_error("TSM: non-finite loss in epoch " + std::to_string(epoch));
      const numerics::GradientMap grads = numerics::backward(loss, params);
      std::vector<Tensor> g;
      for (const Var& p : params) g.push_back(numerics::gradient_of(grads, p));
      pipeline::optimizer_step(params, g, state, adam);
    }
    const double f1 = tsm_macro_f1(model, selection, datasets);
    if (f1 > best_f1) {
      best_f1 = f1;
      best = model.clone();
    }
  }
  return best;
}

ExemplarFeatures extract_exemplar(const TsmModel& tsm, const std::vector<double>& features, std::size_t patches) {
  const std::size_t dims = tsm.input_dim();
  if (features.size() != dims) throw std::invalid_argument("exemplar: feature dimension mismatch");
  if (patches == 0 || patches > dims) throw std::invalid_argument("exemplar: invalid patch count");
  numerics::NoGradGuard no_grad;
  Tensor x({patches + 1, dims}, 0.0);
  std::copy(features.begin(), features.end(), x.row(0).begin());
  for (std::size_t p = 0; p < patches; ++p) {
    const std::size_t begin = p * dims / patches;
    const std::size_t end = (p + 1) * dims / patches;
    for (std::size_t d = begin; d < end; ++d) x.at(p + 1, d) = features[d];
  }
  const Tensor h = tsm.hidden(Var::constant(std::move(x))).value();
  ExemplarFeatures out;
  out.cls = Tensor({h.cols()}, std::vector<double>(h.row(0).begin(), h.row(0).end()));
  out.patches = Tensor({patches, h.cols()}, std::vector<double>(h.values().begin() + static_cast<std::ptrdiff_t>(h.cols()),
                                                              h.values().end()));
  return out;
}

}  // namespace vitask::models
