#include "vitask/data/synthetic.hpp"

#include <cmath>
#include <cstdio>
#include <random>
#include <stdexcept>

#include "vitask/numerics/random.hpp"

namespace vitask::data {

namespace {
constexpr std::uint64_t kSampleStream = 0x5a4d504c;
constexpr std::uint64_t kShiftStream = 0x53484654;

std::string sample_name(const std::string& dataset_id, std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "-%05zu", i);
  return dataset_id + buf;
}
}  // namespace

std::vector<ClassificationSample> generate_synthetic_task(std::size_t classes, std::size_t dims,
                                                          std::size_t n_per_class, double separation,
                                                          std::size_t noise_dims, std::uint64_t seed,
                                                          const std::string& dataset_id) {
  if (classes < 2) throw std::invalid_argument("synthetic task needs at least 2 classes");
  if (dims < classes) throw std::invalid_argument("synthetic task needs dims >= classes");
  if (classes + noise_dims != dims) {
    throw std::invalid_argument("synthetic task: dims (" + std::to_string(dims) + ") must equal classes + noise_dims (" +
                                std::to_string(classes + noise_dims) + ")");
  }
  if (n_per_class == 0) throw std::invalid_argument("synthetic task needs at least one sample per class");
  if (!(separation >= 0.0) || !std::isfinite(separation)) {
    throw std::invalid_argument("synthetic task: separation must be finite and non-negative");
  }
  if (dataset_id.empty()) throw std::invalid_argument("synthetic task: empty dataset id");

  auto rng = numerics::make_rng(seed, kSampleStream);
  std::normal_distribution<double> unit(0.0, 1.0);
  std::vector<ClassificationSample> out;
  out.reserve(classes * n_per_class);
  for (std::size_t i = 0; i < classes * n_per_class; ++i) {
    ClassificationSample s;
    s.sample_id = sample_name(dataset_id, i);
    s.dataset_id = dataset_id;
    s.label = i % classes;
    s.features.resize(dims);
    for (std::size_t d = 0; d < dims; ++d) s.features[d] = unit(rng);
    s.features[s.label] += separation;
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<double> random_mean_shift(std::size_t dims, std::size_t classes, double magnitude, std::uint64_t seed) {
  if (classes > dims) throw std::invalid_argument("mean shift: classes exceed dims");
  auto rng = numerics::make_rng(seed, kShiftStream);
  std::normal_distribution<double> unit(0.0, 1.0);
  std::vector<double> shift(dims, 0.0);
  double norm = 0.0;
  for (std::size_t d = 0; d < classes; ++d) {
    shift[d] = unit(rng);
    norm += shift[d] * shift[d];
  }
  norm = std::sqrt(norm);
  for (std::size_t d = 0; d < classes; ++d) shift[d] *= magnitude / norm;
  return shift;
}

void apply_mean_shift(std::vector<ClassificationSample>& samples, std::span<const double> shift) {
  for (ClassificationSample& s : samples) {
    if (s.features.size() != shift.size()) throw std::invalid_argument("mean shift: dimension mismatch");
    for (std::size_t d = 0; d < shift.size(); ++d) s.features[d] += shift[d];
  }
}

const std::vector<DatasetInfo>& builtin_datasets() {
  static const std::vector<DatasetInfo> datasets = {
      {"derma",
       "dermatoscope",
       {"actinic keratoses", "basal cell carcinoma", "benign keratosis-like lesions", "dermatofibroma", "melanoma",
        "melanocytic nevi", "vascular lesions"}},
      {"oct", "retinal oct", {"choroidal neovascularization", "diabetic macular edema", "drusen", "normal"}},
      {"pneumonia", "chest x-ray", {"normal", "pneumonia"}},
      {"breast", "breast ultrasound", {"malignant", "normal or benign"}},
      {"retina",
       "retina fundus",
       {"no retinopathy", "mild retinopathy", "moderate retinopathy", "severe retinopathy",
        "proliferative retinopathy"}},
      {"blood",
       "blood cell microscope",
       {"basophil", "eosinophil", "erythroblast", "immature granulocytes", "lymphocyte", "monocyte", "neutrophil",
        "platelet"}},
  };
  return datasets;
}

const DatasetInfo& find_dataset(const std::string& dataset_id) {
  for (const DatasetInfo& d : builtin_datasets()) {
    if (d.dataset_id == dataset_id) return d;
  }
  throw std::out_of_range("unknown dataset_id '" + dataset_id + "'");
}

DatasetInfo dermatology_dataset() { return find_dataset("derma"); }

}  // namespace vitask::data
