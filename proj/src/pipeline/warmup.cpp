#include "vitask/pipeline/warmup.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>

#include "vitask/data/synthetic.hpp"
#include "vitask/models/vlm.hpp"
#include "vitask/numerics/ops.hpp"
#include "vitask/numerics/random.hpp"
#include "vitask/objectives/losses.hpp"
#include "vitask/pipeline/optimizer.hpp"

namespace vitask::pipeline {

namespace {
constexpr std::uint64_t kCorpusStream = 0x57435250;
constexpr std::uint64_t kShuffleStream = 0x57534846;
}  // namespace

std::vector<data::InstructionRecord> make_warmup_corpus(const data::Vocabulary& vocab,
                                                        const data::InstructionTemplate& tmpl,
                                                        const std::vector<data::DatasetInfo>& datasets,
                                                        std::size_t records, double no_list_fraction,
                                                        double hint_fraction, std::size_t input_dim,
                                                        std::uint64_t seed) {
  if (datasets.empty()) throw std::invalid_argument("warm-up corpus needs at least one dataset");
  auto rng = numerics::make_rng(seed, kCorpusStream);
  std::uniform_int_distribution<std::size_t> pick_dataset(0, datasets.size() - 1);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> noise(0.0, 1.0);

  std::vector<data::InstructionRecord> out;
  out.reserve(records);
  for (std::size_t i = 0; i < records; ++i) {
    const data::DatasetInfo& info = datasets[pick_dataset(rng)];
    const bool with_list = unit(rng) >= no_list_fraction;
    std::vector<std::size_t> classes(info.class_names.size());
    std::iota(classes.begin(), classes.end(), 0);
    std::shuffle(classes.begin(), classes.end(), rng);
    std::size_t listed = classes.size();
    if (with_list && classes.size() > 2) {
      listed = std::uniform_int_distribution<std::size_t>(2, classes.size())(rng);
    }
    classes.resize(listed);
    const std::size_t answer = classes[std::uniform_int_distribution<std::size_t>(0, listed - 1)(rng)];

    data::DatasetInfo shown = info;
    shown.class_names.clear();
    for (std::size_t c : classes) shown.class_names.push_back(info.class_names[c]);

    data::InstructionRecord r;
    r.sample_id = "warmup-" + std::to_string(i);
    r.dataset_id = info.dataset_id;
    r.label = answer;
    r.image_features.resize(input_dim);
    for (double& v : r.image_features) v = noise(rng);
    r.instruction_tokens = vocab.tokenize(tmpl.render(shown, with_list));
    r.response_tokens = data::response_tokens_for(info.class_names[answer], vocab);
    if (unit(rng) < hint_fraction) {
      auto at = std::find(r.instruction_tokens.begin(), r.instruction_tokens.end(), data::special::kImage);
      r.instruction_tokens.insert(at + 1, r.response_tokens.front());
    }
    out.push_back(std::move(r));
  }
  return out;
}

models::DecoderModel warm_up_decoder(const data::Vocabulary& vocab, const TrainingConfig& config) {
  const models::DecoderDims dims = config.decoder_dims(vocab.size());
  models::DecoderModel model(dims, config.base_seed);
  model.set_trainable(models::TrainPhase::warmup);

  const data::InstructionTemplate tmpl;
  const auto corpus = make_warmup_corpus(vocab, tmpl, data::builtin_datasets(), config.warmup_records,
                                         config.warmup_no_list_fraction, config.warmup_hint_fraction, dims.input_dim, config.base_seed);
  const std::vector<numerics::Var> params = model.trainable_parameters();
  AdamConfig adam;
  adam.learning_rate = config.warmup_learning_rate;
  AdamState state;
  auto rng = numerics::make_rng(config.base_seed, kShuffleStream);
  std::vector<std::size_t> order(corpus.size());
  for (std::size_t epoch = 0; epoch < config.warmup_epochs; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < order.size(); start += config.warmup_batch_size) {
      const std::size_t end = std::min(order.size(), start + config.warmup_batch_size);
      const double inv = 1.0 / static_cast<double>(end - start);
      std::vector<numerics::Tensor> grads;
      for (const numerics::Var& p : params) grads.emplace_back(p.shape(), 0.0);
      for (std::size_t i = start; i < end; ++i) {
        const data::InstructionRecord& r = corpus[order[i]];
        const auto logits = models::vlm_forward(r, model, nullptr, models::EpVariant::none, false);
        const numerics::Var loss = numerics::scale(objectives::nll_loss(logits, r.response_tokens), inv);
        if (!std::isfinite(loss.value().item())) {
          throw std::domain_error("warm-up loss is not finite in epoch " + std::to_string(epoch));
        }
        const numerics::GradientMap g = numerics::backward(loss);
        for (std::size_t k = 0; k < params.size(); ++k) {
          auto it = g.find(params[k].id());
          if (it == g.end()) continue;
          for (std::size_t j = 0; j < grads[k].size(); ++j) grads[k][j] += it->second[j];
        }
      }
      optimizer_step(params, grads, state, adam);
      model.enforce_image_block();
    }
  }
  model.set_trainable(models::TrainPhase::frozen);
  return model;
}

}  // namespace vitask::pipeline
