#include "vitask/pipeline/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <optional>
#include <stdexcept>

#include "vitask/data/feature_table.hpp"
#include "vitask/data/negative_sampling.hpp"
#include "vitask/models/checkpoint.hpp"
#include "vitask/models/vlm.hpp"
#include "vitask/numerics/ops.hpp"
#include "vitask/numerics/random.hpp"
#include "vitask/objectives/losses.hpp"

namespace vitask::pipeline {

namespace ops = numerics;
using numerics::Tensor;
using numerics::Var;

namespace {

constexpr std::uint64_t kShuffleStream = 0x53485546;
constexpr std::uint64_t kNegativeStream = 0x4e454753;

struct RecordLoss {
  Var total;
  double van = 0.0, ep = 0.0, rda = 0.0, crt = 0.0;
};

RecordLoss record_loss(const models::DecoderModel& model, Method method, int stage, const TrainingConfig& config,
                       models::EpVariant variant, const data::InstructionRecord& r, const models::ExemplarFeatures* ex,
                       const data::InstructionRecord* neg, const models::ExemplarFeatures* neg_ex) {
  using namespace objectives;
  RecordLoss out;
  const auto plain = models::vlm_forward(model, r.image_features, r.instruction_tokens, r.response_tokens, nullptr,
                                         models::EpVariant::none);
  const Var van = nll_loss(plain, r.response_tokens);
  out.van = van.value().item();
  if (method == Method::vanilla) {
    out.total = van;
    return out;
  }
  const auto prompted =
      models::vlm_forward(model, r.image_features, r.instruction_tokens, r.response_tokens, ex, variant);
  const Var ep = nll_loss(prompted, r.response_tokens);
  const Var rda = rda_loss(plain, prompted);
  Var crt;
  if (stage == 2) {
    const auto neg_plain = models::vlm_forward(model, neg->image_features, r.instruction_tokens, r.response_tokens,
                                               nullptr, models::EpVariant::none);
    const auto neg_prompted =
        models::vlm_forward(model, neg->image_features, r.instruction_tokens, r.response_tokens, neg_ex, variant);
    crt = ops::scale(ops::add(crt_loss(plain, neg_plain, r.response_tokens),
                              crt_loss(prompted, neg_prompted, r.response_tokens)),
                     0.5);
    out.crt = crt.value().item();
  }
  out.ep = ep.value().item();
  out.rda = rda.value().item();
  out.total = compose_stage_loss(stage, van, ep, rda, crt, config.alpha, config.beta);
  return out;
}

std::vector<std::string> trainable_names(const models::DecoderModel& model) {
  std::vector<std::string> names;
  for (const auto& [name, p] : model.named_parameters()) {
    if (p.requires_grad()) names.push_back(name);
  }
  return names;
}

AdamState carry_adam(const Checkpoint& ck, const std::vector<std::string>& names, const std::vector<Var>& params) {
  AdamState st;
  st.step = ck.adam.step;
  for (std::size_t i = 0; i < names.size(); ++i) {
    const auto it = std::find(ck.adam_names.begin(), ck.adam_names.end(), names[i]);
    if (it != ck.adam_names.end()) {
      const auto k = static_cast<std::size_t>(it - ck.adam_names.begin());
      st.m.push_back(ck.adam.m[k]);
      st.v.push_back(ck.adam.v[k]);
    } else {
      st.m.emplace_back(params[i].shape(), 0.0);
      st.v.emplace_back(params[i].shape(), 0.0);
    }
  }
  return st;
}

}  // namespace

std::string to_string(Method m) { return m == Method::vitask ? "vitask" : "vanilla"; }

Method parse_method(const std::string& text) {
  if (text == "vitask") return Method::vitask;
  if (text == "vanilla") return Method::vanilla;
  throw std::invalid_argument("unknown method '" + text + "' (expected vitask or vanilla)");
}

Checkpoint start_checkpoint(const models::DecoderModel& base, const TrainingConfig& config, Method method,
                            std::uint64_t vocab_hash) {
  Checkpoint ck;
  ck.model = base.clone();
  ck.model.set_trainable(models::TrainPhase::frozen);
  ck.config = config;
  ck.method = method;
  ck.vocab_hash = vocab_hash;
  ck.shuffle_rng = numerics::save_rng(numerics::make_rng(config.seed, kShuffleStream));
  ck.negative_rng = numerics::save_rng(numerics::make_rng(config.seed, kNegativeStream));
  return ck;
}

Checkpoint train_epochs(const Checkpoint& start, const models::TsmModel* tsm,
                        const std::vector<data::InstructionRecord>& train, const TrainingConfig& config,
                        int objective_stage, models::TrainPhase phase, std::size_t epochs) {
  if (objective_stage != 1 && objective_stage != 2) throw std::invalid_argument("stage must be 1 or 2");
  if (train.empty()) throw std::invalid_argument("empty training set");
  config.validate();
  const Method method = start.method;
  const models::EpVariant variant = config.variant();
  if (method == Method::vitask) {
    if (!tsm) throw std::invalid_argument("VITask training requires a task-specific model");
    if (variant == models::EpVariant::none) throw std::invalid_argument("VITask training needs an exemplar variant");
  }

  Checkpoint ck = start;
  ck.model = start.model.clone();
  ck.config = config;
  ck.model.set_trainable(phase);
  const std::vector<Var> params = ck.model.trainable_parameters();
  const std::vector<std::string> names = trainable_names(ck.model);
  AdamState adam = carry_adam(start, names, params);
  const AdamConfig adam_config = config.adam();
  numerics::Rng shuffle = numerics::load_rng(ck.shuffle_rng);
  numerics::Rng negatives = numerics::load_rng(ck.negative_rng);
  if (tsm) ck.tsm_hash = tsm->hash();

  std::vector<models::ExemplarFeatures> exemplars;
  if (method == Method::vitask) {
    exemplars.reserve(train.size());
    for (const auto& r : train) exemplars.push_back(models::extract_exemplar(*tsm, r.image_features, ck.model.dims().patches));
  }
  std::optional<data::NegativeSampler> sampler;
  if (method == Method::vitask && objective_stage == 2) {
    sampler.emplace(train);
    sampler->require_all_eligible();
  }

  std::vector<std::pair<Var, Tensor>> frozen;
  if (config.check_frozen) {
    for (const auto& [name, p] : ck.model.named_parameters()) {
      if (!p.requires_grad()) frozen.emplace_back(p, p.value());
    }
  }

  std::size_t step = ck.trace.empty() ? 0 : ck.trace.back().step;
  const std::size_t first_epoch = ck.trace.empty() ? 0 : ck.trace.back().epoch;
  std::vector<std::size_t> order(train.size());
  for (std::size_t e = 0; e < epochs; ++e) {
    const std::size_t epoch = first_epoch + e + 1;
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), shuffle);
    for (std::size_t begin = 0; begin < order.size(); begin += config.batch_size) {
      const std::size_t end = std::min(order.size(), begin + config.batch_size);
      const double inv = 1.0 / static_cast<double>(end - begin);
      ++step;
      std::vector<Tensor> grads;
      for (const Var& p : params) grads.emplace_back(p.shape(), 0.0);
      LossRow row;
      row.step = step;
      row.epoch = epoch;
      for (std::size_t k = begin; k < end; ++k) {
        const std::size_t i = order[k];
        const data::InstructionRecord* neg = nullptr;
        const models::ExemplarFeatures* neg_ex = nullptr;
        if (sampler) {
          const std::size_t j = sampler->sample(i, negatives);
          neg = &train[j];
          neg_ex = &exemplars[j];
        }
        const RecordLoss l = record_loss(ck.model, method, objective_stage, config, variant, train[i],
                                         exemplars.empty() ? nullptr : &exemplars[i], neg, neg_ex);
        const double total = l.total.value().item();
        if (!std::isfinite(total)) {
          throw std::runtime_error("non-finite loss at step " + std::to_string(step) + " (epoch " + std::to_string(epoch) +
                                   ", batch starting at position " + std::to_string(begin) + ", record " +
                                   train[i].sample_id + ")");
        }
        row.van += l.van * inv;
        row.ep += l.ep * inv;
        row.rda += l.rda * inv;
        row.crt += l.crt * inv;
        const numerics::GradientMap g = numerics::backward(ops::scale(l.total, inv));
        for (std::size_t p = 0; p < params.size(); ++p) {
          const auto it = g.find(params[p].id());
          if (it == g.end()) continue;
          for (std::size_t c = 0; c < grads[p].size(); ++c) grads[p][c] += it->second[c];
        }
      }
      row.total = objectives::stage_loss(method == Method::vitask ? objective_stage : 1, row.van, row.ep, row.rda,
                                         row.crt, method == Method::vitask ? config.alpha : 0.0, config.beta)
                      .total;
      optimizer_step(params, grads, adam, adam_config);
      if (config.check_frozen) {
        for (const auto& [p, before] : frozen) {
          if (!numerics::bit_identical(p.value(), before)) {
            throw std::logic_error("frozen parameter changed at step " + std::to_string(step));
          }
        }
      }
      ck.trace.push_back(row);
    }
  }

  ck.model.set_trainable(models::TrainPhase::frozen);
  ck.stage = objective_stage;
  ck.adam = std::move(adam);
  ck.adam_names = names;
  ck.shuffle_rng = numerics::save_rng(shuffle);
  ck.negative_rng = numerics::save_rng(negatives);
  return ck;
}

Checkpoint run_stage1(const Checkpoint& start, const models::TsmModel& tsm,
                      const std::vector<data::InstructionRecord>& train, const TrainingConfig& config) {
  if (start.stage != 0) throw std::invalid_argument("stage 1 must start from an untuned checkpoint");
  return train_epochs(start, &tsm, train, config, 1, models::TrainPhase::stage1, config.epochs_stage1);
}

Checkpoint run_stage2(const Checkpoint& stage1, const models::TsmModel& tsm,
                      const std::vector<data::InstructionRecord>& train, const TrainingConfig& config) {
  if (stage1.stage != 1) throw std::invalid_argument("stage 2 requires a stage-1 checkpoint");
  return train_epochs(stage1, &tsm, train, config, 2, models::TrainPhase::stage2, config.epochs_stage2);
}

Checkpoint swap_tsm(const Checkpoint& checkpoint, const models::TsmModel& new_tsm) {
  if (new_tsm.hidden_dim() != checkpoint.model.dims().d_t) {
    throw std::invalid_argument("swap: TSM exemplar width " + std::to_string(new_tsm.hidden_dim()) +
                                " does not match the task connector input " +
                                std::to_string(checkpoint.model.dims().d_t));
  }
  if (new_tsm.input_dim() != checkpoint.model.dims().input_dim) {
    throw std::invalid_argument("swap: TSM input dimension does not match the model's image features");
  }
  Checkpoint out = checkpoint;
  out.swapped_tsm_hash = new_tsm.hash();
  return out;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ck) {
  models::CheckpointFile file;
  file.header["kind"] = "vlm";
  file.header["vocab_hash"] = data::hex64(ck.vocab_hash);
  file.header["method"] = to_string(ck.method);
  file.header["stage"] = ck.stage;
  file.header["ep_variant"] = ck.config.ep_variant;
  file.header["exemplar_position"] = "after_image";
  file.header["tsm_hash"] = data::hex64(ck.tsm_hash);
  file.header["swapped_tsm_hash"] = data::hex64(ck.swapped_tsm_hash);
  file.header["config"] = config_to_json(ck.config);
  file.header["rng"] = {{"shuffle", ck.shuffle_rng}, {"negative", ck.negative_rng}};
  nlohmann::ordered_json trace = nlohmann::ordered_json::array();
  for (const LossRow& r : ck.trace) {
    trace.push_back({r.step, r.epoch, data::format_double(r.van), data::format_double(r.ep), data::format_double(r.rda),
                     data::format_double(r.crt), data::format_double(r.total)});
  }
  file.header["loss_trace"] = trace;
  file.header["adam"] = {{"step", ck.adam.step}, {"params", ck.adam_names}};
  models::store_decoder(file, ck.model);
  for (std::size_t i = 0; i < ck.adam_names.size(); ++i) {
    file.tensors.emplace_back("adam.m." + ck.adam_names[i], ck.adam.m[i]);
    file.tensors.emplace_back("adam.v." + ck.adam_names[i], ck.adam.v[i]);
  }
  models::write_checkpoint_file(path, file);
}

Checkpoint load_checkpoint(const std::filesystem::path& path, std::uint64_t vocab_hash) {
  const models::CheckpointFile file = models::read_checkpoint_file(path);
  models::require_vocab_hash(file, vocab_hash, path);
  if (file.header.value("kind", std::string()) != "vlm") throw std::runtime_error(path.string() + " is not a model checkpoint");
  Checkpoint ck;
  ck.model = models::restore_decoder(file);
  ck.config = config_from_json(file.header.at("config"));
  ck.method = parse_method(file.header.at("method"));
  ck.stage = file.header.at("stage");
  ck.vocab_hash = vocab_hash;
  ck.tsm_hash = std::stoull(file.header.at("tsm_hash").get<std::string>(), nullptr, 16);
  ck.swapped_tsm_hash = std::stoull(file.header.at("swapped_tsm_hash").get<std::string>(), nullptr, 16);
  ck.shuffle_rng = file.header.at("rng").at("shuffle");
  ck.negative_rng = file.header.at("rng").at("negative");
  for (const auto& r : file.header.at("loss_trace")) {
    ck.trace.push_back({r.at(0), r.at(1), data::parse_double(r.at(2).get<std::string>()),
                        data::parse_double(r.at(3).get<std::string>()), data::parse_double(r.at(4).get<std::string>()),
                        data::parse_double(r.at(5).get<std::string>()), data::parse_double(r.at(6).get<std::string>())});
  }
  ck.adam.step = file.header.at("adam").at("step");
  ck.adam_names = file.header.at("adam").at("params").get<std::vector<std::string>>();
  for (const std::string& name : ck.adam_names) {
    ck.adam.m.push_back(file.tensor("adam.m." + name));
    ck.adam.v.push_back(file.tensor("adam.v." + name));
  }
  return ck;
}

void write_loss_trace(const std::filesystem::path& path, const std::vector<LossRow>& trace) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write loss trace " + path.string());
  out << "step,epoch,van,ep,rda,crt,total\n";
  for (const LossRow& r : trace) {
    out << r.step << ',' << r.epoch << ',' << data::format_double(r.van) << ',' << data::format_double(r.ep) << ','
        << data::format_double(r.rda) << ',' << data::format_double(r.crt) << ',' << data::format_double(r.total)
        << '\n';
  }
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

}  // namespace vitask::pipeline
