#include "vitask/pipeline/recipe.hpp"

#include "vitask/data/synthetic.hpp"

namespace vitask::pipeline {

namespace {
constexpr std::uint64_t kShiftedDraw = 0x5348494654ULL;
}  // namespace

data::Vocabulary standard_vocabulary() {
  return data::build_task_vocabulary(data::InstructionTemplate{}, data::builtin_datasets());
}

std::uint64_t task_seed(const TrainingConfig& config) { return config.data_seed + config.seed; }

data::DatasetSplit make_task_samples(const TrainingConfig& config) {
  const data::DatasetInfo& info = data::find_dataset(config.dataset);
  const auto samples =
      data::generate_synthetic_task(info.class_names.size(), config.dataset_dims(), config.n_per_class,
                                    config.separation, config.noise_dims, task_seed(config), info.dataset_id);
  return data::split_dataset(samples, data::kDefaultSplitRatios, task_seed(config));
}

data::DatasetSplit make_shifted_samples(const TrainingConfig& config) {
  const data::DatasetInfo& info = data::find_dataset(config.dataset);
  const std::uint64_t seed = task_seed(config) ^ kShiftedDraw;
  auto samples = data::generate_synthetic_task(info.class_names.size(), config.dataset_dims(), config.n_per_class,
                                               config.separation, config.noise_dims, seed, info.dataset_id);
  for (auto& s : samples) s.sample_id = "shifted-" + s.sample_id;
  const auto shift = data::random_mean_shift(config.dataset_dims(), info.class_names.size(), config.shift_magnitude, seed);
  data::apply_mean_shift(samples, shift);
  return data::split_dataset(samples, data::kDefaultSplitRatios, seed);
}

std::vector<data::InstructionRecord> format_records(const std::vector<data::ClassificationSample>& samples,
                                                    const data::DatasetInfo& info, const data::Vocabulary& vocab,
                                                    bool with_options) {
  const data::InstructionTemplate tmpl;
  std::vector<data::InstructionRecord> out;
  out.reserve(samples.size());
  for (const auto& s : samples) {
    auto r = data::format_instruction(s, tmpl, info, vocab);
    if (!with_options) r = data::make_incomplete(r, tmpl, info, vocab);
    out.push_back(std::move(r));
  }
  return out;
}

TaskData make_task(const data::DatasetSplit& samples, const data::DatasetInfo& info, const data::Vocabulary& vocab,
                   bool with_options) {
  TaskData task;
  task.info = info;
  task.samples = samples;
  task.train = format_records(samples.train, info, vocab, with_options);
  task.val = format_records(samples.val, info, vocab, with_options);
  task.test = format_records(samples.test, info, vocab, with_options);
  return task;
}

TaskData prepare_task(const TrainingConfig& config, const data::Vocabulary& vocab, bool with_options) {
  return make_task(make_task_samples(config), data::find_dataset(config.dataset), vocab, with_options);
}

TaskData incomplete_view(const TaskData& task, const data::Vocabulary& vocab) {
  const data::InstructionTemplate tmpl;
  TaskData out = task;
  for (auto* split : {&out.train, &out.val, &out.test}) {
    for (auto& r : *split) r = data::make_incomplete(r, tmpl, task.info, vocab);
  }
  return out;
}

models::TsmModel train_task_tsm(const data::DatasetSplit& samples, const data::DatasetInfo& info,
                                const TrainingConfig& config, const models::TsmModel* init) {
  return models::train_tsm(samples.train, samples.val, {info}, config.tsm(), init);
}

MethodRun train_method(const models::DecoderModel& base, const models::TsmModel& tsm,
                       const std::vector<data::InstructionRecord>& train, const TrainingConfig& config, Method method,
                       std::uint64_t vocab_hash) {
  MethodRun run{run_stage1(start_checkpoint(base, config, method, vocab_hash), tsm, train, config), {}};
  run.stage2 = run_stage2(run.stage1, tsm, train, config);
  return run;
}

}  // namespace vitask::pipeline
