#pragma once

#include <cstdint>
#include <vector>

#include "vitask/data/instruction.hpp"
#include "vitask/data/split.hpp"
#include "vitask/models/decoder.hpp"
#include "vitask/models/tsm.hpp"
#include "vitask/pipeline/config.hpp"
#include "vitask/pipeline/trainer.hpp"

namespace vitask::pipeline {

/// One synthetic task: raw splits plus their formatted records.
struct TaskData {
  data::DatasetInfo info;
  data::DatasetSplit samples;
  std::vector<data::InstructionRecord> train;
  std::vector<data::InstructionRecord> val;
  std::vector<data::InstructionRecord> test;
};

/// Default template and the vocabulary over every built-in dataset.
data::Vocabulary standard_vocabulary();

/// Seed of the synthetic draw and split: data_seed + seed.
std::uint64_t task_seed(const TrainingConfig& config);

/// Stratified split of the configured task.
data::DatasetSplit make_task_samples(const TrainingConfig& config);

/// A fresh draw of the same task, moved by a random mean shift of
/// `shift_magnitude` over the class axes.
data::DatasetSplit make_shifted_samples(const TrainingConfig& config);

std::vector<data::InstructionRecord> format_records(const std::vector<data::ClassificationSample>& samples,
                                                    const data::DatasetInfo& info, const data::Vocabulary& vocab,
                                                    bool with_options = true);

TaskData make_task(const data::DatasetSplit& samples, const data::DatasetInfo& info, const data::Vocabulary& vocab,
                   bool with_options = true);
TaskData prepare_task(const TrainingConfig& config, const data::Vocabulary& vocab, bool with_options = true);

/// Same samples with the class list removed from every instruction.
TaskData incomplete_view(const TaskData& task, const data::Vocabulary& vocab);

models::TsmModel train_task_tsm(const data::DatasetSplit& samples, const data::DatasetInfo& info,
                                const TrainingConfig& config, const models::TsmModel* init = nullptr);

struct MethodRun {
  Checkpoint stage1;
  Checkpoint stage2;
};

/// Both stages from the base decoder; vanilla runs the same epoch counts on
/// the plain objective.
MethodRun train_method(const models::DecoderModel& base, const models::TsmModel& tsm,
                       const std::vector<data::InstructionRecord>& train, const TrainingConfig& config, Method method,
                       std::uint64_t vocab_hash);

}  // namespace vitask::pipeline
