#pragma once

#include <filesystem>
#include <vector>

#include "vitask/evaluation/metrics.hpp"
#include "vitask/evaluation/predict.hpp"
#include "vitask/pipeline/recipe.hpp"

namespace vitask::evaluation {

struct RobustnessResult {
  pipeline::Method method = pipeline::Method::vitask;
  MetricsReport full;
  MetricsReport incomplete;
  /// full.macro_f1 - incomplete.macro_f1
  double f1_drop = 0.0;
};

/// Trains `method` on the incomplete corpus with the seeds of the full run
/// and scores both models without exemplars on their own test instructions.
/// The full-instruction model is trained too unless `full_model` is given.
RobustnessResult robustness_run(const pipeline::TrainingConfig& config, const models::DecoderModel& base,
                                const models::TsmModel& tsm, const pipeline::TaskData& task,
                                const data::Vocabulary& vocab, pipeline::Method method,
                                const models::DecoderModel* full_model = nullptr);

std::vector<RobustnessResult> robustness_experiment(
    const pipeline::TrainingConfig& config, const models::DecoderModel& base, const models::TsmModel& tsm,
    const pipeline::TaskData& task, const data::Vocabulary& vocab,
    const std::vector<pipeline::Method>& methods = {pipeline::Method::vanilla, pipeline::Method::vitask});

/// `method,seed,f1_full,f1_incomplete,f1_drop`
void write_robustness_csv(const std::filesystem::path& path, const std::vector<RobustnessResult>& results);

}  // namespace vitask::evaluation
