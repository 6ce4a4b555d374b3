#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "vitask/data/types.hpp"
#include "vitask/models/decoder.hpp"
#include "vitask/models/tsm.hpp"
#include "vitask/pipeline/config.hpp"
#include "vitask/pipeline/optimizer.hpp"

namespace vitask::pipeline {

/// vitask: the staged objective with exemplar prompting, RDA and CRT.
/// vanilla: next-token NLL on the plain forward only.
enum class Method { vitask, vanilla };

std::string to_string(Method m);
Method parse_method(const std::string& text);

struct LossRow {
  std::size_t step = 0;
  std::size_t epoch = 0;
  double van = 0.0;
  double ep = 0.0;
  double rda = 0.0;
  double crt = 0.0;
  double total = 0.0;
};

struct Checkpoint {
  models::DecoderModel model;
  TrainingConfig config;
  Method method = Method::vitask;
  int stage = 0;
  std::uint64_t vocab_hash = 0;
  std::uint64_t tsm_hash = 0;
  /// Hash of a TSM swapped in for inference; 0 when none.
  std::uint64_t swapped_tsm_hash = 0;
  std::string shuffle_rng;
  std::string negative_rng;
  std::vector<LossRow> trace;
  AdamState adam;
  /// Parameter names aligned with adam.m / adam.v.
  std::vector<std::string> adam_names;
};

/// Fresh stage-0 checkpoint around a copy of the warmed-up base decoder.
Checkpoint start_checkpoint(const models::DecoderModel& base, const TrainingConfig& config, Method method,
                            std::uint64_t vocab_hash);

/// Stage 1: task connector and adapters trainable. Per record one plain and
/// one exemplar-prompted forward; loss van + ep + alpha * rda.
Checkpoint run_stage1(const Checkpoint& start, const models::TsmModel& tsm,
                      const std::vector<data::InstructionRecord>& train, const TrainingConfig& config);

/// Stage 2: adapters only. Adds a freshly drawn negative per record and per
/// epoch; crt is the mean of the plain-branch and exemplar-branch
/// contrastive terms.
Checkpoint run_stage2(const Checkpoint& stage1, const models::TsmModel& tsm,
                      const std::vector<data::InstructionRecord>& train, const TrainingConfig& config);

/// The shared loop: `objective_stage` picks the loss, `phase` the trainable
/// set. run_stage1/run_stage2 are thin wrappers.
Checkpoint train_epochs(const Checkpoint& start, const models::TsmModel* tsm,
                        const std::vector<data::InstructionRecord>& train, const TrainingConfig& config,
                        int objective_stage, models::TrainPhase phase, std::size_t epochs);

/// Replaces the inference TSM; the decoder is untouched. Throws when the
/// exemplar width differs from the task connector's input.
Checkpoint swap_tsm(const Checkpoint& checkpoint, const models::TsmModel& new_tsm);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);
/// Rejects files whose vocabulary hash differs from `vocab_hash`.
Checkpoint load_checkpoint(const std::filesystem::path& path, std::uint64_t vocab_hash);

/// `step,epoch,van,ep,rda,crt,total`
void write_loss_trace(const std::filesystem::path& path, const std::vector<LossRow>& trace);

}  // namespace vitask::pipeline
