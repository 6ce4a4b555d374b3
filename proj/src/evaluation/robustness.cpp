#include "vitask/evaluation/robustness.hpp"

#include <fstream>
#include <stdexcept>

#include "vitask/data/feature_table.hpp"

namespace vitask::evaluation {

namespace {

MetricsReport score(const models::DecoderModel& model, const std::vector<data::InstructionRecord>& test,
                    const pipeline::TrainingConfig& config, const data::DatasetInfo& info,
                    const data::Vocabulary& vocab, pipeline::Method method) {
  MetricsReport r = evaluate(model, test, parse_decode_mode(config.decode), EpConfig{}, info, vocab);
  r.method = pipeline::to_string(method);
  r.seed = config.seed;
  return r;
}

}  // namespace

RobustnessResult robustness_run(const pipeline::TrainingConfig& config, const models::DecoderModel& base,
                                const models::TsmModel& tsm, const pipeline::TaskData& task,
                                const data::Vocabulary& vocab, pipeline::Method method,
                                const models::DecoderModel* full_model) {
  const pipeline::TaskData incomplete = pipeline::incomplete_view(task, vocab);
  RobustnessResult out;
  out.method = method;
  if (full_model) {
    out.full = score(*full_model, task.test, config, task.info, vocab, method);
  } else {
    const auto run = pipeline::train_method(base, tsm, task.train, config, method, vocab.hash());
    out.full = score(run.stage2.model, task.test, config, task.info, vocab, method);
  }
  const auto run = pipeline::train_method(base, tsm, incomplete.train, config, method, vocab.hash());
  out.incomplete = score(run.stage2.model, incomplete.test, config, task.info, vocab, method);
  out.f1_drop = out.full.macro_f1 - out.incomplete.macro_f1;
  return out;
}

std::vector<RobustnessResult> robustness_experiment(const pipeline::TrainingConfig& config,
                                                    const models::DecoderModel& base, const models::TsmModel& tsm,
                                                    const pipeline::TaskData& task, const data::Vocabulary& vocab,
                                                    const std::vector<pipeline::Method>& methods) {
  std::vector<RobustnessResult> out;
  for (pipeline::Method m : methods) out.push_back(robustness_run(config, base, tsm, task, vocab, m));
  return out;
}

void write_robustness_csv(const std::filesystem::path& path, const std::vector<RobustnessResult>& results) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "method,seed,f1_full,f1_incomplete,f1_drop\n";
  for (const auto& r : results) {
    out << pipeline::to_string(r.method) << ',' << r.full.seed << ',' << data::format_double(r.full.macro_f1) << ','
        << data::format_double(r.incomplete.macro_f1) << ',' << data::format_double(r.f1_drop) << '\n';
  }
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

}  // namespace vitask::evaluation
