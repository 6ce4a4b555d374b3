#include "vitask/cli/cli.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <iterator>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>

#include "CLI11.hpp"
#include "json.hpp"
#include "vitask/data/corpus_io.hpp"
#include "vitask/data/feature_table.hpp"
#include "vitask/data/synthetic.hpp"
#include "vitask/evaluation/metrics.hpp"
#include "vitask/evaluation/predict.hpp"
#include "vitask/evaluation/ranking.hpp"
#include "vitask/evaluation/report.hpp"
#include "vitask/evaluation/robustness.hpp"
#include "vitask/models/checkpoint.hpp"
#include "vitask/pipeline/recipe.hpp"
#include "vitask/pipeline/trainer.hpp"
#include "vitask/pipeline/warmup.hpp"

namespace vitask::cli {

namespace {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

struct Options {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string data;
  std::string tsm;
  std::string base;
  std::string method = "vitask";
  std::vector<std::string> checkpoints;
  std::vector<std::string> labels;
  std::string name;
  int stage = 0;
  std::string ep = "none";
  std::string mode;
};

std::string file_hash(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return data::hex64(data::fnv1a(bytes));
}

fs::path require_file(const fs::path& path, const std::string& what) {
  if (!fs::exists(path)) throw std::runtime_error("missing " + what + ": " + path.string());
  return path;
}

class Run {
 public:
  Run(std::string command, const Options& opt) : command_(std::move(command)), opt_(opt) {
    if (opt_.out.empty()) throw std::runtime_error("--out is required");
    out_ = opt_.out;
    fs::create_directories(out_);
    data_ = opt_.data.empty() ? out_ : fs::path(opt_.data);
  }

  const fs::path& out() const { return out_; }
  const fs::path& data_dir() const { return data_; }
  fs::path output(const std::string& name) {
    outputs_.push_back(name);
    return out_ / name;
  }
  fs::path input(const fs::path& path, const std::string& what) {
    require_file(path, what);
    inputs_[path.string()] = file_hash(path);
    return path;
  }

  /// --config, else the data directory's config.txt, else the defaults;
  /// --seed overrides.
  const pipeline::TrainingConfig& config(bool from_data = true) {
    if (!config_) {
      pipeline::TrainingConfig c;
      if (!opt_.config.empty()) {
        c = pipeline::load_config(input(opt_.config, "config file"));
      } else if (from_data && fs::exists(data_ / "config.txt")) {
        c = pipeline::load_config(input(data_ / "config.txt", "config file"));
      }
      if (opt_.seed) c.seed = *opt_.seed;
      c.validate();
      config_ = c;
    }
    return *config_;
  }

  const data::Vocabulary& vocab() {
    if (!vocab_) vocab_ = data::Vocabulary::load(input(data_ / "vocab.txt", "vocabulary"));
    return *vocab_;
  }

  const data::DatasetInfo& info() { return data::find_dataset(config().dataset); }

  data::DatasetSplit load_samples(const std::string& prefix) {
    data::DatasetSplit s;
    s.train = data::load_feature_table(input(data_ / (prefix + "train_features.csv"), "feature table"), {info()});
    s.val = data::load_feature_table(input(data_ / (prefix + "val_features.csv"), "feature table"), {info()});
    s.test = data::load_feature_table(input(data_ / (prefix + "test_features.csv"), "feature table"), {info()});
    return s;
  }

  pipeline::TaskData task() {
    pipeline::TaskData t;
    t.info = info();
    t.samples = load_samples("");
    t.train = data::load_corpus(input(data_ / "train.jsonl", "corpus"), vocab(), t.samples.train);
    t.val = data::load_corpus(input(data_ / "val.jsonl", "corpus"), vocab(), t.samples.val);
    t.test = data::load_corpus(input(data_ / "test.jsonl", "corpus"), vocab(), t.samples.test);
    return t;
  }

  fs::path tsm_path() const { return opt_.tsm.empty() ? data_ / "tsm.ckpt" : fs::path(opt_.tsm); }
  models::TsmModel tsm() { return models::load_tsm(input(tsm_path(), "task-specific model")); }

  pipeline::Checkpoint checkpoint(const fs::path& path, const std::string& what) {
    return pipeline::load_checkpoint(input(path, what), vocab().hash());
  }

  /// --base, else <out>/base.ckpt, else a fresh warm-up saved there.
  models::DecoderModel base() {
    if (!opt_.base.empty()) return checkpoint(opt_.base, "base checkpoint").model;
    if (fs::exists(out_ / "base.ckpt")) return checkpoint(out_ / "base.ckpt", "base checkpoint").model;
    std::cerr << "warming up the base decoder\n";
    const models::DecoderModel model = pipeline::warm_up_decoder(vocab(), config());
    pipeline::save_checkpoint(output("base.ckpt"),
                              pipeline::start_checkpoint(model, config(), pipeline::Method::vanilla, vocab().hash()));
    return model;
  }

  void finish(json flags) {
    json m;
    m["command"] = command_;
    m["flags"] = std::move(flags);
    m["seed"] = config().seed;
    m["task_seed"] = pipeline::task_seed(config());
    m["config"] = pipeline::config_to_json(config());
    json in = json::object();
    for (const auto& [path, hash] : inputs_) in[path] = hash;
    m["inputs"] = in;
    m["outputs"] = outputs_;
    std::ofstream f(out_ / ("manifest_" + command_ + ".json"), std::ios::binary);
    f << m.dump(2) << '\n';
    if (!f) throw std::runtime_error("cannot write manifest in " + out_.string());
  }

 private:
  std::string command_;
  Options opt_;
  fs::path out_;
  fs::path data_;
  std::optional<pipeline::TrainingConfig> config_;
  std::optional<data::Vocabulary> vocab_;
  std::map<std::string, std::string> inputs_;
  std::vector<std::string> outputs_;
};

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  f << text;
  if (!f) throw std::runtime_error("cannot write " + path.string());
}

std::string stage_name(const pipeline::Checkpoint& ck) {
  return pipeline::to_string(ck.method) + "_stage" + std::to_string(ck.stage);
}

void prepare_data(const Options& opt) {
  Run run("prepare-data", opt);
  const auto& cfg = run.config(false);
  const data::Vocabulary vocab = pipeline::standard_vocabulary();
  const data::DatasetInfo& info = data::find_dataset(cfg.dataset);
  const data::DatasetSplit split = pipeline::make_task_samples(cfg);
  const data::DatasetSplit shifted = pipeline::make_shifted_samples(cfg);

  write_text(run.output("config.txt"), pipeline::format_config(cfg));
  vocab.save(run.output("vocab.txt"));
  const std::pair<const char*, const std::vector<data::ClassificationSample>*> parts[] = {
      {"train", &split.train}, {"val", &split.val}, {"test", &split.test}};
  for (const auto& [name, samples] : parts) {
    data::save_feature_table(run.output(std::string(name) + "_features.csv"), *samples);
    data::save_corpus(run.output(std::string(name) + ".jsonl"), pipeline::format_records(*samples, info, vocab), vocab);
  }
  data::save_feature_table(run.output("shifted_train_features.csv"), shifted.train);
  data::save_feature_table(run.output("shifted_val_features.csv"), shifted.val);
  data::save_feature_table(run.output("shifted_test_features.csv"), shifted.test);
  std::cerr << "prepared " << split.train.size() << "/" << split.val.size() << "/" << split.test.size()
            << " train/val/test records in " << run.out() << "\n";
  run.finish({});
}

evaluation::MetricsReport tsm_report(const models::TsmModel& tsm, const std::vector<data::ClassificationSample>& test,
                                     const data::DatasetInfo& info, std::uint64_t seed) {
  std::vector<std::size_t> preds, labels;
  for (const auto& s : test) {
    preds.push_back(tsm.predict(s.features, s.dataset_id));
    labels.push_back(s.label);
  }
  auto r = evaluation::compute_metrics(preds, labels, info.class_names.size());
  r.method = "tsm";
  r.seed = seed;
  return r;
}

void train_tsm(const Options& opt) {
  Run run("train-tsm", opt);
  const auto& cfg = run.config();
  const data::DatasetSplit split = run.load_samples("");
  const models::TsmModel tsm = pipeline::train_task_tsm(split, run.info(), cfg);
  models::save_tsm(run.output("tsm.ckpt"), tsm);
  const auto report = tsm_report(tsm, split.test, run.info(), cfg.seed);
  evaluation::emit_report(report, run.output("metrics_tsm.csv"));
  std::cerr << "tsm test macro-F1 " << report.macro_f1 << "\n";
  run.finish({{"tsm", (run.out() / "tsm.ckpt").string()}});
}

void train(const Options& opt) {
  Run run("train-" + opt.method + "-stage" + std::to_string(opt.stage), opt);
  const auto& cfg = run.config();
  const pipeline::Method method = pipeline::parse_method(opt.method);
  const pipeline::TaskData task = run.task();
  const models::TsmModel tsm = run.tsm();
  pipeline::Checkpoint out;
  if (opt.stage == 1) {
    const models::DecoderModel base = run.base();
    out = pipeline::run_stage1(pipeline::start_checkpoint(base, cfg, method, run.vocab().hash()), tsm, task.train, cfg);
  } else {
    const fs::path path = opt.checkpoints.empty() ? run.out() / (opt.method + "_stage1.ckpt") : fs::path(opt.checkpoints[0]);
    const pipeline::Checkpoint stage1 = run.checkpoint(require_file(path, "stage-1 checkpoint"), "stage-1 checkpoint");
    if (stage1.method != method) {
      throw std::runtime_error(path.string() + " was trained with method " + pipeline::to_string(stage1.method));
    }
    out = pipeline::run_stage2(stage1, tsm, task.train, cfg);
  }
  const std::string name = stage_name(out);
  pipeline::save_checkpoint(run.output(name + ".ckpt"), out);
  pipeline::write_loss_trace(run.output(name + "_loss.csv"), out.trace);
  std::cerr << "wrote " << (run.out() / (name + ".ckpt")).string() << " (" << out.trace.size() << " steps)\n";
  run.finish({{"stage", opt.stage}, {"method", opt.method}});
}

evaluation::EpConfig ep_config(const models::TsmModel* tsm, models::EpVariant variant) {
  return evaluation::EpConfig{variant == models::EpVariant::none ? nullptr : tsm, variant, true};
}

void check_tsm(const pipeline::Checkpoint& ck, const models::TsmModel& tsm) {
  const std::uint64_t expected = ck.swapped_tsm_hash != 0 ? ck.swapped_tsm_hash : ck.tsm_hash;
  if (expected != 0 && tsm.hash() != expected) {
    throw std::runtime_error("task-specific model " + data::hex64(tsm.hash()) + " does not match the checkpoint (" +
                             data::hex64(expected) + ")");
  }
}

void eval(const Options& opt) {
  Run run("eval", opt);
  const auto& cfg = run.config();
  if (opt.checkpoints.empty()) throw std::runtime_error("missing checkpoint: pass --checkpoint");
  const pipeline::Checkpoint ck = run.checkpoint(opt.checkpoints[0], "checkpoint");
  const models::EpVariant variant = models::parse_ep_variant(opt.ep);
  const evaluation::DecodeMode mode = evaluation::parse_decode_mode(opt.mode.empty() ? cfg.decode : opt.mode);
  std::optional<models::TsmModel> tsm;
  if (variant != models::EpVariant::none) {
    tsm = run.tsm();
    check_tsm(ck, *tsm);
  }
  const pipeline::TaskData task = run.task();
  auto report = evaluation::evaluate(ck.model, task.test, mode, ep_config(tsm ? &*tsm : nullptr, variant), task.info,
                                     run.vocab());
  report.method = pipeline::to_string(ck.method);
  report.seed = cfg.seed;
  const std::string name = opt.name.empty() ? stage_name(ck) + "_ep-" + opt.ep : opt.name;
  evaluation::emit_report(report, run.output("metrics_" + name + ".csv"));
  std::cerr << name << ": accuracy " << report.accuracy << " macro-F1 " << report.macro_f1 << " reject "
            << report.reject_rate << "\n";
  run.finish({{"checkpoint", opt.checkpoints[0]}, {"ep", opt.ep}, {"mode", evaluation::to_string(mode)}});
}

void density(const Options& opt) {
  Run run("density", opt);
  const auto& cfg = run.config();
  if (opt.checkpoints.empty() || opt.checkpoints.size() > 3) {
    throw std::runtime_error("density takes one to three --checkpoint files");
  }
  std::vector<std::string> labels = opt.labels;
  if (labels.empty() && opt.checkpoints.size() == 3) labels = {"no-tuning", "vanilla", "crt"};
  if (labels.empty()) {
    for (const auto& c : opt.checkpoints) labels.push_back(fs::path(c).stem().string());
  }
  if (labels.size() != opt.checkpoints.size()) throw std::runtime_error("need one --label per --checkpoint");

  const pipeline::TaskData task = run.task();
  const auto pairs = evaluation::make_ranking_pairs(task.test, cfg.seed);
  std::ostringstream summary;
  summary << "label,ranking_fraction,mean_gap\n";
  for (std::size_t i = 0; i < opt.checkpoints.size(); ++i) {
    const pipeline::Checkpoint ck = run.checkpoint(opt.checkpoints[i], "checkpoint");
    const auto report = evaluation::ranking_stats(ck.model, pairs, evaluation::EpConfig{}, cfg.histogram_bins);
    evaluation::emit_report(report, run.output("ranking_" + labels[i] + ".csv"), evaluation::ReportFormat::csv);
    evaluation::emit_report(report, run.output("density_" + labels[i] + ".svg"), evaluation::ReportFormat::svg_histogram,
                            labels[i]);
    double gap = 0.0;
    for (std::size_t k = 0; k < report.pos_probs.size(); ++k) gap += report.pos_probs[k] - report.neg_probs[k];
    if (!report.pos_probs.empty()) gap /= static_cast<double>(report.pos_probs.size());
    summary << labels[i] << ',' << data::format_double(report.ranking_fraction) << ',' << data::format_double(gap) << '\n';
    std::cerr << labels[i] << ": ranking fraction " << report.ranking_fraction << "\n";
  }
  write_text(run.output("density_summary.csv"), summary.str());
  run.finish({{"checkpoints", opt.checkpoints}, {"labels", labels}});
}

void swap(const Options& opt) {
  Run run("swap-tsm", opt);
  const auto& cfg = run.config();
  if (opt.checkpoints.empty()) throw std::runtime_error("missing checkpoint: pass --checkpoint");
  const pipeline::Checkpoint ck = run.checkpoint(opt.checkpoints[0], "checkpoint");
  const models::TsmModel original = run.tsm();
  check_tsm(ck, original);
  const data::DatasetSplit shifted = run.load_samples("shifted_");
  const models::TsmModel swapped_tsm = pipeline::train_task_tsm(shifted, run.info(), cfg, &original);
  models::save_tsm(run.output("tsm_swapped.ckpt"), swapped_tsm);
  const pipeline::Checkpoint swapped = pipeline::swap_tsm(ck, swapped_tsm);
  pipeline::save_checkpoint(run.output("swapped.ckpt"), swapped);

  const auto test = pipeline::format_records(shifted.test, run.info(), run.vocab());
  const evaluation::DecodeMode mode = evaluation::parse_decode_mode(opt.mode.empty() ? cfg.decode : opt.mode);
  std::ostringstream summary;
  summary << "tsm,accuracy,macro_f1\n";
  const std::pair<const char*, const models::TsmModel*> runs[] = {{"original", &original}, {"swapped", &swapped_tsm}};
  for (const auto& [name, tsm] : runs) {
    auto report = evaluation::evaluate(swapped.model, test, mode, ep_config(tsm, cfg.variant()), run.info(), run.vocab());
    report.method = pipeline::to_string(ck.method) + "_" + name;
    report.seed = cfg.seed;
    evaluation::emit_report(report, run.output(std::string("metrics_plug_") + name + ".csv"));
    summary << name << ',' << data::format_double(report.accuracy) << ',' << data::format_double(report.macro_f1) << '\n';
    std::cerr << name << " tsm on the shifted task: accuracy " << report.accuracy << "\n";
  }
  write_text(run.output("swap_summary.csv"), summary.str());
  run.finish({{"checkpoint", opt.checkpoints[0]}});
}

void robustness(const Options& opt) {
  Run run("robustness", opt);
  const auto& cfg = run.config();
  const pipeline::TaskData task = run.task();
  const models::TsmModel tsm = run.tsm();
  const models::DecoderModel base = run.base();
  const auto results = evaluation::robustness_experiment(cfg, base, tsm, task, run.vocab());
  evaluation::write_robustness_csv(run.output("robustness.csv"), results);
  for (const auto& r : results) {
    const std::string m = pipeline::to_string(r.method);
    evaluation::emit_report(r.full, run.output("metrics_" + m + "_full.csv"));
    evaluation::emit_report(r.incomplete, run.output("metrics_" + m + "_incomplete.csv"));
    std::cerr << m << ": macro-F1 " << r.full.macro_f1 << " -> " << r.incomplete.macro_f1 << "\n";
  }
  run.finish({});
}

}  // namespace

int run(const std::vector<std::string>& args) {
  CLI::App app{"VITask toy pipeline: exemplar prompting, response alignment and contrastive tuning", "vitask"};
  app.require_subcommand(1);
  app.fallthrough();
  Options opt;
  std::string seed_text;
  app.add_option("--config", opt.config, "key=value config file");
  app.add_option("--seed", seed_text, "run seed (overrides the config)");
  app.add_option("--out", opt.out, "output directory")->required();
  app.add_option("--data", opt.data, "prepared data directory (default: --out)");

  auto* prep = app.add_subcommand("prepare-data", "generate the synthetic task, its corpus and the shifted variant");
  auto* tsm = app.add_subcommand("train-tsm", "train the task-specific model");
  auto* train_cmd = app.add_subcommand("train", "run one VITask stage");
  train_cmd->add_option("--stage", opt.stage, "1 or 2")->required()->check(CLI::IsMember({1, 2}));
  train_cmd->add_option("--method", opt.method, "vitask or vanilla")->check(CLI::IsMember({"vitask", "vanilla"}));
  train_cmd->add_option("--tsm", opt.tsm, "task-specific model (default: <data>/tsm.ckpt)");
  train_cmd->add_option("--base", opt.base, "warmed-up base checkpoint (default: <out>/base.ckpt or a fresh warm-up)");
  train_cmd->add_option("--checkpoint", opt.checkpoints, "stage-1 checkpoint (default: <out>/<method>_stage1.ckpt)");
  auto* eval_cmd = app.add_subcommand("eval", "score a checkpoint on the test split");
  eval_cmd->add_option("--checkpoint", opt.checkpoints, "checkpoint to score")->required();
  eval_cmd->add_option("--ep", opt.ep, "exemplar prompting at inference")
      ->check(CLI::IsMember({"none", "cls", "all", "rep"}));
  eval_cmd->add_option("--mode", opt.mode, "decoding rule")->check(CLI::IsMember({"greedy", "class-likelihood"}));
  eval_cmd->add_option("--tsm", opt.tsm, "task-specific model (default: <data>/tsm.ckpt)");
  eval_cmd->add_option("--name", opt.name, "output name (default: <method>_stage<k>_ep-<variant>)");
  auto* dens = app.add_subcommand("density", "ranking fraction and response-probability histograms");
  dens->add_option("--checkpoint", opt.checkpoints, "one to three checkpoints")->required();
  dens->add_option("--label", opt.labels, "one label per checkpoint");
  auto* swap_cmd = app.add_subcommand("swap-tsm", "plug a TSM retrained on the shifted task into a checkpoint");
  swap_cmd->add_option("--checkpoint", opt.checkpoints, "tuned checkpoint")->required();
  swap_cmd->add_option("--tsm", opt.tsm, "original task-specific model (default: <data>/tsm.ckpt)");
  swap_cmd->add_option("--mode", opt.mode, "decoding rule")->check(CLI::IsMember({"greedy", "class-likelihood"}));
  auto* rob = app.add_subcommand("robustness", "full versus incomplete instructions for vanilla and VITask");
  rob->add_option("--tsm", opt.tsm, "task-specific model (default: <data>/tsm.ckpt)");
  rob->add_option("--base", opt.base, "warmed-up base checkpoint (default: <out>/base.ckpt or a fresh warm-up)");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  if (!reversed.empty()) reversed.pop_back();
  try {
    app.parse(reversed);
    if (!seed_text.empty()) {
      std::size_t used = 0;
      opt.seed = std::stoull(seed_text, &used);
      if (used != seed_text.size()) throw std::invalid_argument(seed_text);
    }
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    std::cerr << "error: " << e.what() << "\n" << app.help();
    return 1;
  } catch (const std::exception&) {
    std::cerr << "--seed expects a non-negative integer, got '" << seed_text << "'\n" << app.help();
    return 1;
  }

  try {
    if (prep->parsed()) prepare_data(opt);
    if (tsm->parsed()) train_tsm(opt);
    if (train_cmd->parsed()) train(opt);
    if (eval_cmd->parsed()) eval(opt);
    if (dens->parsed()) density(opt);
    if (swap_cmd->parsed()) swap(opt);
    if (rob->parsed()) robustness(opt);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}

int run(int argc, const char* const* argv) {
  std::vector<std::string> args;
  for (int i = 0; i < argc; ++i) args.emplace_back(argv[i]);
  return run(args);
}

}  // namespace vitask::cli
