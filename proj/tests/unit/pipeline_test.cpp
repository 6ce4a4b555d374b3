#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "vitask/data/synthetic.hpp"
#include "vitask/pipeline/config.hpp"
#include "vitask/pipeline/optimizer.hpp"
#include "vitask/pipeline/recipe.hpp"
#include "vitask/pipeline/trainer.hpp"
#include "vitask/pipeline/warmup.hpp"

using namespace vitask;
using namespace vitask::pipeline;
using numerics::Tensor;
namespace fs = std::filesystem;

namespace {

TrainingConfig tiny_config() {
  TrainingConfig c;
  c.dataset = "oct";
  c.n_per_class = 5;
  c.noise_dims = 2;
  c.d_model = 16;
  c.layers = 1;
  c.heads = 2;
  c.ff = 24;
  c.patches = 2;
  c.d_v = 4;
  c.d_t = 6;
  c.adapter_rank = 2;
  c.warmup_records = 24;
  c.warmup_epochs = 1;
  c.warmup_batch_size = 8;
  c.tsm_epochs = 3;
  c.batch_size = 4;
  return c;
}

struct Tiny {
  TrainingConfig cfg = tiny_config();
  data::Vocabulary vocab = standard_vocabulary();
  TaskData task = prepare_task(cfg, vocab);
  models::TsmModel tsm = train_task_tsm(task.samples, task.info, cfg);
  models::DecoderModel base = warm_up_decoder(vocab, cfg);
};

Tiny& tiny() {
  static Tiny t;
  return t;
}

bool same_parameters(const models::DecoderModel& a, const models::DecoderModel& b, const std::string& filter = "") {
  const auto pa = a.named_parameters();
  const auto pb = b.named_parameters();
  for (std::size_t i = 0; i < pa.size(); ++i) {
    if (!filter.empty() && pa[i].first.find(filter) == std::string::npos) continue;
    if (!numerics::bit_identical(pa[i].second.value(), pb[i].second.value())) return false;
  }
  return true;
}

std::string read_text(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("config parses, rejects unknown keys and round-trips") {
  const TrainingConfig c = parse_config("# comment\n\nalpha = 0.5\nepochs_stage1=3\nep_variant=all\n");
  CHECK(c.alpha == 0.5);
  CHECK(c.epochs_stage1 == 3);
  CHECK(c.variant() == models::EpVariant::all);
  CHECK_THROWS_WITH_AS(parse_config("gamma=1\n"), doctest::Contains("gamma"), std::invalid_argument);
  CHECK_THROWS(parse_config("alpha=abc\n"));
  CHECK_THROWS(parse_config("alpha\n"));
  CHECK_THROWS(parse_config("batch_size=-1\n"));
  CHECK(parse_config(format_config(c)) == c);
  CHECK(config_from_json(config_to_json(c)) == c);
  CHECK(config_keys().size() > 30);
  TrainingConfig bad;
  bad.decode = "beam";
  CHECK_THROWS(bad.validate());
  bad = TrainingConfig{};
  bad.alpha = -1.0;
  CHECK_THROWS(bad.validate());
}

TEST_CASE("default config matches the documented values") {
  const TrainingConfig c;
  CHECK(c.learning_rate == 1e-3);
  CHECK(c.batch_size == 32);
  CHECK(c.epochs_stage1 == 1);
  CHECK(c.epochs_stage2 == 1);
  CHECK(c.alpha == 1.0);
  CHECK(c.beta == 1.0);
  CHECK(c.ep_variant == "cls");
  CHECK(c.adapter_rank == 4);
  CHECK(c.dataset_dims() == 7 + c.noise_dims);
}

TEST_CASE("one Adam step matches the closed form") {
  Var p = Var::parameter(Tensor::vector({1.0, -2.0, 0.5}));
  const Tensor g = Tensor::vector({0.3, -0.1, 0.0});
  AdamConfig cfg;
  cfg.learning_rate = 0.01;
  AdamState state;
  optimizer_step({p}, {g}, state, cfg);
  // After one step m_hat = g and v_hat = g^2.
  const double expected[3] = {1.0 - 0.01 * 0.3 / (0.3 + 1e-8), -2.0 + 0.01 * 0.1 / (0.1 + 1e-8), 0.5};
  for (std::size_t i = 0; i < 3; ++i) CHECK(p.value()[i] == doctest::Approx(expected[i]).epsilon(1e-14));
  CHECK(state.step == 1);
}

TEST_CASE("Adam second step matches a hand recurrence") {
  Var p = Var::parameter(Tensor::scalar(0.0));
  AdamConfig cfg;
  cfg.learning_rate = 0.1;
  cfg.weight_decay = 0.01;
  AdamState state;
  const double g1 = 1.0, g2 = -0.5;
  optimizer_step({p}, {Tensor::scalar(g1)}, state, cfg);
  const double after1 = p.value().item();
  optimizer_step({p}, {Tensor::scalar(g2)}, state, cfg);
  double m = 0.1 * g1, v = 0.001 * g1 * g1;
  double x = 0.0 - 0.1 * 0.01 * 0.0 - 0.1 * (m / 0.1) / (std::sqrt(v / 0.001) + 1e-8);
  CHECK(after1 == doctest::Approx(x).epsilon(1e-14));
  m = 0.9 * m + 0.1 * g2;
  v = 0.999 * v + 0.001 * g2 * g2;
  const double mh = m / (1 - 0.81), vh = v / (1 - 0.999 * 0.999);
  x = x - 0.1 * 0.01 * x - 0.1 * mh / (std::sqrt(vh) + 1e-8);
  CHECK(p.value().item() == doctest::Approx(x).epsilon(1e-12));
}

TEST_CASE("Adam rejects non-finite gradients before touching parameters") {
  Var a = Var::parameter(Tensor::vector({1.0}));
  Var b = Var::parameter(Tensor::vector({2.0}));
  AdamState state;
  CHECK_THROWS_AS(optimizer_step({a, b}, {Tensor::vector({0.1}), Tensor::vector({NAN})}, state, AdamConfig{}),
                  std::domain_error);
  CHECK(a.value()[0] == 1.0);
  CHECK(b.value()[0] == 2.0);
}

TEST_CASE("warm-up corpus is well formed") {
  const data::Vocabulary vocab = standard_vocabulary();
  const data::InstructionTemplate tmpl;
  const auto records = make_warmup_corpus(vocab, tmpl, data::builtin_datasets(), 300, 0.2, 0.3, 9, 4);
  REQUIRE(records.size() == 300);
  std::size_t hinted = 0;
  for (const auto& r : records) {
    CHECK(r.instruction_tokens.front() == data::special::kUser);
    CHECK(r.instruction_tokens.back() == data::special::kAssistant);
    CHECK(r.response_tokens.back() == data::special::kEos);
    CHECK(r.image_features.size() == 9);
    const auto img = std::find(r.instruction_tokens.begin(), r.instruction_tokens.end(), data::special::kImage);
    REQUIRE(img != r.instruction_tokens.end());
    if (*(img + 1) == r.response_tokens.front()) ++hinted;
  }
  CHECK(hinted > 60);
  CHECK(hinted < 130);
  const auto again = make_warmup_corpus(vocab, tmpl, data::builtin_datasets(), 300, 0.2, 0.3, 9, 4);
  for (std::size_t i = 0; i < 300; ++i) CHECK(again[i].instruction_tokens == records[i].instruction_tokens);
}

TEST_CASE("task preparation is seeded and the shifted draw differs") {
  const TrainingConfig c = tiny_config();
  const auto a = make_task_samples(c);
  CHECK(make_task_samples(c).train == a.train);
  TrainingConfig c2 = c;
  c2.seed = 1;
  CHECK_FALSE(make_task_samples(c2).train == a.train);
  CHECK(task_seed(c2) == c2.data_seed + 1);
  const auto shifted = make_shifted_samples(c);
  CHECK(shifted.train.front().sample_id.rfind("shifted-", 0) == 0);
  const auto view = incomplete_view(tiny().task, tiny().vocab);
  CHECK(view.train.size() == tiny().task.train.size());
  CHECK(view.train[0].instruction_tokens.size() < tiny().task.train[0].instruction_tokens.size());
  CHECK(view.train[0].response_tokens == tiny().task.train[0].response_tokens);
}

TEST_CASE("warm-up only moves base weights and keeps the image block empty") {
  const auto& base = tiny().base;
  const models::DecoderModel fresh(tiny().cfg.decoder_dims(tiny().vocab.size()), tiny().cfg.base_seed);
  CHECK(same_parameters(base, fresh, "adapter"));
  CHECK(same_parameters(base, fresh, "connector"));
  CHECK_FALSE(same_parameters(base, fresh, "tok_emb"));
  const std::size_t img = base.image_begin();
  for (std::size_t r = 0; r < base.out_w.value().rows(); ++r)
    for (std::size_t c = img; c < base.dims().d_model; ++c) CHECK(base.out_w.value().at(r, c) == 0.0);
}

TEST_CASE("stages train only their parameter groups") {
  Tiny& t = tiny();
  const Checkpoint start = start_checkpoint(t.base, t.cfg, Method::vitask, t.vocab.hash());
  const Checkpoint s1 = run_stage1(start, t.tsm, t.task.train, t.cfg);
  CHECK(s1.stage == 1);
  CHECK(same_parameters(s1.model, t.base, "layer0.w"));
  CHECK(same_parameters(s1.model, t.base, "tok_emb"));
  CHECK(same_parameters(s1.model, t.base, "vl_connector"));
  CHECK_FALSE(same_parameters(s1.model, t.base, "task_connector"));
  CHECK_FALSE(same_parameters(s1.model, t.base, "adapter"));
  const Checkpoint s2 = run_stage2(s1, t.tsm, t.task.train, t.cfg);
  CHECK(s2.stage == 2);
  CHECK(same_parameters(s2.model, s1.model, "task_connector"));
  CHECK_FALSE(same_parameters(s2.model, s1.model, "adapter"));
  for (const auto& row : s1.trace) CHECK(row.crt == 0.0);
  for (std::size_t i = s1.trace.size(); i < s2.trace.size(); ++i) {
    const auto& row = s2.trace[i];
    CHECK(row.total == doctest::Approx(row.van + row.ep + t.cfg.alpha * row.rda + t.cfg.beta * row.crt));
  }
}

TEST_CASE("vanilla records only the plain loss") {
  Tiny& t = tiny();
  const MethodRun run = train_method(t.base, t.tsm, t.task.train, t.cfg, Method::vanilla, t.vocab.hash());
  for (const auto& row : run.stage2.trace) {
    CHECK(row.ep == 0.0);
    CHECK(row.rda == 0.0);
    CHECK(row.crt == 0.0);
    CHECK(row.total == row.van);
  }
  CHECK(same_parameters(run.stage2.model, t.base, "task_connector"));
}

TEST_CASE("training is deterministic and resumes across a checkpoint file") {
  Tiny& t = tiny();
  const MethodRun a = train_method(t.base, t.tsm, t.task.train, t.cfg, Method::vitask, t.vocab.hash());
  const MethodRun b = train_method(t.base, t.tsm, t.task.train, t.cfg, Method::vitask, t.vocab.hash());
  CHECK(same_parameters(a.stage2.model, b.stage2.model));

  const fs::path dir = fs::temp_directory_path() / "vitask_pipeline_test";
  fs::remove_all(dir);
  fs::create_directories(dir);
  save_checkpoint(dir / "s1.ckpt", a.stage1);
  const Checkpoint loaded = load_checkpoint(dir / "s1.ckpt", t.vocab.hash());
  const Checkpoint resumed = run_stage2(loaded, t.tsm, t.task.train, t.cfg);
  CHECK(same_parameters(resumed.model, a.stage2.model));
  CHECK(resumed.trace.size() == a.stage2.trace.size());

  save_checkpoint(dir / "s2a.ckpt", a.stage2);
  save_checkpoint(dir / "s2b.ckpt", resumed);
  CHECK(read_text(dir / "s2a.ckpt") == read_text(dir / "s2b.ckpt"));
  CHECK_THROWS(load_checkpoint(dir / "s1.ckpt", t.vocab.hash() + 1));

  write_loss_trace(dir / "loss.csv", a.stage2.trace);
  const std::string csv = read_text(dir / "loss.csv");
  CHECK(csv.rfind("step,epoch,van,ep,rda,crt,total\n", 0) == 0);
}

TEST_CASE("swap_tsm checks the exemplar width") {
  Tiny& t = tiny();
  const Checkpoint start = start_checkpoint(t.base, t.cfg, Method::vitask, t.vocab.hash());
  const models::TsmModel narrow(t.cfg.dataset_dims(), t.cfg.d_t + 1, models::make_class_ranges({t.task.info}), 1);
  CHECK_THROWS_AS(swap_tsm(start, narrow), std::invalid_argument);
  const Checkpoint swapped = swap_tsm(start, t.tsm);
  CHECK(swapped.swapped_tsm_hash == t.tsm.hash());
  CHECK(same_parameters(swapped.model, start.model));
  CHECK(parse_method("vanilla") == Method::vanilla);
  CHECK_THROWS(parse_method("other"));
}
