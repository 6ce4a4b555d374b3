#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "doctest.h"
#include "oracles.hpp"
#include "vitask/data/synthetic.hpp"
#include "vitask/models/checkpoint.hpp"
#include "vitask/models/decoder.hpp"
#include "vitask/models/encoder.hpp"
#include "vitask/models/tsm.hpp"
#include "vitask/models/vlm.hpp"
#include "vitask/numerics/gradcheck.hpp"
#include "vitask/numerics/ops.hpp"
#include "vitask/objectives/losses.hpp"
#include "vitask/pipeline/recipe.hpp"

using namespace vitask;
using namespace vitask::models;
using numerics::Tensor;
namespace fs = std::filesystem;

namespace {

DecoderDims small_dims(std::size_t vocab) {
  DecoderDims d;
  d.vocab = vocab;
  d.d_model = 16;
  d.layers = 1;
  d.heads = 2;
  d.ff = 24;
  d.max_len = 48;
  d.patches = 2;
  d.d_v = 4;
  d.d_t = 6;
  d.rank = 2;
  d.input_dim = 9;
  return d;
}

void randomize(Var& v, std::mt19937_64& rng, double scale) {
  auto values = oracle::random_vector(v.value().size(), rng, scale);
  std::copy(values.begin(), values.end(), v.mutable_value().values().begin());
}

// Adapter B and the task connector start at zero; give them weight so both paths matter.
void activate_adapters(DecoderModel& model, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  for (DecoderLayer& layer : model.layers) {
    randomize(layer.q_adapter.b, rng, 0.3);
    randomize(layer.v_adapter.b, rng, 0.3);
  }
  randomize(model.tc_w, rng, 0.3);
}

struct Fixture {
  data::Vocabulary vocab = pipeline::standard_vocabulary();
  data::DatasetInfo info = data::dermatology_dataset();
  std::vector<data::ClassificationSample> samples = data::generate_synthetic_task(7, 9, 2, 4.0, 2, 5, "derma");
  std::vector<data::InstructionRecord> records = pipeline::format_records(samples, info, vocab);
  DecoderModel model{small_dims(vocab.size()), 3};
  TsmModel tsm{9, 6, make_class_ranges({info}), 4};
};

double max_abs_diff(const Tensor& a, const Tensor& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace

TEST_CASE("frozen encoder is linear without bias") {
  FrozenEncoder enc(5, 2, 3, 7);
  const std::vector<double> zero(5, 0.0);
  const Tensor at_zero = enc.patch_embeddings(zero);
  for (double v : at_zero.values()) CHECK(v == 0.0);
  std::mt19937_64 rng(1);
  const auto x = oracle::random_vector(5, rng);
  const auto y = oracle::random_vector(5, rng);
  std::vector<double> xy(5);
  for (std::size_t i = 0; i < 5; ++i) xy[i] = 2.0 * x[i] - y[i];
  const Tensor ex = enc.patch_embeddings(x), ey = enc.patch_embeddings(y), exy = enc.patch_embeddings(xy);
  for (std::size_t i = 0; i < ex.size(); ++i) CHECK(exy[i] == doctest::Approx(2.0 * ex[i] - ey[i]));
  const Tensor pooled = enc.pooled(x);
  CHECK(pooled.size() == 3);
  CHECK(pooled[1] == doctest::Approx((ex.at(0, 1) + ex.at(1, 1)) / 2.0));
}

TEST_CASE("encoder projection matches the matmul oracle") {
  std::mt19937_64 rng(2);
  const auto w = oracle::random_vector(6 * 4, rng);
  FrozenEncoder enc(Tensor({6, 4}, w), 2);
  const auto x = oracle::random_vector(4, rng);
  const auto ref = oracle::matmul(w, x, 6, 4, 1);
  const Tensor patches = enc.patch_embeddings(x);
  for (std::size_t i = 0; i < 6; ++i) CHECK(std::abs(patches[i] - static_cast<double>(ref[i])) < 1e-12);
}

TEST_CASE("base decoder is blind to the image") {
  Fixture f;
  const auto& rec = f.records[0];
  auto other = rec.image_features;
  for (double& v : other) v = -3.0 * v + 1.0;
  const Tensor a = vlm_forward(f.model, rec.image_features, rec.instruction_tokens, rec.response_tokens, nullptr,
                               EpVariant::none, false).logits.value();
  const Tensor b = vlm_forward(f.model, other, rec.instruction_tokens, rec.response_tokens, nullptr, EpVariant::none,
                               false).logits.value();
  CHECK(numerics::bit_identical(a, b));
}

TEST_CASE("adapters route image content into the logits") {
  Fixture f;
  activate_adapters(f.model, 9);
  const auto& rec = f.records[0];
  auto other = rec.image_features;
  for (double& v : other) v = -3.0 * v + 1.0;
  const Tensor a = vlm_forward(f.model, rec.image_features, rec.instruction_tokens, rec.response_tokens, nullptr,
                               EpVariant::none).logits.value();
  const Tensor b =
      vlm_forward(f.model, other, rec.instruction_tokens, rec.response_tokens, nullptr, EpVariant::none).logits.value();
  CHECK(max_abs_diff(a, b) > 1e-6);
}

TEST_CASE("enforce_image_block survives a warm-up style update") {
  Fixture f;
  std::mt19937_64 rng(4);
  randomize(f.model.layers[0].wq, rng, 1.0);
  randomize(f.model.out_w, rng, 1.0);
  f.model.enforce_image_block();
  const std::size_t img = f.model.image_begin();
  for (std::size_t r = 0; r < f.model.layers[0].wq.value().rows(); ++r)
    for (std::size_t c = img; c < 16; ++c) CHECK(f.model.layers[0].wq.value().at(r, c) == 0.0);
}

TEST_CASE("trainable sets per phase") {
  Fixture f;
  auto names = [&](TrainPhase phase) {
    f.model.set_trainable(phase);
    std::vector<std::string> out;
    for (auto& [name, p] : f.model.named_parameters())
      if (p.requires_grad()) out.push_back(name);
    return out;
  };
  for (const auto& n : names(TrainPhase::stage2)) CHECK(n.find("adapter") != std::string::npos);
  const auto s1 = names(TrainPhase::stage1);
  CHECK(std::count_if(s1.begin(), s1.end(), [](const std::string& n) { return n.rfind("task_connector", 0) == 0; }) == 2);
  for (const auto& n : names(TrainPhase::warmup)) {
    CHECK(n.find("adapter") == std::string::npos);
    CHECK(n.find("connector") == std::string::npos);
  }
  CHECK(names(TrainPhase::frozen).empty());
  CHECK(f.model.trainable_parameters().empty());
}

TEST_CASE("sequence layout for each exemplar variant") {
  Fixture f;
  const auto& instr = f.records[0].instruction_tokens;
  const std::size_t p = f.model.dims().patches;
  CHECK(prefix_length(f.model, instr, EpVariant::none) == instr.size() - 1 + p);
  CHECK(prefix_length(f.model, instr, EpVariant::cls) == instr.size() + p);
  CHECK(prefix_length(f.model, instr, EpVariant::all) == instr.size() - 1 + 2 * p);
  CHECK(prefix_length(f.model, instr, EpVariant::rep) == instr.size() - 1 + p);
  const auto ex = extract_exemplar(f.tsm, f.records[0].image_features, p);
  for (EpVariant v : {EpVariant::none, EpVariant::cls, EpVariant::all, EpVariant::rep}) {
    std::size_t assistant_row = 0;
    const data::TokenIds cont = {data::special::kEos};
    const Var seq = build_sequence(f.model, {&f.records[0].image_features, &instr, &ex, v}, cont, assistant_row);
    CHECK(seq.value().rows() == prefix_length(f.model, instr, v) + 1);
    CHECK(assistant_row == prefix_length(f.model, instr, v) - 1);
  }
  CHECK_THROWS(vlm_forward(f.records[0], f.model, nullptr, EpVariant::cls));
  CHECK(parse_ep_variant("all") == EpVariant::all);
  CHECK_THROWS(parse_ep_variant("bogus"));
}

TEST_CASE("exemplar prompting changes the logits once the task connector is live") {
  Fixture f;
  activate_adapters(f.model, 2);
  const auto plain = vlm_forward(f.records[1], f.model, &f.tsm, EpVariant::none);
  const auto ep = vlm_forward(f.records[1], f.model, &f.tsm, EpVariant::cls);
  CHECK(ep.ep_used);
  CHECK_FALSE(plain.ep_used);
  CHECK(plain.rows() == f.records[1].response_tokens.size());
  CHECK(max_abs_diff(plain.logits.value(), ep.logits.value()) > 1e-6);
}

TEST_CASE("exemplar features follow the TSM hidden layer") {
  Fixture f;
  const auto& x = f.samples[3].features;
  const auto ex = extract_exemplar(f.tsm, x, 3);
  const Tensor h = f.tsm.hidden(Var::constant(Tensor({1, 9}, x))).value();
  CHECK(numerics::bit_identical(ex.cls, Tensor({6}, std::vector<double>(h.values().begin(), h.values().end()))));
  CHECK(ex.patches.rows() == 3);
  std::vector<double> chunk(9, 0.0);
  for (std::size_t d = 3; d < 6; ++d) chunk[d] = x[d];
  const Tensor h1 = f.tsm.hidden(Var::constant(Tensor({1, 9}, chunk))).value();
  for (std::size_t c = 0; c < 6; ++c) CHECK(ex.patches.at(1, c) == h1[c]);
}

TEST_CASE("TSM masked loss matches the oracle") {
  const std::vector<data::DatasetInfo> datasets = {data::find_dataset("pneumonia"), data::find_dataset("oct")};
  TsmModel tsm(6, 5, make_class_ranges(datasets), 3);
  const auto a = data::generate_synthetic_task(2, 6, 2, 1.0, 4, 1, "pneumonia");
  const auto b = data::generate_synthetic_task(4, 6, 1, 1.0, 2, 2, "oct");
  std::vector<const data::ClassificationSample*> batch;
  for (const auto& s : a) batch.push_back(&s);
  for (const auto& s : b) batch.push_back(&s);
  long double expected = 0.0L;
  for (const auto* s : batch) {
    const Tensor z = tsm.logits(Var::constant(Tensor({1, 6}, s->features))).value();
    const ClassRange& r = tsm.range_of(s->dataset_id);
    std::vector<double> block(z.values().begin() + r.begin, z.values().begin() + r.begin + r.count);
    expected -= oracle::log_softmax(block)[s->label];
  }
  expected /= batch.size();
  CHECK(std::abs(tsm_masked_loss(tsm, batch).value().item() - static_cast<double>(expected)) < 1e-12);
  CHECK(make_class_ranges(datasets)[1].begin == 2);
  CHECK(tsm.predict(b[0].features, "oct") < 4);
}

TEST_CASE("TSM training reaches the logistic probe on separable data") {
  pipeline::TrainingConfig cfg;
  cfg.n_per_class = 40;
  const auto split = pipeline::make_task_samples(cfg);
  const auto info = data::find_dataset(cfg.dataset);
  const TsmModel tsm = pipeline::train_task_tsm(split, info, cfg);
  const double f1 = tsm_macro_f1(tsm, split.test, {info});

  std::vector<std::vector<double>> x;
  std::vector<std::size_t> y;
  for (const auto& s : split.train) {
    x.push_back(s.features);
    y.push_back(s.label);
  }
  oracle::LogisticProbe probe;
  probe.fit(x, y, info.class_names.size());
  std::size_t correct = 0;
  for (const auto& s : split.test) correct += probe.predict(s.features) == s.label;
  const double probe_acc = static_cast<double>(correct) / split.test.size();
  CHECK(f1 >= probe_acc - 0.05);
  CHECK(f1 > 0.9);
}

TEST_CASE("TSM hash tracks parameters and clone is independent") {
  TsmModel tsm(4, 3, make_class_ranges({data::find_dataset("pneumonia")}), 1);
  TsmModel copy = tsm.clone();
  CHECK(copy.hash() == tsm.hash());
  copy.w1.mutable_value()[0] += 1e-12;
  CHECK(copy.hash() != tsm.hash());
  CHECK(tsm.w1.value()[0] != copy.w1.value()[0]);
}

TEST_CASE("decoder clone is deep") {
  Fixture f;
  DecoderModel copy = f.model.clone();
  copy.tok_emb.mutable_value()[0] += 1.0;
  CHECK(copy.tok_emb.value()[0] != f.model.tok_emb.value()[0]);
}

TEST_CASE("checkpoint file round-trips decoder and TSM") {
  Fixture f;
  activate_adapters(f.model, 5);
  const fs::path dir = fs::temp_directory_path() / "vitask_models_test";
  fs::remove_all(dir);
  fs::create_directories(dir);
  CheckpointFile file;
  file.header["note"] = "x";
  store_decoder(file, f.model);
  store_tsm(file, f.tsm);
  write_checkpoint_file(dir / "m.ckpt", file);
  const CheckpointFile back = read_checkpoint_file(dir / "m.ckpt");
  CHECK(back.header["note"] == "x");
  const DecoderModel model = restore_decoder(back);
  CHECK(model.dims() == f.model.dims());
  const auto a = f.model.named_parameters();
  const auto b = model.named_parameters();
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].first == b[i].first);
    CHECK(numerics::bit_identical(a[i].second.value(), b[i].second.value()));
  }
  CHECK(restore_tsm(back).hash() == f.tsm.hash());

  save_tsm(dir / "t.ckpt", f.tsm);
  CHECK(load_tsm(dir / "t.ckpt").hash() == f.tsm.hash());
  CHECK_THROWS(require_vocab_hash(back, 12345, dir / "m.ckpt"));
  {
    std::ofstream bad(dir / "bad.ckpt", std::ios::binary);
    bad << "NOPE";
  }
  CHECK_THROWS(read_checkpoint_file(dir / "bad.ckpt"));
}

TEST_CASE("decoder forward passes the gradient check") {
  Fixture f;
  activate_adapters(f.model, 6);
  f.model.set_trainable(TrainPhase::stage1);
  const auto& rec = f.records[2];
  const auto params = f.model.trainable_parameters();
  auto loss = [&] {
    const auto out = vlm_forward(rec, f.model, &f.tsm, EpVariant::cls);
    return objectives::nll_loss(out, rec.response_tokens);
  };
  const auto report = numerics::check_gradients(loss, params);
  CAPTURE(report.worst_param);
  CAPTURE(report.worst_component);
  CAPTURE(report.worst_analytic);
  CAPTURE(report.worst_numeric);
  CHECK(report.max_relative_error < 1e-4);
}
