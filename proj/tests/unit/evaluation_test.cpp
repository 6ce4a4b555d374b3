#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "doctest.h"
#include "oracles.hpp"
#include "vitask/data/synthetic.hpp"
#include "vitask/evaluation/metrics.hpp"
#include "vitask/evaluation/predict.hpp"
#include "vitask/evaluation/ranking.hpp"
#include "vitask/evaluation/report.hpp"
#include "vitask/evaluation/robustness.hpp"
#include "vitask/pipeline/recipe.hpp"

using namespace vitask;
using namespace vitask::evaluation;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("vitask_eval_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string read_text(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

models::DecoderDims small_dims(std::size_t vocab) {
  models::DecoderDims d;
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
  d.input_dim = 6;
  return d;
}

struct Fixture {
  data::Vocabulary vocab = pipeline::standard_vocabulary();
  data::DatasetInfo info = data::find_dataset("oct");
  std::vector<data::ClassificationSample> samples = data::generate_synthetic_task(4, 6, 3, 4.0, 2, 5, "oct");
  std::vector<data::InstructionRecord> records = pipeline::format_records(samples, info, vocab);
  models::DecoderModel model{small_dims(vocab.size()), 3};
};

void activate_adapters(models::DecoderModel& model, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  for (auto& layer : model.layers) {
    for (numerics::Var* v : {&layer.q_adapter.b, &layer.v_adapter.b}) {
      const auto values = oracle::random_vector(v->value().size(), rng, 0.5);
      std::copy(values.begin(), values.end(), v->mutable_value().values().begin());
    }
  }
}

}  // namespace

TEST_CASE("metrics on a hand-worked confusion") {
  // labels 0 0 1 1 2 ; preds 0 1 1 R 1
  const std::vector<std::size_t> labels = {0, 0, 1, 1, 2};
  const std::vector<std::size_t> preds = {0, 1, 1, kReject, 1};
  const MetricsReport r = compute_metrics(preds, labels, 4);
  CHECK(r.accuracy == doctest::Approx(0.4));
  CHECK(r.reject_rate == doctest::Approx(0.2));
  CHECK(r.per_class[0].precision == 1.0);
  CHECK(r.per_class[0].recall == 0.5);
  CHECK(r.per_class[1].precision == doctest::Approx(1.0 / 3.0));
  CHECK(r.per_class[1].recall == 0.5);
  CHECK(r.per_class[1].f1 == doctest::Approx(0.4));
  CHECK(r.per_class[2].f1 == 0.0);
  CHECK(r.per_class[3].f1 == 0.0);
  CHECK(r.macro_f1 == doctest::Approx((2.0 / 3.0 + 0.4) / 4.0));
}

TEST_CASE("metrics edge cases") {
  const std::vector<std::size_t> labels = {0, 1, 2};
  CHECK(compute_metrics(labels, labels, 3).macro_f1 == 1.0);
  const std::vector<std::size_t> rejects(3, kReject);
  const MetricsReport r = compute_metrics(rejects, labels, 3);
  CHECK(r.accuracy == 0.0);
  CHECK(r.macro_f1 == 0.0);
  CHECK(r.reject_rate == 1.0);
  CHECK_THROWS(compute_metrics(std::vector<std::size_t>{}, std::vector<std::size_t>{}, 3));
  CHECK_THROWS(compute_metrics(std::vector<std::size_t>{5}, std::vector<std::size_t>{0}, 3));
}

TEST_CASE("metrics match a brute-force oracle on random inputs") {
  std::mt19937_64 rng(4);
  std::uniform_int_distribution<std::size_t> pick(0, 4);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<std::size_t> labels(30), preds(30);
    for (auto& l : labels) l = pick(rng) % 4;
    for (auto& p : preds) {
      p = pick(rng);
      if (p == 4) p = kReject;
    }
    double f1_sum = 0.0;
    for (std::size_t c = 0; c < 4; ++c) {
      double tp = 0, fp = 0, fn = 0;
      for (std::size_t i = 0; i < 30; ++i) {
        tp += preds[i] == c && labels[i] == c;
        fp += preds[i] == c && labels[i] != c;
        fn += preds[i] != c && labels[i] == c;
      }
      f1_sum += tp > 0 ? 2 * tp / (2 * tp + fp + fn) : 0.0;
    }
    CHECK(compute_metrics(preds, labels, 4).macro_f1 == doctest::Approx(f1_sum / 4.0).epsilon(1e-12));
  }
}

TEST_CASE("density histogram has unit area") {
  const std::vector<double> values = {0.0, 0.1, 0.1, 0.55, 0.999, 1.0};
  const Histogram h = density_histogram(values, 10);
  REQUIRE(h.density.size() == 10);
  double area = 0.0;
  for (double d : h.density) area += d * 0.1;
  CHECK(area == doctest::Approx(1.0));
  CHECK(h.density[9] == doctest::Approx(2.0 / 6.0 / 0.1));
  for (double d : density_histogram({}, 5).density) CHECK(d == 0.0);
}

TEST_CASE("image-blind model ties every pair") {
  Fixture f;
  const auto pairs = make_ranking_pairs(f.records, 3);
  REQUIRE(pairs.size() == f.records.size());
  for (const auto& p : pairs) {
    CHECK(p.anchor->instruction_tokens == p.negative->instruction_tokens);
    CHECK(p.anchor->response_tokens != p.negative->response_tokens);
  }
  const RankingReport r = ranking_stats(f.model, pairs, EpConfig{nullptr, models::EpVariant::none, false});
  CHECK(r.ranking_fraction == 0.0);
  CHECK(r.pos_probs.size() == r.neg_probs.size());
  for (std::size_t i = 0; i < r.pos_probs.size(); ++i) CHECK(r.pos_probs[i] == r.neg_probs[i]);
}

TEST_CASE("ranking fraction is invariant to a constant logit shift") {
  Fixture f;
  activate_adapters(f.model, 8);
  const auto pairs = make_ranking_pairs(f.records, 5);
  const RankingReport before = ranking_stats(f.model, pairs, EpConfig{});
  CHECK(before.ranking_fraction > 0.0);
  CHECK(before.ranking_fraction <= 1.0);
  for (double& b : f.model.out_b.mutable_value().values()) b += 4.0;
  const RankingReport after = ranking_stats(f.model, pairs, EpConfig{});
  CHECK(after.ranking_fraction == before.ranking_fraction);
  for (std::size_t i = 0; i < before.pos_probs.size(); ++i)
    CHECK(after.pos_probs[i] == doctest::Approx(before.pos_probs[i]).epsilon(1e-12));
}

TEST_CASE("mean token probability matches the softmax oracle") {
  Fixture f;
  activate_adapters(f.model, 9);
  const auto& rec = f.records[0];
  const auto out = models::vlm_forward(rec, f.model, nullptr, models::EpVariant::none);
  const numerics::Tensor& z = out.logits.value();
  long double total = 0.0L;
  for (std::size_t t = 0; t < z.rows(); ++t) {
    std::vector<double> row(z.row(t).begin(), z.row(t).end());
    total += oracle::softmax(row)[rec.response_tokens[t]];
  }
  const double got = mean_token_probability(f.model, rec.image_features, rec.instruction_tokens, rec.response_tokens,
                                            EpConfig{});
  CHECK(std::abs(got - static_cast<double>(total / z.rows())) < 1e-12);
}

TEST_CASE("decoding modes on an untrained model") {
  Fixture f;
  const auto classes = class_responses(f.info, f.vocab);
  REQUIRE(classes.size() == 4);
  for (const auto& rec : f.records) {
    const std::size_t g = predict(f.model, rec, DecodeMode::greedy, EpConfig{}, classes);
    CHECK((g == kReject || g < 4));
    CHECK(predict(f.model, rec, DecodeMode::class_likelihood, EpConfig{}, classes) < 4);
    CHECK(greedy_decode(f.model, rec, EpConfig{}, 5).size() <= 5);
  }
  const MetricsReport r = evaluate(f.model, f.records, DecodeMode::class_likelihood, EpConfig{}, f.info, f.vocab);
  CHECK(r.reject_rate == 0.0);
  CHECK(r.n_samples == f.records.size());
  CHECK(parse_decode_mode("class-likelihood") == DecodeMode::class_likelihood);
  CHECK_THROWS(parse_decode_mode("beam"));
}

TEST_CASE("metrics csv round-trip") {
  const fs::path dir = scratch("metrics");
  MetricsReport r = compute_metrics(std::vector<std::size_t>{0, 1, 1}, std::vector<std::size_t>{0, 1, 0}, 2);
  r.method = "vitask";
  r.seed = 2;
  r.ep_used = true;
  emit_report(r, dir / "m.csv");
  const std::string text = read_text(dir / "m.csv");
  CHECK(text.rfind("method,seed,ep_used,accuracy,macro_f1,reject_rate\n", 0) == 0);
  CHECK(text.find("class,precision,recall,f1\n") != std::string::npos);
  const MetricsReport back = read_metrics_csv(dir / "m.csv");
  CHECK(back.method == "vitask");
  CHECK(back.ep_used);
  CHECK(back.macro_f1 == r.macro_f1);
  CHECK(back.per_class.size() == 2);
}

TEST_CASE("ranking csv and svg") {
  const fs::path dir = scratch("ranking");
  RankingReport r;
  r.pos_probs = {0.9, 0.4, 0.5};
  r.neg_probs = {0.1, 0.6, 0.5};
  r.ranking_fraction = 1.0 / 3.0;
  r.pos_hist = density_histogram(r.pos_probs, 4);
  r.neg_hist = density_histogram(r.neg_probs, 4);
  emit_report(r, dir / "r.csv", ReportFormat::csv);
  const auto rows = read_ranking_csv(dir / "r.csv");
  REQUIRE(rows.size() == 3);
  CHECK(rows[0].strict_win);
  CHECK_FALSE(rows[1].strict_win);
  CHECK_FALSE(rows[2].strict_win);
  CHECK(read_text(dir / "r.csv").rfind("pair_id,pos_prob,neg_prob,strict_win\n", 0) == 0);
  emit_report(r, dir / "r.svg", ReportFormat::svg_histogram, "vanilla");
  const std::string svg = read_text(dir / "r.svg");
  CHECK(svg.rfind("<svg", 0) == 0);
  CHECK(svg.find("vanilla") != std::string::npos);
  CHECK(svg.find("class=\"pos\"") != std::string::npos);
  CHECK(svg.find("class=\"neg\"") != std::string::npos);
}

TEST_CASE("robustness csv schema") {
  const fs::path dir = scratch("robustness");
  RobustnessResult v;
  v.method = pipeline::Method::vanilla;
  v.full = compute_metrics(std::vector<std::size_t>{0, 1}, std::vector<std::size_t>{0, 1}, 2);
  v.incomplete = compute_metrics(std::vector<std::size_t>{0, 0}, std::vector<std::size_t>{0, 1}, 2);
  v.f1_drop = v.full.macro_f1 - v.incomplete.macro_f1;
  v.full.seed = 3;
  write_robustness_csv(dir / "rob.csv", {v});
  const std::string text = read_text(dir / "rob.csv");
  CHECK(text.rfind("method,seed,f1_full,f1_incomplete,f1_drop\nvanilla,3,", 0) == 0);
}
