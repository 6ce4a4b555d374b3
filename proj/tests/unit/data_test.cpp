#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>

#include "doctest.h"
#include "vitask/data/corpus_io.hpp"
#include "vitask/data/feature_table.hpp"
#include "vitask/data/instruction.hpp"
#include "vitask/data/negative_sampling.hpp"
#include "vitask/data/split.hpp"
#include "vitask/data/synthetic.hpp"
#include "vitask/data/vocabulary.hpp"
#include "vitask/numerics/random.hpp"

using namespace vitask::data;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("vitask_data_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
}

}  // namespace

TEST_CASE("split_words handles markers and punctuation") {
  const auto words = split_words("<|user|><image>Analyze  the IMAGE: a, b.<|assistant|>");
  const std::vector<std::string> expected = {"<|user|>", "<image>", "analyze", "the", "image", ":",
                                             "a",        ",",       "b",       ".",   "<|assistant|>"};
  CHECK(words == expected);
  CHECK(normalize_text("  Hello   World ") == "hello world");
}

TEST_CASE("vocabulary reserves specials and round-trips text") {
  const std::vector<std::string> corpus = {"melanoma nevi", "the possible diagnoses are: melanoma."};
  const Vocabulary vocab = Vocabulary::build(corpus);
  CHECK(vocab.token(special::kPad) == kPadToken);
  CHECK(vocab.token(special::kEos) == kEosToken);
  CHECK(vocab.id("melanoma") >= special::kCount);
  const std::string text = "the possible diagnoses are : melanoma .";
  CHECK(vocab.detokenize(vocab.tokenize(text)) == text);
  CHECK_THROWS(vocab.tokenize("unknownword"));
}

TEST_CASE("vocabulary save and load preserve ids and hash") {
  const fs::path dir = scratch_dir("vocab");
  const Vocabulary vocab = Vocabulary::build(std::vector<std::string>{"b a c"});
  vocab.save(dir / "vocab.txt");
  const Vocabulary back = Vocabulary::load(dir / "vocab.txt");
  CHECK(back.tokens() == vocab.tokens());
  CHECK(back.hash() == vocab.hash());
}

TEST_CASE("synthetic task shape and labels") {
  const auto samples = generate_synthetic_task(3, 5, 4, 2.0, 2, 9, "derma");
  REQUIRE(samples.size() == 12);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    CHECK(samples[i].label == i % 3);
    CHECK(samples[i].features.size() == 5);
    CHECK(samples[i].dataset_id == "derma");
  }
  CHECK(samples[0].sample_id == "derma-00000");
  CHECK(generate_synthetic_task(3, 5, 4, 2.0, 2, 9, "derma") == samples);
  CHECK_FALSE(generate_synthetic_task(3, 5, 4, 2.0, 2, 10, "derma") == samples);
  CHECK_THROWS_AS(generate_synthetic_task(3, 6, 4, 2.0, 2, 9), std::invalid_argument);
  CHECK_THROWS_AS(generate_synthetic_task(1, 1, 4, 2.0, 0, 9), std::invalid_argument);
}

TEST_CASE("synthetic class means sit on their axis") {
  const double sep = 3.0;
  const auto samples = generate_synthetic_task(4, 6, 2000, sep, 2, 1, "task");
  std::vector<std::vector<double>> mean(4, std::vector<double>(6, 0.0));
  for (const auto& s : samples)
    for (std::size_t d = 0; d < 6; ++d) mean[s.label][d] += s.features[d] / 2000.0;
  for (std::size_t k = 0; k < 4; ++k)
    for (std::size_t d = 0; d < 6; ++d) CHECK(std::abs(mean[k][d] - (d == k ? sep : 0.0)) < 0.1);
}

TEST_CASE("mean shift has the requested magnitude on class axes") {
  const auto shift = random_mean_shift(9, 7, 2.5, 4);
  double norm = 0.0;
  for (std::size_t d = 0; d < 9; ++d) norm += shift[d] * shift[d];
  CHECK(std::sqrt(norm) == doctest::Approx(2.5));
  CHECK(shift[7] == 0.0);
  CHECK(shift[8] == 0.0);
  auto samples = generate_synthetic_task(7, 9, 1, 1.0, 2, 3);
  const auto before = samples;
  apply_mean_shift(samples, shift);
  for (std::size_t i = 0; i < samples.size(); ++i)
    for (std::size_t d = 0; d < 9; ++d) CHECK(samples[i].features[d] == before[i].features[d] + shift[d]);
}

TEST_CASE("split sizes follow largest remainder and stratify") {
  for (std::size_t n : {7u, 10u, 33u, 100u}) {
    const auto samples = generate_synthetic_task(3, 3, n, 1.0, 0, n);
    const auto split = split_dataset(samples, kDefaultSplitRatios, 5);
    const std::size_t total = samples.size();
    CHECK(split.train.size() + split.val.size() + split.test.size() == total);
    const double ideal[3] = {0.7 * total, 0.1 * total, 0.2 * total};
    const std::size_t sizes[3] = {split.train.size(), split.val.size(), split.test.size()};
    for (int i = 0; i < 3; ++i) CHECK(std::abs(static_cast<double>(sizes[i]) - ideal[i]) < 1.0);
    std::set<std::string> ids;
    for (const auto* part : {&split.train, &split.val, &split.test})
      for (const auto& s : *part) ids.insert(s.sample_id);
    CHECK(ids.size() == total);
    std::map<std::size_t, std::size_t> train_per_class;
    for (const auto& s : split.train) ++train_per_class[s.label];
    for (const auto& [label, count] : train_per_class) {
      CHECK(static_cast<double>(count) >= std::floor(0.7 * n) - 1);
      CHECK(static_cast<double>(count) <= std::ceil(0.7 * n) + 1);
    }
  }
}

TEST_CASE("split is deterministic for a seed") {
  const auto samples = generate_synthetic_task(3, 3, 20, 1.0, 0, 2);
  const auto a = split_dataset(samples, kDefaultSplitRatios, 1);
  const auto b = split_dataset(samples, kDefaultSplitRatios, 1);
  CHECK(a.train == b.train);
  CHECK(a.test == b.test);
}

TEST_CASE("feature table round-trips bit-exactly") {
  const fs::path dir = scratch_dir("features");
  auto samples = generate_synthetic_task(2, 3, 3, 1.0, 1, 6, "pneumonia");
  samples[0].features[0] = 0.1;
  samples[1].features[1] = -1e-300;
  save_feature_table(dir / "f.csv", samples);
  const auto back = load_feature_table(dir / "f.csv", builtin_datasets());
  CHECK(back == samples);
}

TEST_CASE("feature table errors name the line") {
  const fs::path dir = scratch_dir("bad_features");
  write_file(dir / "bad.csv", "sample_id,dataset_id,label,f0\na,derma,0,1.0\nb,derma,0,abc\n");
  try {
    load_feature_table(dir / "bad.csv");
    FAIL("expected an error");
  } catch (const std::exception& e) {
    const std::string msg = e.what();
    CHECK(msg.find("bad.csv") != std::string::npos);
    CHECK(msg.find('3') != std::string::npos);
  }
  write_file(dir / "label.csv", "sample_id,dataset_id,label,f0\na,pneumonia,5,1.0\n");
  CHECK_THROWS(load_feature_table(dir / "label.csv", builtin_datasets()));
  write_file(dir / "ragged.csv", "sample_id,dataset_id,label,f0,f1\na,derma,0,1.0\n");
  CHECK_THROWS(load_feature_table(dir / "ragged.csv"));
}

TEST_CASE("parse_double is strict") {
  CHECK(parse_double("1.5") == 1.5);
  CHECK(parse_double("-2e3") == -2000.0);
  CHECK_THROWS(parse_double("1.5x"));
  CHECK_THROWS(parse_double(""));
  CHECK(parse_double(format_double(0.1)) == 0.1);
}

TEST_CASE("instruction rendering and incomplete form") {
  const InstructionTemplate tmpl;
  const DatasetInfo info = dermatology_dataset();
  const Vocabulary vocab = build_task_vocabulary(tmpl, builtin_datasets());
  const auto samples = generate_synthetic_task(7, 9, 1, 1.0, 2, 1, "derma");
  const InstructionRecord rec = format_instruction(samples[4], tmpl, info, vocab);
  CHECK(rec.instruction_tokens.front() == special::kUser);
  CHECK(rec.instruction_tokens.back() == special::kAssistant);
  CHECK(std::count(rec.instruction_tokens.begin(), rec.instruction_tokens.end(), special::kImage) == 1);
  CHECK(rec.response_tokens.back() == special::kEos);
  CHECK(response_text(rec, vocab) == "melanoma");
  CHECK(instruction_text(rec, vocab).find("melanocytic nevi") != std::string::npos);

  const InstructionRecord inc = make_incomplete(rec, tmpl, info, vocab);
  CHECK(inc.response_tokens == rec.response_tokens);
  CHECK(inc.instruction_tokens.size() < rec.instruction_tokens.size());
  CHECK(instruction_text(inc, vocab).find("possible diagnoses") == std::string::npos);
  CHECK(make_incomplete(inc, tmpl, info, vocab).instruction_tokens == inc.instruction_tokens);
}

TEST_CASE("corpus jsonl round-trip") {
  const fs::path dir = scratch_dir("corpus");
  const InstructionTemplate tmpl;
  const DatasetInfo info = find_dataset("oct");
  const Vocabulary vocab = build_task_vocabulary(tmpl, builtin_datasets());
  const auto samples = generate_synthetic_task(4, 6, 2, 1.0, 2, 3, "oct");
  std::vector<InstructionRecord> records;
  for (const auto& s : samples) records.push_back(format_instruction(s, tmpl, info, vocab));
  save_corpus(dir / "c.jsonl", records, vocab);
  std::ifstream in(dir / "c.jsonl");
  std::string first;
  std::getline(in, first);
  CHECK(first.rfind("{\"sample_id\":", 0) == 0);
  const auto back = load_corpus(dir / "c.jsonl", vocab, samples);
  REQUIRE(back.size() == records.size());
  for (std::size_t i = 0; i < back.size(); ++i) {
    CHECK(back[i].instruction_tokens == records[i].instruction_tokens);
    CHECK(back[i].response_tokens == records[i].response_tokens);
    CHECK(back[i].image_features == records[i].image_features);
  }
}

TEST_CASE("negatives share the instruction and differ in response") {
  const InstructionTemplate tmpl;
  const DatasetInfo info = find_dataset("oct");
  const Vocabulary vocab = build_task_vocabulary(tmpl, builtin_datasets());
  const auto samples = generate_synthetic_task(4, 6, 5, 1.0, 2, 3, "oct");
  std::vector<InstructionRecord> records;
  for (const auto& s : samples) records.push_back(format_instruction(s, tmpl, info, vocab));
  auto rng = vitask::numerics::make_rng(1, 2);
  const NegativeSampler sampler(records);
  sampler.require_all_eligible();
  std::map<std::size_t, int> hits;
  for (int t = 0; t < 4000; ++t) {
    const std::size_t j = sampler.sample(0, rng);
    CHECK(records[j].instruction_tokens == records[0].instruction_tokens);
    CHECK(records[j].response_tokens != records[0].response_tokens);
    ++hits[j];
  }
  CHECK(hits.size() == 15);
  for (const auto& [j, n] : hits) CHECK(std::abs(n - 4000.0 / 15.0) < 80.0);
  const InstructionRecord& neg = sample_negative(records[1], records, rng);
  CHECK(neg.label != records[1].label);

  std::vector<InstructionRecord> one_class;
  for (const auto& r : records)
    if (r.label == 0) one_class.push_back(r);
  CHECK_THROWS_WITH(sample_negative(one_class[0], one_class, rng), doctest::Contains("no valid negative"));
  CHECK_THROWS(NegativeSampler(one_class).require_all_eligible());
}
