#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "doctest.h"
#include "json.hpp"
#include "vitask/cli/cli.hpp"

namespace fs = std::filesystem;

namespace {

const char* kTinyConfig =
    "dataset=oct\nn_per_class=5\nnoise_dims=2\nd_model=16\nlayers=1\nheads=2\nff=24\npatches=2\nd_v=4\nd_t=6\n"
    "adapter_rank=2\nwarmup_records=24\nwarmup_epochs=1\nwarmup_batch_size=8\ntsm_epochs=3\nbatch_size=4\n";

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("vitask_cli_test_" + name);
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

fs::path write_config(const fs::path& dir) {
  const fs::path p = dir / "tiny.conf";
  std::ofstream(p) << kTinyConfig;
  return p;
}

int run(std::vector<std::string> args) {
  args.insert(args.begin(), "vitask");
  return vitask::cli::run(args);
}

std::map<std::string, std::string> snapshot(const fs::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(dir))
    if (e.is_regular_file()) out[fs::relative(e.path(), dir).string()] = read_text(e.path());
  return out;
}

}  // namespace

TEST_CASE("usage errors exit with 1") {
  const fs::path dir = fresh_dir("usage");
  CHECK(run({}) == 1);
  CHECK(run({"--out", dir.string()}) == 1);
  CHECK(run({"--out", dir.string(), "frobnicate"}) == 1);
  CHECK(run({"--out", dir.string(), "train"}) == 1);
  CHECK(run({"--out", dir.string(), "train", "--stage", "3"}) == 1);
  CHECK(run({"--out", dir.string(), "--seed", "x1", "prepare-data"}) == 1);
  CHECK(run({"--help"}) == 0);
}

TEST_CASE("runtime errors exit with 2") {
  const fs::path dir = fresh_dir("runtime");
  std::ofstream(dir / "bad.conf") << "gamma=3\n";
  CHECK(run({"--config", (dir / "bad.conf").string(), "--out", dir.string(), "prepare-data"}) == 2);
  CHECK(run({"--config", (dir / "missing.conf").string(), "--out", dir.string(), "prepare-data"}) == 2);
  const fs::path cfg = write_config(dir);
  REQUIRE(run({"--config", cfg.string(), "--out", dir.string(), "prepare-data"}) == 0);
  CHECK(run({"--config", cfg.string(), "--out", dir.string(), "train", "--stage", "1"}) == 2);
  REQUIRE(run({"--config", cfg.string(), "--out", dir.string(), "train-tsm"}) == 0);
  CHECK(run({"--config", cfg.string(), "--out", dir.string(), "train", "--stage", "2"}) == 2);
  CHECK_FALSE(fs::exists(dir / "vitask_stage2.ckpt"));
  CHECK(run({"--config", cfg.string(), "--out", dir.string(), "eval", "--checkpoint", (dir / "nope.ckpt").string()}) == 2);
}

TEST_CASE("prepare-data is idempotent and writes a manifest") {
  const fs::path dir = fresh_dir("prepare");
  const fs::path cfg = write_config(fs::temp_directory_path());
  const fs::path out = dir / "run";
  REQUIRE(run({"--config", cfg.string(), "--seed", "2", "--out", out.string(), "prepare-data"}) == 0);
  const auto first = snapshot(out);
  for (const char* f : {"config.txt", "vocab.txt", "train_features.csv", "val_features.csv", "test_features.csv",
                        "train.jsonl", "test.jsonl", "shifted_train_features.csv", "manifest_prepare-data.json"}) {
    CAPTURE(f);
    CHECK(first.count(f) == 1);
  }
  CHECK(first.at("train_features.csv").rfind("sample_id,dataset_id,label,f0,", 0) == 0);
  const auto manifest = nlohmann::json::parse(first.at("manifest_prepare-data.json"));
  CHECK(manifest["command"] == "prepare-data");
  CHECK(manifest["seed"] == 2);
  CHECK(manifest["config"]["dataset"] == "oct");
  REQUIRE(run({"--config", cfg.string(), "--seed", "2", "--out", out.string(), "prepare-data"}) == 0);
  CHECK(snapshot(out) == first);
  for (const auto& e : fs::directory_iterator(dir)) CHECK(e.path() == out);
}

TEST_CASE("full recipe through the command line") {
  const fs::path dir = fresh_dir("recipe");
  const fs::path cfg = write_config(fs::temp_directory_path());
  const std::string out = dir.string();
  auto cmd = [&](std::vector<std::string> rest) {
    std::vector<std::string> args = {"--config", cfg.string(), "--out", out};
    args.insert(args.end(), rest.begin(), rest.end());
    return run(args);
  };
  REQUIRE(cmd({"prepare-data"}) == 0);
  REQUIRE(cmd({"train-tsm"}) == 0);
  CHECK(fs::exists(dir / "tsm.ckpt"));
  REQUIRE(cmd({"train", "--stage", "1"}) == 0);
  REQUIRE(cmd({"train", "--stage", "2"}) == 0);
  REQUIRE(cmd({"train", "--stage", "1", "--method", "vanilla"}) == 0);
  REQUIRE(cmd({"train", "--stage", "2", "--method", "vanilla"}) == 0);
  for (const char* f : {"base.ckpt", "vitask_stage1.ckpt", "vitask_stage2.ckpt", "vitask_stage2_loss.csv",
                        "vanilla_stage2.ckpt", "manifest_train-vitask-stage2.json", "manifest_train-vanilla-stage1.json"}) {
    CAPTURE(f);
    CHECK(fs::exists(dir / f));
  }
  CHECK(read_text(dir / "vitask_stage2_loss.csv").rfind("step,epoch,van,ep,rda,crt,total\n", 0) == 0);

  REQUIRE(cmd({"eval", "--checkpoint", (dir / "vitask_stage2.ckpt").string(), "--name", "vit"}) == 0);
  CHECK(read_text(dir / "metrics_vit.csv").rfind("method,seed,ep_used,accuracy,macro_f1,reject_rate\n", 0) == 0);
  REQUIRE(cmd({"density", "--checkpoint", (dir / "base.ckpt").string(), "--checkpoint",
               (dir / "vanilla_stage2.ckpt").string(), "--checkpoint", (dir / "vitask_stage2.ckpt").string()}) == 0);
  for (const char* label : {"no-tuning", "vanilla", "crt"}) {
    CHECK(fs::exists(dir / ("ranking_" + std::string(label) + ".csv")));
    CHECK(fs::exists(dir / ("density_" + std::string(label) + ".svg")));
  }

  // Re-running stage 2 from the saved stage-1 checkpoint reproduces the bytes.
  const std::string before = read_text(dir / "vitask_stage2.ckpt");
  REQUIRE(cmd({"train", "--stage", "2"}) == 0);
  CHECK(read_text(dir / "vitask_stage2.ckpt") == before);
}
