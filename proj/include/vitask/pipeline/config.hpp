#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"
#include "vitask/models/decoder.hpp"
#include "vitask/models/tsm.hpp"
#include "vitask/models/vlm.hpp"
#include "vitask/pipeline/optimizer.hpp"

namespace vitask::pipeline {

/// Every tunable of a run. Serialized as flat key=value text and embedded in
/// checkpoints and manifests.
struct TrainingConfig {
  // data
  std::string dataset = "derma";
  std::size_t n_per_class = 60;
  double separation = 6.0;
  std::size_t noise_dims = 9;
  std::uint64_t data_seed = 0;
  double shift_magnitude = 6.0;

  // decoder and adapters
  std::size_t d_model = 64;
  std::size_t layers = 2;
  std::size_t heads = 2;
  std::size_t ff = 256;
  std::size_t max_len = 96;
  std::size_t patches = 4;
  std::size_t d_v = 16;
  std::size_t d_t = 32;
  std::size_t adapter_rank = 4;

  // warm-up of the base decoder
  std::uint64_t base_seed = 1;
  std::size_t warmup_records = 2000;
  std::size_t warmup_epochs = 2;
  double warmup_learning_rate = 3e-3;
  std::size_t warmup_batch_size = 32;
  double warmup_no_list_fraction = 0.2;
  double warmup_hint_fraction = 0.3;

  // task-specific model
  std::size_t tsm_epochs = 30;
  std::size_t tsm_batch_size = 32;
  double tsm_learning_rate = 1e-2;

  // VITask stages
  double alpha = 1.0;
  double beta = 1.0;
  std::string ep_variant = "cls";
  std::size_t epochs_stage1 = 1;
  std::size_t epochs_stage2 = 1;
  double learning_rate = 1e-3;
  std::size_t batch_size = 32;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  double weight_decay = 0.0;
  std::uint64_t seed = 0;
  bool check_frozen = false;

  // evaluation
  std::string decode = "greedy";
  std::size_t histogram_bins = 40;

  models::EpVariant variant() const { return models::parse_ep_variant(ep_variant); }
  AdamConfig adam() const;
  models::TsmConfig tsm() const;
  models::DecoderDims decoder_dims(std::size_t vocab) const;
  /// Feature length D = class count + noise_dims.
  std::size_t dataset_dims() const;

  /// Throws std::invalid_argument naming the offending key.
  void validate() const;

  friend bool operator==(const TrainingConfig&, const TrainingConfig&) = default;
};

/// Parses `key=value` lines; blank lines and `#` comments are skipped. Keys
/// not listed in TrainingConfig are errors, as are malformed values.
TrainingConfig parse_config(const std::string& text, TrainingConfig base = {});
TrainingConfig load_config(const std::filesystem::path& path);

/// Applies one `key=value` assignment.
void set_config_value(TrainingConfig& config, const std::string& key, const std::string& value);

/// Canonical text: every key in declaration order.
std::string format_config(const TrainingConfig& config);
nlohmann::ordered_json config_to_json(const TrainingConfig& config);
TrainingConfig config_from_json(const nlohmann::json& j);

std::vector<std::string> config_keys();

}  // namespace vitask::pipeline
