#include "vitask/pipeline/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>
#include <stdexcept>
#include <variant>

#include "vitask/data/feature_table.hpp"
#include "vitask/data/synthetic.hpp"

namespace vitask::pipeline {

namespace {

static_assert(std::is_same_v<std::size_t, std::uint64_t>, "unsigned config fields share one representation");

using Field =
    std::variant<std::string TrainingConfig::*, std::size_t TrainingConfig::*, double TrainingConfig::*, bool TrainingConfig::*>;

struct Entry {
  const char* key;
  Field field;
};

const std::vector<Entry>& entries() {
  using C = TrainingConfig;
  static const std::vector<Entry> table = {
      {"dataset", &C::dataset},
      {"n_per_class", &C::n_per_class},
      {"separation", &C::separation},
      {"noise_dims", &C::noise_dims},
      {"data_seed", &C::data_seed},
      {"shift_magnitude", &C::shift_magnitude},
      {"d_model", &C::d_model},
      {"layers", &C::layers},
      {"heads", &C::heads},
      {"ff", &C::ff},
      {"max_len", &C::max_len},
      {"patches", &C::patches},
      {"d_v", &C::d_v},
      {"d_t", &C::d_t},
      {"adapter_rank", &C::adapter_rank},
      {"base_seed", &C::base_seed},
      {"warmup_records", &C::warmup_records},
      {"warmup_epochs", &C::warmup_epochs},
      {"warmup_learning_rate", &C::warmup_learning_rate},
      {"warmup_batch_size", &C::warmup_batch_size},
      {"warmup_no_list_fraction", &C::warmup_no_list_fraction},
      {"warmup_hint_fraction", &C::warmup_hint_fraction},
      {"tsm_epochs", &C::tsm_epochs},
      {"tsm_batch_size", &C::tsm_batch_size},
      {"tsm_learning_rate", &C::tsm_learning_rate},
      {"alpha", &C::alpha},
      {"beta", &C::beta},
      {"ep_variant", &C::ep_variant},
      {"epochs_stage1", &C::epochs_stage1},
      {"epochs_stage2", &C::epochs_stage2},
      {"learning_rate", &C::learning_rate},
      {"batch_size", &C::batch_size},
      {"adam_beta1", &C::adam_beta1},
      {"adam_beta2", &C::adam_beta2},
      {"adam_eps", &C::adam_eps},
      {"weight_decay", &C::weight_decay},
      {"seed", &C::seed},
      {"check_frozen", &C::check_frozen},
      {"decode", &C::decode},
      {"histogram_bins", &C::histogram_bins},
  };
  return table;
}

const Entry& find_entry(const std::string& key) {
  for (const Entry& e : entries()) {
    if (key == e.key) return e;
  }
  throw std::invalid_argument("unknown config key '" + key + "'");
}

std::uint64_t parse_unsigned(const std::string& key, const std::string& value) {
  std::uint64_t v = 0;
  auto [end, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
  if (value.empty() || ec != std::errc() || end != value.data() + value.size()) {
    throw std::invalid_argument("config key '" + key + "' expects a non-negative integer, got '" + value + "'");
  }
  return v;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::string value_text(const TrainingConfig& c, const Field& field) {
  return std::visit(
      [&](auto member) -> std::string {
        const auto& v = c.*member;
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, std::string>) {
          return v;
        } else if constexpr (std::is_same_v<T, bool>) {
          return v ? "true" : "false";
        } else if constexpr (std::is_same_v<T, double>) {
          return data::format_double(v);
        } else {
          return std::to_string(v);
        }
      },
      field);
}

}  // namespace

void set_config_value(TrainingConfig& config, const std::string& key, const std::string& raw) {
  const Entry& e = find_entry(key);
  const std::string value = trim(raw);
  std::visit(
      [&](auto member) {
        auto& target = config.*member;
        using T = std::decay_t<decltype(target)>;
        if constexpr (std::is_same_v<T, std::string>) {
          target = value;
        } else if constexpr (std::is_same_v<T, bool>) {
          if (value == "true" || value == "1") {
            target = true;
          } else if (value == "false" || value == "0") {
            target = false;
          } else {
            throw std::invalid_argument("config key '" + key + "' expects true or false, got '" + value + "'");
          }
        } else if constexpr (std::is_same_v<T, double>) {
          try {
            target = data::parse_double(value);
          } catch (const std::invalid_argument&) {
            throw std::invalid_argument("config key '" + key + "' expects a number, got '" + value + "'");
          }
        } else {
          target = static_cast<T>(parse_unsigned(key, value));
        }
      },
      e.field);
}

TrainingConfig parse_config(const std::string& text, TrainingConfig base) {
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument("config line " + std::to_string(line_no) + ": expected key=value");
    }
    try {
      set_config_value(base, trim(t.substr(0, eq)), t.substr(eq + 1));
    } catch (const std::invalid_argument& e) {
      throw std::invalid_argument("config line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  base.validate();
  return base;
}

TrainingConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  try {
    return parse_config(buf.str());
  } catch (const std::invalid_argument& e) {
    throw std::invalid_argument(path.string() + ": " + e.what());
  }
}

std::string format_config(const TrainingConfig& config) {
  std::string out;
  for (const Entry& e : entries()) out += std::string(e.key) + "=" + value_text(config, e.field) + "\n";
  return out;
}

nlohmann::ordered_json config_to_json(const TrainingConfig& config) {
  nlohmann::ordered_json j;
  for (const Entry& e : entries()) j[e.key] = value_text(config, e.field);
  return j;
}

TrainingConfig config_from_json(const nlohmann::json& j) {
  TrainingConfig c;
  for (const auto& [key, value] : j.items()) set_config_value(c, key, value.get<std::string>());
  c.validate();
  return c;
}

std::vector<std::string> config_keys() {
  std::vector<std::string> keys;
  for (const Entry& e : entries()) keys.emplace_back(e.key);
  return keys;
}

void TrainingConfig::validate() const {
  auto require = [](bool ok, const std::string& what) {
    if (!ok) throw std::invalid_argument("invalid config: " + what);
  };
  require(alpha >= 0.0, "alpha must be non-negative");
  require(beta >= 0.0, "beta must be non-negative");
  require(learning_rate > 0.0, "learning_rate must be positive");
  require(warmup_learning_rate > 0.0, "warmup_learning_rate must be positive");
  require(tsm_learning_rate > 0.0, "tsm_learning_rate must be positive");
  require(batch_size > 0, "batch_size must be positive");
  require(tsm_batch_size > 0, "tsm_batch_size must be positive");
  require(warmup_batch_size > 0, "warmup_batch_size must be positive");
  require(adam_beta1 >= 0.0 && adam_beta1 < 1.0, "adam_beta1 must be in [0, 1)");
  require(adam_beta2 >= 0.0 && adam_beta2 < 1.0, "adam_beta2 must be in [0, 1)");
  require(adam_eps > 0.0, "adam_eps must be positive");
  require(weight_decay >= 0.0, "weight_decay must be non-negative");
  require(separation >= 0.0, "separation must be non-negative");
  require(n_per_class >= 3, "n_per_class must be at least 3");
  require(warmup_no_list_fraction >= 0.0 && warmup_no_list_fraction <= 1.0, "warmup_no_list_fraction must be in [0, 1]");
  require(warmup_hint_fraction >= 0.0 && warmup_hint_fraction <= 1.0, "warmup_hint_fraction must be in [0, 1]");
  require(histogram_bins > 0, "histogram_bins must be positive");
  require(decode == "greedy" || decode == "class-likelihood", "decode must be greedy or class-likelihood");
  require(d_model > d_v && d_model % heads == 0, "d_model must exceed d_v and be divisible by heads");
  require(patches > 0 && d_t > 0 && adapter_rank > 0 && layers > 0 && ff > 0, "model sizes must be positive");
  models::parse_ep_variant(ep_variant);
}

AdamConfig TrainingConfig::adam() const {
  AdamConfig a;
  a.learning_rate = learning_rate;
  a.beta1 = adam_beta1;
  a.beta2 = adam_beta2;
  a.eps = adam_eps;
  a.weight_decay = weight_decay;
  return a;
}

models::TsmConfig TrainingConfig::tsm() const {
  models::TsmConfig t;
  t.hidden_dim = d_t;
  t.epochs = tsm_epochs;
  t.batch_size = tsm_batch_size;
  t.learning_rate = tsm_learning_rate;
  t.seed = seed;
  return t;
}

models::DecoderDims TrainingConfig::decoder_dims(std::size_t vocab) const {
  models::DecoderDims d;
  d.vocab = vocab;
  d.d_model = d_model;
  d.layers = layers;
  d.heads = heads;
  d.ff = ff;
  d.max_len = max_len;
  d.patches = patches;
  d.d_v = d_v;
  d.d_t = d_t;
  d.rank = adapter_rank;
  d.input_dim = dataset_dims();
  return d;
}

}  // namespace vitask::pipeline

namespace vitask::pipeline {

std::size_t TrainingConfig::dataset_dims() const { return data::find_dataset(dataset).class_names.size() + noise_dims; }

}  // namespace vitask::pipeline
