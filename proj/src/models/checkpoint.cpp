#include "vitask/models/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "vitask/data/vocabulary.hpp"

namespace vitask::models {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

namespace {

constexpr char kMagic[4] = {'V', 'T', 'C', 'K'};

template <typename T>
void put(std::string& out, T v) {
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.append(buf, sizeof(T));
}

template <typename T>
T take(const std::string& in, std::size_t& pos, const std::filesystem::path& path) {
  if (pos + sizeof(T) > in.size()) throw std::runtime_error("truncated checkpoint " + path.string());
  T v;
  std::memcpy(&v, in.data() + pos, sizeof(T));
  pos += sizeof(T);
  return v;
}

DecoderDims dims_from_json(const nlohmann::json& j) {
  DecoderDims d;
  d.vocab = j.at("vocab");
  d.d_model = j.at("d_model");
  d.layers = j.at("layers");
  d.heads = j.at("heads");
  d.ff = j.at("ff");
  d.max_len = j.at("max_len");
  d.patches = j.at("patches");
  d.d_v = j.at("d_v");
  d.d_t = j.at("d_t");
  d.rank = j.at("rank");
  d.input_dim = j.at("input_dim");
  return d;
}

nlohmann::ordered_json dims_to_json(const DecoderDims& d) {
  nlohmann::ordered_json j;
  j["vocab"] = d.vocab;
  j["d_model"] = d.d_model;
  j["layers"] = d.layers;
  j["heads"] = d.heads;
  j["ff"] = d.ff;
  j["max_len"] = d.max_len;
  j["patches"] = d.patches;
  j["d_v"] = d.d_v;
  j["d_t"] = d.d_t;
  j["rank"] = d.rank;
  j["input_dim"] = d.input_dim;
  return j;
}

void assign(Var& target, const Tensor& value, const std::string& name) {
  if (target.shape() != value.shape()) {
    throw std::runtime_error("checkpoint tensor " + name + " has shape " + numerics::shape_string(value.shape()) +
                             ", expected " + numerics::shape_string(target.shape()));
  }
  target.mutable_value() = value;
}

}  // namespace

const Tensor& CheckpointFile::tensor(const std::string& name) const {
  for (const auto& [n, t] : tensors) {
    if (n == name) return t;
  }
  throw std::runtime_error("checkpoint has no tensor '" + name + "'");
}

bool CheckpointFile::has_tensor(const std::string& name) const {
  for (const auto& entry : tensors) {
    if (entry.first == name) return true;
  }
  return false;
}

void write_checkpoint_file(const std::filesystem::path& path, const CheckpointFile& file) {
  nlohmann::ordered_json header = file.header;
  nlohmann::ordered_json index = nlohmann::ordered_json::array();
  for (const auto& [name, t] : file.tensors) index.push_back({{"name", name}, {"shape", t.shape()}});
  header["tensors"] = index;
  const std::string text = header.dump();

  std::string out(kMagic, 4);
  put<std::uint32_t>(out, kCheckpointVersion);
  put<std::uint64_t>(out, text.size());
  out += text;
  for (const auto& entry : file.tensors) {
    const auto values = entry.second.values();
    out.append(reinterpret_cast<const char*>(values.data()), values.size() * sizeof(double));
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write checkpoint " + path.string());
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw std::runtime_error("write failed for " + path.string());
}

CheckpointFile read_checkpoint_file(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open checkpoint " + path.string());
  const std::string in((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  if (in.size() < 4 || std::memcmp(in.data(), kMagic, 4) != 0) throw std::runtime_error(path.string() + " is not a checkpoint");
  std::size_t pos = 4;
  const auto version = take<std::uint32_t>(in, pos, path);
  if (version != kCheckpointVersion) {
    throw std::runtime_error("unsupported checkpoint version " + std::to_string(version) + " in " + path.string());
  }
  const auto len = take<std::uint64_t>(in, pos, path);
  if (pos + len > in.size()) throw std::runtime_error("truncated checkpoint " + path.string());
  CheckpointFile file;
  file.header = nlohmann::ordered_json::parse(in.substr(pos, len));
  pos += len;
  for (const auto& entry : file.header.at("tensors")) {
    Tensor t(entry.at("shape").get<numerics::Shape>(), 0.0);
    const std::size_t bytes = t.size() * sizeof(double);
    if (pos + bytes > in.size()) throw std::runtime_error("truncated checkpoint " + path.string());
    std::memcpy(t.data(), in.data() + pos, bytes);
    pos += bytes;
    file.tensors.emplace_back(entry.at("name").get<std::string>(), std::move(t));
  }
  if (pos != in.size()) throw std::runtime_error("trailing bytes in checkpoint " + path.string());
  file.header.erase("tensors");
  return file;
}

void store_decoder(CheckpointFile& file, const DecoderModel& model) {
  file.header["decoder"] = dims_to_json(model.dims());
  file.tensors.emplace_back("encoder.projection", model.encoder.projection());
  for (const auto& [name, p] : model.named_parameters()) file.tensors.emplace_back("decoder." + name, p.value());
}

DecoderModel restore_decoder(const CheckpointFile& file) {
  const DecoderDims dims = dims_from_json(file.header.at("decoder"));
  DecoderModel model(dims, 0);
  model.encoder = FrozenEncoder(file.tensor("encoder.projection"), dims.patches);
  for (auto& [name, p] : model.named_parameters()) assign(p, file.tensor("decoder." + name), name);
  model.set_trainable(TrainPhase::frozen);
  return model;
}

void store_tsm(CheckpointFile& file, const TsmModel& tsm) {
  nlohmann::ordered_json ranges = nlohmann::ordered_json::array();
  for (const ClassRange& r : tsm.ranges()) ranges.push_back({{"dataset_id", r.dataset_id}, {"begin", r.begin}, {"count", r.count}});
  file.header["tsm"] = {{"input_dim", tsm.input_dim()}, {"hidden_dim", tsm.hidden_dim()}, {"ranges", ranges},
                        {"hash", data::hex64(tsm.hash())}};
  file.tensors.emplace_back("tsm.w1", tsm.w1.value());
  file.tensors.emplace_back("tsm.b1", tsm.b1.value());
  file.tensors.emplace_back("tsm.w2", tsm.w2.value());
  file.tensors.emplace_back("tsm.b2", tsm.b2.value());
}

TsmModel restore_tsm(const CheckpointFile& file) {
  const auto& j = file.header.at("tsm");
  std::vector<ClassRange> ranges;
  for (const auto& r : j.at("ranges")) ranges.push_back({r.at("dataset_id"), r.at("begin"), r.at("count")});
  TsmModel tsm(j.at("input_dim"), j.at("hidden_dim"), ranges, 0);
  assign(tsm.w1, file.tensor("tsm.w1"), "tsm.w1");
  assign(tsm.b1, file.tensor("tsm.b1"), "tsm.b1");
  assign(tsm.w2, file.tensor("tsm.w2"), "tsm.w2");
  assign(tsm.b2, file.tensor("tsm.b2"), "tsm.b2");
  return tsm;
}

void save_tsm(const std::filesystem::path& path, const TsmModel& tsm) {
  CheckpointFile file;
  file.header["kind"] = "tsm";
  store_tsm(file, tsm);
  write_checkpoint_file(path, file);
}

TsmModel load_tsm(const std::filesystem::path& path) {
  const CheckpointFile file = read_checkpoint_file(path);
  if (!file.header.contains("tsm")) throw std::runtime_error(path.string() + " holds no task-specific model");
  return restore_tsm(file);
}

void require_vocab_hash(const CheckpointFile& file, std::uint64_t expected, const std::filesystem::path& path) {
  const std::string found = file.header.value("vocab_hash", std::string());
  if (found != data::hex64(expected)) {
    throw std::runtime_error("vocabulary hash mismatch for " + path.string() + ": checkpoint has " +
                             (found.empty() ? std::string("none") : found) + ", vocabulary is " + data::hex64(expected));
  }
}

}  // namespace vitask::models
