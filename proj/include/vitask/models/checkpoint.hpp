#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "vitask/models/decoder.hpp"
#include "vitask/models/tsm.hpp"

namespace vitask::models {

/// Binary container: "VTCK", u32 version, u64 header length, a JSON header
/// (metadata plus an index of tensor names and shapes), then the tensors as
/// raw little-endian doubles in index order.
struct CheckpointFile {
  nlohmann::ordered_json header = nlohmann::ordered_json::object();
  std::vector<std::pair<std::string, Tensor>> tensors;

  const Tensor& tensor(const std::string& name) const;
  bool has_tensor(const std::string& name) const;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

void write_checkpoint_file(const std::filesystem::path& path, const CheckpointFile& file);
CheckpointFile read_checkpoint_file(const std::filesystem::path& path);

/// Decoder parameters under `prefix`, dimensions under header["decoder"].
void store_decoder(CheckpointFile& file, const DecoderModel& model);
DecoderModel restore_decoder(const CheckpointFile& file);

void store_tsm(CheckpointFile& file, const TsmModel& tsm);
TsmModel restore_tsm(const CheckpointFile& file);

void save_tsm(const std::filesystem::path& path, const TsmModel& tsm);
TsmModel load_tsm(const std::filesystem::path& path);

/// Throws std::runtime_error when the file's vocabulary hash differs.
void require_vocab_hash(const CheckpointFile& file, std::uint64_t expected, const std::filesystem::path& path);

}  // namespace vitask::models
