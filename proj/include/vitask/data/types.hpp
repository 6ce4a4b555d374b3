#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "vitask/data/vocabulary.hpp"

namespace vitask::data {

/// One labelled feature vector before instruction formatting.
struct ClassificationSample {
  std::string sample_id;
  std::vector<double> features;
  std::string dataset_id;
  std::size_t label = 0;

  friend bool operator==(const ClassificationSample&, const ClassificationSample&) = default;
};

/// Per-dataset metadata used for rendering instructions.
struct DatasetInfo {
  std::string dataset_id;
  std::string modality;
  std::vector<std::string> class_names;
};

/// Tokenized image/instruction/response triple.
///
/// `instruction_tokens` starts with <|user|>, holds exactly one <image>
/// placeholder and ends with <|assistant|>. `response_tokens` is the class
/// name followed by <eos>.
struct InstructionRecord {
  std::string sample_id;
  std::vector<double> image_features;
  TokenIds instruction_tokens;
  TokenIds response_tokens;
  std::string dataset_id;
  std::size_t label = 0;
};

}  // namespace vitask::data
