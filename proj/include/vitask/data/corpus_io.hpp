#pragma once

#include <filesystem>
#include <vector>

#include "vitask/data/types.hpp"
#include "vitask/data/vocabulary.hpp"

namespace vitask::data {

/// JSONL with keys sample_id, dataset_id, label, instruction, response (in
/// that order). Texts are detokenized; ids are not stored.
void save_corpus(const std::filesystem::path& path, const std::vector<InstructionRecord>& records,
                 const Vocabulary& vocab);

/// Re-tokenizes each line and attaches features by sample_id.
std::vector<InstructionRecord> load_corpus(const std::filesystem::path& path, const Vocabulary& vocab,
                                           const std::vector<ClassificationSample>& features);

}  // namespace vitask::data
