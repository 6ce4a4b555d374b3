#pragma once

#include <string>
#include <vector>

#include "vitask/data/types.hpp"
#include "vitask/data/vocabulary.hpp"

namespace vitask::data {

/// Instruction layout `<|user|>{user_text}<|assistant|>`. `user_text` holds one
/// <image> placeholder and one `{options}` slot; the slot receives
/// `options_clause` with `{classes}` expanded, or nothing for the incomplete
/// form. `{modality}` is substituted from the dataset description.
struct InstructionTemplate {
  std::string user_text = "<image>Analyze the given {modality} image for diagnosis. {options}";
  std::string options_clause = "The possible diagnoses are: {classes}.";

  /// Normalized instruction text including the role markers.
  std::string render(const DatasetInfo& info, bool with_options = true) const;
};

/// All words a template can emit for `info` (both forms); used to build the
/// closed vocabulary.
std::string template_corpus(const InstructionTemplate& tmpl, const DatasetInfo& info);

/// Vocabulary covering both template forms and every class name of `datasets`.
Vocabulary build_task_vocabulary(const InstructionTemplate& tmpl, const std::vector<DatasetInfo>& datasets);

InstructionRecord format_instruction(const ClassificationSample& sample, const InstructionTemplate& tmpl,
                                     const DatasetInfo& info, const Vocabulary& vocab);

/// Re-renders the instruction without the class-list clause; the response is
/// untouched. Applying it twice equals applying it once.
InstructionRecord make_incomplete(const InstructionRecord& record, const InstructionTemplate& tmpl,
                                  const DatasetInfo& info, const Vocabulary& vocab);

TokenIds response_tokens_for(const std::string& class_name, const Vocabulary& vocab);

std::string instruction_text(const InstructionRecord& record, const Vocabulary& vocab);
/// Response text without the trailing <eos>.
std::string response_text(const InstructionRecord& record, const Vocabulary& vocab);

}  // namespace vitask::data
