#include "vitask/data/instruction.hpp"

#include <stdexcept>

namespace vitask::data {

namespace {

std::size_t count_occurrences(const std::string& s, const std::string& needle) {
  std::size_t n = 0;
  for (std::size_t pos = s.find(needle); pos != std::string::npos; pos = s.find(needle, pos + needle.size())) ++n;
  return n;
}

void replace_all(std::string& s, const std::string& from, const std::string& to) {
  for (std::size_t pos = s.find(from); pos != std::string::npos; pos = s.find(from, pos + to.size())) {
    s.replace(pos, from.size(), to);
  }
}

}  // namespace

std::string InstructionTemplate::render(const DatasetInfo& info, bool with_options) const {
  if (count_occurrences(user_text, std::string(kImageToken)) != 1) {
    throw std::invalid_argument("instruction template must contain exactly one image placeholder");
  }
  if (count_occurrences(user_text, "{options}") != 1) {
    throw std::invalid_argument("instruction template must contain exactly one {options} slot");
  }
  std::string options;
  if (with_options) {
    if (info.class_names.empty()) throw std::invalid_argument("class-name list is empty for dataset " + info.dataset_id);
    std::string classes;
    for (std::size_t i = 0; i < info.class_names.size(); ++i) {
      if (i) classes += ", ";
      classes += info.class_names[i];
    }
    options = options_clause;
    replace_all(options, "{classes}", classes);
  }
  std::string text = user_text;
  replace_all(text, "{options}", options);
  replace_all(text, "{modality}", info.modality);
  return normalize_text(std::string(kUserToken) + text + std::string(kAssistantToken));
}

std::string template_corpus(const InstructionTemplate& tmpl, const DatasetInfo& info) {
  std::string corpus = tmpl.render(info, true);
  for (const std::string& name : info.class_names) corpus += " " + name;
  return corpus;
}

Vocabulary build_task_vocabulary(const InstructionTemplate& tmpl, const std::vector<DatasetInfo>& datasets) {
  std::vector<std::string> corpus;
  for (const DatasetInfo& d : datasets) corpus.push_back(template_corpus(tmpl, d));
  return Vocabulary::build(corpus);
}

TokenIds response_tokens_for(const std::string& class_name, const Vocabulary& vocab) {
  TokenIds ids = vocab.tokenize(class_name);
  if (ids.empty()) throw std::invalid_argument("empty class name");
  ids.push_back(special::kEos);
  return ids;
}

InstructionRecord format_instruction(const ClassificationSample& sample, const InstructionTemplate& tmpl,
                                     const DatasetInfo& info, const Vocabulary& vocab) {
  if (sample.dataset_id != info.dataset_id) {
    throw std::invalid_argument("sample " + sample.sample_id + " belongs to dataset " + sample.dataset_id + ", not " +
                                info.dataset_id);
  }
  if (sample.label >= info.class_names.size()) {
    throw std::out_of_range("unknown label " + std::to_string(sample.label) + " for dataset " + info.dataset_id);
  }
  InstructionRecord r;
  r.sample_id = sample.sample_id;
  r.image_features = sample.features;
  r.instruction_tokens = vocab.tokenize(tmpl.render(info, true));
  r.response_tokens = response_tokens_for(info.class_names[sample.label], vocab);
  r.dataset_id = sample.dataset_id;
  r.label = sample.label;
  return r;
}

InstructionRecord make_incomplete(const InstructionRecord& record, const InstructionTemplate& tmpl,
                                  const DatasetInfo& info, const Vocabulary& vocab) {
  InstructionRecord r = record;
  r.instruction_tokens = vocab.tokenize(tmpl.render(info, false));
  return r;
}

std::string instruction_text(const InstructionRecord& record, const Vocabulary& vocab) {
  return vocab.detokenize(record.instruction_tokens);
}

std::string response_text(const InstructionRecord& record, const Vocabulary& vocab) {
  std::span<const TokenId> ids = record.response_tokens;
  if (!ids.empty() && ids.back() == special::kEos) ids = ids.first(ids.size() - 1);
  return vocab.detokenize(ids);
}

}  // namespace vitask::data
