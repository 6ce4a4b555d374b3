#include "vitask/data/corpus_io.hpp"

#include <fstream>
#include <stdexcept>
#include <unordered_map>

#include "json.hpp"
#include "vitask/data/instruction.hpp"

namespace vitask::data {

void save_corpus(const std::filesystem::path& path, const std::vector<InstructionRecord>& records,
                 const Vocabulary& vocab) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write corpus " + path.string());
  for (const InstructionRecord& r : records) {
    nlohmann::ordered_json j;
    j["sample_id"] = r.sample_id;
    j["dataset_id"] = r.dataset_id;
    j["label"] = r.label;
    j["instruction"] = instruction_text(r, vocab);
    j["response"] = vocab.detokenize(r.response_tokens);
    out << j.dump() << '\n';
  }
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

std::vector<InstructionRecord> load_corpus(const std::filesystem::path& path, const Vocabulary& vocab,
                                           const std::vector<ClassificationSample>& features) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open corpus " + path.string());
  std::unordered_map<std::string, const ClassificationSample*> by_id;
  for (const ClassificationSample& s : features) by_id[s.sample_id] = &s;

  std::vector<InstructionRecord> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const std::string where = path.string() + ":" + std::to_string(line_no) + ": ";
    try {
      const nlohmann::json j = nlohmann::json::parse(line);
      InstructionRecord r;
      r.sample_id = j.at("sample_id").get<std::string>();
      r.dataset_id = j.at("dataset_id").get<std::string>();
      r.label = j.at("label").get<std::size_t>();
      r.instruction_tokens = vocab.tokenize(j.at("instruction").get<std::string>());
      r.response_tokens = vocab.tokenize(j.at("response").get<std::string>());
      if (r.response_tokens.empty() || r.response_tokens.back() != special::kEos) {
        throw std::runtime_error("response must end with <eos>");
      }
      auto it = by_id.find(r.sample_id);
      if (it == by_id.end()) throw std::runtime_error("no features for sample " + r.sample_id);
      r.image_features = it->second->features;
      out.push_back(std::move(r));
    } catch (const std::exception& e) {
      throw std::runtime_error(where + e.what());
    }
  }
  return out;
}

}  // namespace vitask::data
