#include "vitask/data/negative_sampling.hpp"

#include <map>
#include <random>
#include <stdexcept>

namespace vitask::data {

const InstructionRecord& sample_negative(const InstructionRecord& anchor, const std::vector<InstructionRecord>& dataset,
                                         numerics::Rng& rng) {
  std::vector<std::size_t> eligible;
  for (std::size_t j = 0; j < dataset.size(); ++j) {
    const InstructionRecord& r = dataset[j];
    if (r.instruction_tokens == anchor.instruction_tokens && r.response_tokens != anchor.response_tokens) {
      eligible.push_back(j);
    }
  }
  if (eligible.empty()) throw std::runtime_error("no valid negative for record " + anchor.sample_id);
  std::uniform_int_distribution<std::size_t> pick(0, eligible.size() - 1);
  return dataset[eligible[pick(rng)]];
}

NegativeSampler::NegativeSampler(const std::vector<InstructionRecord>& dataset) : eligible_(dataset.size()) {
  // Group by instruction, then by response inside each group.
  std::map<TokenIds, std::vector<std::size_t>> by_instruction;
  for (std::size_t i = 0; i < dataset.size(); ++i) by_instruction[dataset[i].instruction_tokens].push_back(i);
  for (const auto& [instr, members] : by_instruction) {
    for (std::size_t i : members) {
      for (std::size_t j : members) {
        if (dataset[j].response_tokens != dataset[i].response_tokens) eligible_[i].push_back(j);
      }
    }
  }
}

void NegativeSampler::require_all_eligible() const {
  for (std::size_t i = 0; i < eligible_.size(); ++i) {
    if (eligible_[i].empty()) throw std::runtime_error("no valid negative for record index " + std::to_string(i));
  }
}

std::size_t NegativeSampler::sample(std::size_t anchor, numerics::Rng& rng) const {
  const auto& pool = eligible_.at(anchor);
  if (pool.empty()) throw std::runtime_error("no valid negative for record index " + std::to_string(anchor));
  std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
  return pool[pick(rng)];
}

}  // namespace vitask::data
