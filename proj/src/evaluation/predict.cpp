#include "vitask/evaluation/predict.hpp"

#include <algorithm>
#include <optional>
#include <stdexcept>

#include "vitask/data/instruction.hpp"
#include "vitask/numerics/ops.hpp"

namespace vitask::evaluation {

std::string to_string(DecodeMode m) { return m == DecodeMode::greedy ? "greedy" : "class-likelihood"; }

DecodeMode parse_decode_mode(const std::string& text) {
  if (text == "greedy") return DecodeMode::greedy;
  if (text == "class-likelihood" || text == "class_likelihood") return DecodeMode::class_likelihood;
  throw std::invalid_argument("unknown decode mode '" + text + "' (expected greedy or class-likelihood)");
}

std::vector<data::TokenIds> class_responses(const data::DatasetInfo& info, const data::Vocabulary& vocab) {
  std::vector<data::TokenIds> out;
  for (const std::string& name : info.class_names) out.push_back(data::response_tokens_for(name, vocab));
  return out;
}

namespace {

std::optional<models::ExemplarFeatures> exemplar_for(const models::DecoderModel& model,
                                                     const data::InstructionRecord& record, const EpConfig& ep) {
  if (ep.variant == models::EpVariant::none) return std::nullopt;
  if (!ep.tsm) throw std::invalid_argument("exemplar prompting requires a task-specific model");
  return models::extract_exemplar(*ep.tsm, record.image_features, model.dims().patches);
}

}  // namespace

data::TokenIds greedy_decode(const models::DecoderModel& model, const data::InstructionRecord& record,
                             const EpConfig& ep, std::size_t max_tokens) {
  numerics::NoGradGuard no_grad;
  const auto exemplar = exemplar_for(model, record, ep);
  const models::PromptParts parts{&record.image_features, &record.instruction_tokens, exemplar ? &*exemplar : nullptr,
                                  ep.variant};
  data::TokenIds out;
  while (out.size() < max_tokens) {
    std::size_t assistant_row = 0;
    const auto seq = models::build_sequence(model, parts, out, assistant_row);
    const auto logits = model.forward(seq, assistant_row + out.size(), 1, ep.adapters_on).value();
    const auto row = logits.row(0);
    const std::size_t next = static_cast<std::size_t>(std::max_element(row.begin(), row.end()) - row.begin());
    out.push_back(next);
    if (next == data::special::kEos) break;
  }
  return out;
}

std::size_t predict(const models::DecoderModel& model, const data::InstructionRecord& record, DecodeMode mode,
                    const EpConfig& ep, const std::vector<data::TokenIds>& classes) {
  if (classes.empty()) throw std::invalid_argument("predict: no classes");
  if (mode == DecodeMode::greedy) {
    std::size_t longest = 0;
    for (const auto& c : classes) longest = std::max(longest, c.size());
    const data::TokenIds generated = greedy_decode(model, record, ep, longest + 1);
    for (std::size_t c = 0; c < classes.size(); ++c) {
      if (classes[c] == generated) return c;
    }
    return kReject;
  }

  numerics::NoGradGuard no_grad;
  const auto exemplar = exemplar_for(model, record, ep);
  std::size_t best = 0;
  double best_score = 0.0;
  for (std::size_t c = 0; c < classes.size(); ++c) {
    const auto logits = models::vlm_forward(model, record.image_features, record.instruction_tokens, classes[c],
                                            exemplar ? &*exemplar : nullptr, ep.variant, ep.adapters_on);
    const numerics::Tensor lp = numerics::log_softmax(logits.logits.value());
    double score = 0.0;
    for (std::size_t t = 0; t < classes[c].size(); ++t) score += lp.at(t, classes[c][t]);
    score /= static_cast<double>(classes[c].size());
    if (c == 0 || score > best_score) {
      best = c;
      best_score = score;
    }
  }
  return best;
}

MetricsReport evaluate(const models::DecoderModel& model, const std::vector<data::InstructionRecord>& records,
                       DecodeMode mode, const EpConfig& ep, const data::DatasetInfo& info,
                       const data::Vocabulary& vocab) {
  const auto classes = class_responses(info, vocab);
  std::vector<std::size_t> preds, labels;
  for (const auto& r : records) {
    preds.push_back(predict(model, r, mode, ep, classes));
    labels.push_back(r.label);
  }
  MetricsReport report = compute_metrics(preds, labels, info.class_names.size());
  report.ep_used = ep.variant != models::EpVariant::none;
  return report;
}

}  // namespace vitask::evaluation
