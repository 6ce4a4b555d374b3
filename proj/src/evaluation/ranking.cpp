#include "vitask/evaluation/ranking.hpp"

#include <cmath>
#include <optional>
#include <stdexcept>

#include "vitask/data/negative_sampling.hpp"
#include "vitask/numerics/ops.hpp"
#include "vitask/numerics/random.hpp"

namespace vitask::evaluation {

namespace {
constexpr std::uint64_t kPairStream = 0x50414952;
}

std::vector<RankingPair> make_ranking_pairs(const std::vector<data::InstructionRecord>& records, std::uint64_t seed) {
  const data::NegativeSampler sampler(records);
  sampler.require_all_eligible();
  auto rng = numerics::make_rng(seed, kPairStream);
  std::vector<RankingPair> pairs;
  for (std::size_t i = 0; i < records.size(); ++i) pairs.push_back({&records[i], &records[sampler.sample(i, rng)]});
  return pairs;
}

double mean_token_probability(const models::DecoderModel& model, const std::vector<double>& image,
                              const data::TokenIds& instruction, const data::TokenIds& response, const EpConfig& ep) {
  numerics::NoGradGuard no_grad;
  std::optional<models::ExemplarFeatures> exemplar;
  if (ep.variant != models::EpVariant::none) {
    if (!ep.tsm) throw std::invalid_argument("exemplar prompting requires a task-specific model");
    exemplar = models::extract_exemplar(*ep.tsm, image, model.dims().patches);
  }
  const auto logits = models::vlm_forward(model, image, instruction, response, exemplar ? &*exemplar : nullptr,
                                          ep.variant, ep.adapters_on);
  const numerics::Tensor lp = numerics::log_softmax(logits.logits.value());
  double sum = 0.0;
  for (std::size_t t = 0; t < response.size(); ++t) sum += std::exp(lp.at(t, response[t]));
  return sum / static_cast<double>(response.size());
}

Histogram density_histogram(const std::vector<double>& values, std::size_t bins) {
  if (bins == 0) throw std::invalid_argument("histogram needs at least one bin");
  Histogram h;
  h.density.assign(bins, 0.0);
  if (values.empty()) return h;
  const double width = (h.hi - h.lo) / static_cast<double>(bins);
  for (double v : values) {
    auto b = static_cast<std::size_t>(std::floor((v - h.lo) / width));
    if (v < h.lo) b = 0;
    if (b >= bins) b = bins - 1;
    h.density[b] += 1.0;
  }
  for (double& d : h.density) d /= static_cast<double>(values.size()) * width;
  return h;
}

RankingReport ranking_stats(const models::DecoderModel& model, const std::vector<RankingPair>& pairs,
                            const EpConfig& ep, std::size_t bins) {
  if (pairs.empty()) throw std::invalid_argument("ranking: empty pair set");
  RankingReport r;
  std::size_t wins = 0;
  for (const RankingPair& pair : pairs) {
    const data::InstructionRecord& a = *pair.anchor;
    const data::InstructionRecord& n = *pair.negative;
    if (a.instruction_tokens != n.instruction_tokens) throw std::invalid_argument("ranking: pair instructions differ");
    const double pos = mean_token_probability(model, a.image_features, a.instruction_tokens, a.response_tokens, ep);
    const double neg = mean_token_probability(model, n.image_features, a.instruction_tokens, a.response_tokens, ep);
    r.pos_probs.push_back(pos);
    r.neg_probs.push_back(neg);
    if (pos > neg) ++wins;
  }
  r.ranking_fraction = static_cast<double>(wins) / static_cast<double>(pairs.size());
  r.pos_hist = density_histogram(r.pos_probs, bins);
  r.neg_hist = density_histogram(r.neg_probs, bins);
  return r;
}

}  // namespace vitask::evaluation
