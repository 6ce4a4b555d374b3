#pragma once

#include <cstdint>
#include <vector>

#include "vitask/data/types.hpp"
#include "vitask/evaluation/predict.hpp"

namespace vitask::evaluation {

/// Anchor and negative share the instruction and differ in response.
struct RankingPair {
  const data::InstructionRecord* anchor = nullptr;
  const data::InstructionRecord* negative = nullptr;
};

struct Histogram {
  double lo = 0.0;
  double hi = 1.0;
  /// Densities; sum(density) * bin width == 1 when any value was binned.
  std::vector<double> density;
};

struct RankingReport {
  double ranking_fraction = 0.0;
  std::vector<double> pos_probs;
  std::vector<double> neg_probs;
  Histogram pos_hist;
  Histogram neg_hist;
};

/// One seeded negative per anchor, drawn among records of `records`.
std::vector<RankingPair> make_ranking_pairs(const std::vector<data::InstructionRecord>& records, std::uint64_t seed);

/// Mean per-token probability of the anchor's response under its own image
/// (pos) and under the negative's image (neg). Only strict wins count.
RankingReport ranking_stats(const models::DecoderModel& model, const std::vector<RankingPair>& pairs,
                            const EpConfig& ep, std::size_t bins = 40);

/// Mean per-token probability of `response` for the given image, in [0, 1].
double mean_token_probability(const models::DecoderModel& model, const std::vector<double>& image,
                              const data::TokenIds& instruction, const data::TokenIds& response, const EpConfig& ep);

/// Equal-width histogram over [0, 1] normalized to unit area.
Histogram density_histogram(const std::vector<double>& values, std::size_t bins);

}  // namespace vitask::evaluation
