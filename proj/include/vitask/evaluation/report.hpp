#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "vitask/evaluation/metrics.hpp"
#include "vitask/evaluation/ranking.hpp"

namespace vitask::evaluation {

enum class ReportFormat { csv, svg_histogram };

/// Metrics CSV: a `method,seed,ep_used,accuracy,macro_f1,reject_rate` header
/// and row, then a `class,precision,recall,f1` header and one row per class.
void emit_report(const MetricsReport& report, const std::filesystem::path& path);

/// Ranking CSV (`pair_id,pos_prob,neg_prob,strict_win`) or an SVG of the two
/// normalized histograms.
void emit_report(const RankingReport& report, const std::filesystem::path& path, ReportFormat format,
                 const std::string& title = "");

/// Inverse of the metrics CSV writer; per-class support is not stored.
MetricsReport read_metrics_csv(const std::filesystem::path& path);

struct RankingRow {
  std::size_t pair_id = 0;
  double pos_prob = 0.0;
  double neg_prob = 0.0;
  bool strict_win = false;
};
std::vector<RankingRow> read_ranking_csv(const std::filesystem::path& path);

std::string histogram_svg(const RankingReport& report, const std::string& title);

}  // namespace vitask::evaluation
