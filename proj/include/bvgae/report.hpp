#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "bvgae/attribution.hpp"

namespace bvgae {

// One line of an attribution CSV: `method,group,feature,score,sign,run_seed`.
// `sign` is the Grad estimate for the cell when Grad ran, else the sign of
// the score itself.
struct AttributionRow {
  std::string method;
  std::string group;
  std::string feature;
  double score = 0.0;
  int sign = 0;
  std::uint64_t run_seed = 0;
};

std::vector<AttributionRow> attribution_rows(const std::vector<AttributionResult>& results,
                                             const GroupPartition& partition,
                                             const std::vector<std::string>& feature_names, std::uint64_t run_seed);
std::string attribution_csv(const std::vector<AttributionRow>& rows);
std::vector<AttributionRow> read_attribution_csv(const std::filesystem::path& path);

struct RankRow {
  double median_rank = 0.0;
  double median_score = 0.0;
  std::string group;
  std::string feature;
  double grad_positive = 0.0;
};

using RankReport = std::vector<RankRow>;

// True for a `plant:<id>` feature aggregated over a different plant group.
bool discarded_cell(const std::string& group, const std::string& feature);

// Ranks the cells of `method` by |score| (descending, ties by input order)
// within each run, then reports medians over runs sorted by median rank.
// Each element of `runs` holds one run's rows. Throws std::invalid_argument
// when runs disagree on their cell set.
RankReport median_rank_report(const std::vector<std::vector<AttributionRow>>& runs, const std::string& method);

std::string rank_report_csv(const RankReport& report);

// Per-feature strip plot of scores over runs, one lane per feature.
std::string strip_plot_svg(const std::vector<std::vector<AttributionRow>>& runs, const std::string& method);
// Groups x features grid of the median score sign.
std::string sign_grid_svg(const std::vector<std::vector<AttributionRow>>& runs, const std::string& method);

}  // namespace bvgae
