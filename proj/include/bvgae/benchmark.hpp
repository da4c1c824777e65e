#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "bvgae/attribution.hpp"
#include "bvgae/model.hpp"
#include "bvgae/simulate.hpp"

namespace bvgae {

struct AttributionParams {
  int grad_samples = 50;
  int ig_steps = 64;
  bool ig_zero_baseline = false;
  int svx_coalitions = 0;  // 0 selects default_coalitions(d1)
};

// Runs one method and fills phi_group (K x d1).
AttributionResult attribute(Method method, const Functional& f, const Matrix& x, const GroupPartition& partition,
                            const AttributionParams& params, std::uint64_t seed);

// Like attribute(), but Grad⊙Input reuses an already computed Grad result.
std::vector<AttributionResult> attribute_all(const std::vector<Method>& methods, const Functional& f, const Matrix& x,
                                             const GroupPartition& partition, const AttributionParams& params,
                                             std::uint64_t seed);

struct MethodScore {
  Method method = Method::Grad;
  std::optional<double> plus, minus, auc;
  Matrix phi_group;
};

struct RunRecord {
  int run = 0;
  std::uint64_t seed = 0;
  bool excluded = false;
  std::string error;
  GroundTruth truth;
  double holdout_auc = 0.0;
  std::vector<MethodScore> scores;
};

struct MethodScorecard {
  std::string setting;
  Method method = Method::Grad;
  std::optional<double> plus_rate, minus_rate, auc;
  int n_runs = 0;
};

struct BenchmarkResult {
  std::string setting;
  std::vector<MethodScorecard> scorecards;
  std::vector<RunRecord> runs;
  int n_excluded = 0;
};

struct BenchmarkOptions {
  AttributionParams attribution;
  std::optional<double> hsic_weight;  // absent: default_hsic_weight(setting)
  int jobs = 1;
};

// Penalty weight used for settings with protected columns.
inline constexpr double kDefaultHsicWeight = 10.0;
double default_hsic_weight(const SimSetting& setting);

// Model configuration for a generated replicate: latent signature from the
// setting, protected columns from the ground truth, B' recovery for study 2.
ModelConfig replicate_model(const SimSetting& setting, const GroundTruth& truth, ModelConfig base,
                            std::optional<double> hsic_weight = std::nullopt);

// Simulate, train and attribute one replicate. `model` is adapted with
// replicate_model().
RunRecord run_replicate(const SimSetting& setting, const ModelConfig& model, const std::vector<Method>& methods,
                        const AttributionParams& params, int run, std::uint64_t seed,
                        std::optional<double> hsic_weight = std::nullopt);

std::uint64_t replicate_seed(std::uint64_t base_seed, int run);

// Means over non-excluded runs; a metric is absent when no run defined it.
BenchmarkResult run_benchmark(const SimSetting& setting, const ModelConfig& model, const std::vector<Method>& methods,
                              int n_runs, std::uint64_t base_seed, const BenchmarkOptions& options = {});
BenchmarkResult run_benchmark(const std::string& preset_name, const std::vector<Method>& methods, int n_runs,
                              std::uint64_t base_seed, const ModelConfig& model = {},
                              const BenchmarkOptions& options = {});

// Scores one method's K x d1 phi against the ground truth.
MethodScore score_method(Method method, const Matrix& phi_group, const GroundTruth& truth);

std::string scorecard_csv(const BenchmarkResult& result);
std::string runs_csv(const BenchmarkResult& result);

}  // namespace bvgae
