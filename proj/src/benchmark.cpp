#include "bvgae/benchmark.hpp"

#include <atomic>
#include <thread>

#include "bvgae/io.hpp"
#include "bvgae/metrics.hpp"

namespace bvgae {

AttributionResult attribute(Method method, const Functional& f, const Matrix& x, const GroupPartition& partition,
                            const AttributionParams& params, std::uint64_t seed) {
  return attribute_all({method}, f, x, partition, params, seed).front();
}

std::vector<AttributionResult> attribute_all(const std::vector<Method>& methods, const Functional& f, const Matrix& x,
                                             const GroupPartition& partition, const AttributionParams& params,
                                             std::uint64_t seed) {
  std::optional<AttributionResult> grad;
  auto get_grad = [&]() -> const AttributionResult& {
    if (!grad) grad = smoothgrad(f, x, params.grad_samples, seed);
    return *grad;
  };
  std::vector<AttributionResult> out;
  for (Method m : methods) {
    AttributionResult r;
    switch (m) {
      case Method::Grad:
        r = get_grad();
        break;
      case Method::GradInput:
        r = grad_times_input(get_grad(), x);
        break;
      case Method::IntegratedGradients: {
        const Matrix baseline = params.ig_zero_baseline ? Matrix(Matrix::Zero(x.rows(), x.cols())) : column_mean_baseline(x);
        r = integrated_gradients(f, x, baseline, params.ig_steps);
        r.seed = seed;
        break;
      }
      case Method::GraphSvx: {
        const int n = params.svx_coalitions > 0 ? params.svx_coalitions : default_coalitions(x.cols());
        r = graphsvx_grouped(f, x, partition, n, seed);
        break;
      }
    }
    if (r.phi_group.size() == 0) r.phi_group = aggregate_by_group(r, partition);
    out.push_back(std::move(r));
  }
  return out;
}

double default_hsic_weight(const SimSetting& setting) { return setting.hsic_cols > 0 ? kDefaultHsicWeight : 0.0; }

ModelConfig replicate_model(const SimSetting& setting, const GroundTruth& truth, ModelConfig c,
                            std::optional<double> hsic_weight) {
  c.d_plus = setting.d_plus;
  c.d_minus = setting.d_minus();
  c.hsic_columns = truth.hsic_columns;
  c.hsic_weight = c.hsic_columns.empty() ? 0.0 : hsic_weight.value_or(default_hsic_weight(setting));
  c.recover_bprime = setting.study == 2;
  return c;
}

MethodScore score_method(Method method, const Matrix& phi_group, const GroundTruth& truth) {
  MethodScore s;
  s.method = method;
  s.phi_group = phi_group;
  const SignRates rates = sign_rates(phi_group, truth.expected_sign, truth.evaluated);
  s.plus = rates.plus;
  s.minus = rates.minus;
  try {
    s.auc = auc_abs(phi_group, truth.signal_mask, truth.evaluated);
  } catch (const std::invalid_argument&) {
    s.auc.reset();
  }
  return s;
}

std::uint64_t replicate_seed(std::uint64_t base_seed, int run) {
  return derive_seed(base_seed, 0x52554eULL + static_cast<std::uint64_t>(run));
}

RunRecord run_replicate(const SimSetting& setting, const ModelConfig& model, const std::vector<Method>& methods,
                        const AttributionParams& params, int run, std::uint64_t seed,
                        std::optional<double> hsic_weight) {
  RunRecord rec;
  rec.run = run;
  rec.seed = seed;
  SimSetting s = setting;
  s.seed = seed;
  const SimulatedData data = simulate(s);
  rec.truth = data.truth;
  ModelConfig c = replicate_model(s, data.truth, model, hsic_weight);
  c.seed = seed;
  const PlantAssignment* plants = data.plants ? &*data.plants : nullptr;
  try {
    const TrainedModel trained = train(data.graph, plants, c);
    rec.holdout_auc = trained.holdout_auc;
    const ConnectivityFunctional f(trained, data.graph, plants);
    const auto results = attribute_all(methods, f.as_functional(), data.graph.x1, data.partition, params, seed);
    for (const auto& r : results) rec.scores.push_back(score_method(r.method, r.phi_group, data.truth));
  } catch (const TrainingDiverged& e) {
    rec.excluded = true;
    rec.error = e.what();
  }
  return rec;
}

BenchmarkResult run_benchmark(const SimSetting& setting, const ModelConfig& model, const std::vector<Method>& methods,
                              int n_runs, std::uint64_t base_seed, const BenchmarkOptions& options) {
  if (n_runs < 1) throw std::invalid_argument("run_benchmark: n_runs must be >= 1");
  setting.validate();
  BenchmarkResult out;
  out.setting = setting.name;
  if (methods.empty()) return out;

  out.runs.resize(static_cast<std::size_t>(n_runs));
  std::atomic<int> next{0};
  auto worker = [&] {
    for (int r = next++; r < n_runs; r = next++) {
      out.runs[static_cast<std::size_t>(r)] =
          run_replicate(setting, model, methods, options.attribution, r, replicate_seed(base_seed, r),
                        options.hsic_weight);
    }
  };
  const int jobs = std::clamp(options.jobs, 1, n_runs);
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < jobs; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  for (std::size_t mi = 0; mi < methods.size(); ++mi) {
    MethodScorecard card;
    card.setting = setting.name;
    card.method = methods[mi];
    double plus = 0, minus = 0, auc = 0;
    int n_plus = 0, n_minus = 0, n_auc = 0;
    for (const auto& run : out.runs) {
      if (run.excluded) continue;
      const MethodScore& s = run.scores[mi];
      if (s.plus) plus += *s.plus, ++n_plus;
      if (s.minus) minus += *s.minus, ++n_minus;
      if (s.auc) auc += *s.auc, ++n_auc;
      ++card.n_runs;
    }
    if (n_plus) card.plus_rate = plus / n_plus;
    if (n_minus) card.minus_rate = minus / n_minus;
    if (n_auc) card.auc = auc / n_auc;
    out.scorecards.push_back(card);
  }
  for (const auto& run : out.runs) out.n_excluded += run.excluded ? 1 : 0;
  return out;
}

BenchmarkResult run_benchmark(const std::string& preset_name, const std::vector<Method>& methods, int n_runs,
                              std::uint64_t base_seed, const ModelConfig& model, const BenchmarkOptions& options) {
  return run_benchmark(preset(preset_name), model, methods, n_runs, base_seed, options);
}

namespace {

std::string opt(const std::optional<double>& v) { return v ? format_double(*v) : std::string(); }

}  // namespace

std::string scorecard_csv(const BenchmarkResult& result) {
  std::string out = "setting,method,plus,minus,auc\n";
  for (const auto& c : result.scorecards) {
    out += csv_escape(c.setting) + ',' + std::string(method_name(c.method)) + ',' + opt(c.plus_rate) + ',' +
           opt(c.minus_rate) + ',' + opt(c.auc) + '\n';
  }
  return out;
}

std::string runs_csv(const BenchmarkResult& result) {
  std::string out = "run,seed,status,method,plus,minus,auc,holdout_auc\n";
  for (const auto& r : result.runs) {
    const std::string head = std::to_string(r.run) + ',' + std::to_string(r.seed) + ',';
    if (r.excluded) {
      out += head + "excluded,,,,," + '\n';
      continue;
    }
    for (const auto& s : r.scores) {
      out += head + "ok," + std::string(method_name(s.method)) + ',' + opt(s.plus) + ',' + opt(s.minus) + ',' +
             opt(s.auc) + ',' + format_double(r.holdout_auc) + '\n';
    }
  }
  return out;
}

}  // namespace bvgae
