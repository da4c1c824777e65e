// Acceptance suite: one PASS/FAIL line per criterion.
//   bvgae_acceptance [--only N]...

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <iomanip>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "bvgae/attribution.hpp"
#include "bvgae/benchmark.hpp"
#include "bvgae/cli.hpp"
#include "bvgae/io.hpp"
#include "bvgae/model.hpp"
#include "bvgae/simulate.hpp"
#include "support.hpp"

namespace fs = std::filesystem;
using namespace bvgae;

namespace {

constexpr int kRuns = 10;
constexpr std::uint64_t kBaseSeed = 1;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(double v, int digits = 3) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(digits) << v;
  return s.str();
}

std::string fmt(const std::optional<double>& v) { return v ? fmt(*v) : "n/a"; }

const MethodScorecard& card(const BenchmarkResult& r, Method m) {
  for (const auto& c : r.scorecards) {
    if (c.method == m) return c;
  }
  throw std::logic_error("no scorecard for " + std::string(method_name(m)));
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

const std::vector<Method> kAllMethods{Method::Grad, Method::GradInput, Method::IntegratedGradients, Method::GraphSvx};

// 1.A at 10 replicates.
Outcome criterion_1() {
  const auto t0 = std::chrono::steady_clock::now();
  const BenchmarkResult r = run_benchmark("1.A", kAllMethods, kRuns, kBaseSeed);
  const double elapsed = seconds_since(t0);
  const auto& grad = card(r, Method::Grad);
  const auto& ig = card(r, Method::IntegratedGradients);
  const auto& svx = card(r, Method::GraphSvx);
  const bool pass = grad.plus_rate.value_or(0) >= 0.9 && grad.minus_rate.value_or(0) >= 0.9 &&
                    ig.auc.value_or(0) >= 0.9 && svx.minus_rate.value_or(1) <= 0.2 && elapsed <= 1200.0 &&
                    r.n_excluded == 0;
  return {pass, "grad+ " + fmt(grad.plus_rate) + " >= 0.9, grad- " + fmt(grad.minus_rate) + " >= 0.9, ig auc " +
                    fmt(ig.auc) + " >= 0.9, svx- " + fmt(svx.minus_rate) + " <= 0.2, " + fmt(elapsed, 0) +
                    " s <= 1200 s, excluded " + std::to_string(r.n_excluded)};
}

// 1.D: penalized columns score below the other signal columns under IG.
Outcome criterion_2() {
  const BenchmarkResult r = run_benchmark("1.D", {Method::IntegratedGradients}, kRuns, kBaseSeed);
  int below = 0, counted = 0;
  for (const auto& run : r.runs) {
    if (run.excluded) continue;
    ++counted;
    const Matrix& phi = run.scores.front().phi_group;
    const GroundTruth& t = run.truth;
    double pen = 0, sig = 0;
    int n_pen = 0, n_sig = 0;
    for (Eigen::Index k = 0; k < phi.rows(); ++k) {
      for (Eigen::Index j = 0; j < phi.cols(); ++j) {
        const bool penalized = std::find(t.hsic_columns.begin(), t.hsic_columns.end(), j) != t.hsic_columns.end();
        if (penalized) {
          pen += std::abs(phi(k, j));
          ++n_pen;
        } else if (t.signal_mask(k, j) == 1.0 && t.evaluated(k, j) == 1.0) {
          sig += std::abs(phi(k, j));
          ++n_sig;
        }
      }
    }
    if (n_pen > 0 && n_sig > 0 && pen / n_pen < sig / n_sig) ++below;
  }
  const auto& ig = card(r, Method::IntegratedGradients);
  const bool pass = below >= 8 && ig.auc.value_or(0) >= 0.75;
  return {pass, "penalized below signal in " + std::to_string(below) + "/" + std::to_string(counted) +
                    " runs >= 8, ig auc " + fmt(ig.auc) + " >= 0.75"};
}

// IG AUC ordering between 2.C and 1.C.
Outcome criterion_3() {
  const BenchmarkResult c1 = run_benchmark("1.C", {Method::IntegratedGradients}, kRuns, kBaseSeed);
  const BenchmarkResult c2 = run_benchmark("2.C", {Method::IntegratedGradients}, kRuns, kBaseSeed);
  const auto a1 = card(c1, Method::IntegratedGradients).auc;
  const auto a2 = card(c2, Method::IntegratedGradients).auc;
  const bool pass = a1 && a2 && *a2 > *a1;
  return {pass, "ig auc 2.C " + fmt(a2) + " > 1.C " + fmt(a1)};
}

// 2.F: every method near chance.
Outcome criterion_4() {
  const BenchmarkResult r = run_benchmark("2.F", kAllMethods, kRuns, kBaseSeed);
  bool pass = r.n_excluded < kRuns;
  std::string detail;
  for (Method m : kAllMethods) {
    const auto auc = card(r, m).auc;
    pass = pass && auc && *auc >= 0.4 && *auc <= 0.6;
    detail += std::string(method_name(m)) + " auc " + fmt(auc) + ", ";
  }
  return {pass, detail + "all in [0.4, 0.6]"};
}

// Offsetting planted columns of a trained 1.A model by -0.5 and +0.5. The
// noise block is represented by its median column.
Outcome criterion_5() {
  bool pass = true;
  std::string detail;
  for (std::uint64_t seed = kBaseSeed; seed < kBaseSeed + 3; ++seed) {
    SimSetting s = preset("1.A");
    s.seed = seed;
    const SimulatedData d = simulate(s);
    const ModelConfig c = replicate_model(s, d.truth, ModelConfig{});
    const TrainedModel m = train(d.graph, nullptr, c);
    const ConnectivityFunctional f(m, d.graph);
    const Matrix& x1 = d.graph.x1;

    bool monotone = true;
    double min_signal = INFINITY;
    int n_pos = 0, n_neg = 0;
    std::vector<double> noise;
    for (Eigen::Index j = 0; j < x1.cols(); ++j) {
      if (d.truth.evaluated(0, j) != 1.0) continue;
      const double df = offset_response(f, x1, j, 0.5) - offset_response(f, x1, j, -0.5);
      const double sign = d.truth.expected_sign(0, j);
      if (sign > 0) {
        monotone = monotone && df > 0;
        ++n_pos;
      } else if (sign < 0) {
        monotone = monotone && df < 0;
        ++n_neg;
      }
      if (d.truth.signal_mask(0, j) == 1.0) {
        min_signal = std::min(min_signal, std::abs(df));
      } else {
        noise.push_back(std::abs(df));
      }
    }
    if (noise.empty() || n_pos == 0 || n_neg == 0) return {false, "no planted columns"};
    std::sort(noise.begin(), noise.end());
    const double median = noise[noise.size() / 2];
    pass = pass && monotone && median < min_signal;
    detail += "seed " + std::to_string(seed) + ": " + std::to_string(n_pos) + " up/" + std::to_string(n_neg) +
              " down " + (monotone ? "yes" : "no") + ", median noise |df| " + fmt(median) + " < min signal " +
              fmt(min_signal) + " (max noise " + fmt(noise.back()) + "); ";
  }
  return {pass, detail};
}

double factorial(int n) { return std::tgamma(n + 1.0); }

Vector exact_shapley(const std::function<double(const std::vector<char>&)>& v, int m) {
  Vector phi = Vector::Zero(m);
  for (int j = 0; j < m; ++j) {
    for (int code = 0; code < (1 << m); ++code) {
      if ((code >> j) & 1) continue;
      std::vector<char> z(static_cast<std::size_t>(m), 0);
      int size = 0;
      for (int k = 0; k < m; ++k) {
        if ((code >> k) & 1) {
          z[static_cast<std::size_t>(k)] = 1;
          ++size;
        }
      }
      std::vector<char> with = z;
      with[static_cast<std::size_t>(j)] = 1;
      phi(j) += factorial(size) * factorial(m - size - 1) / factorial(m) * (v(with) - v(z));
    }
  }
  return phi;
}

BipartiteGraph random_graph(Eigen::Index n1, Eigen::Index n2, Eigen::Index d1, std::uint64_t seed) {
  Rng rng(seed);
  Matrix b = testing::bernoulli_matrix(n1, n2, 0.4, rng);
  b(0, 0) = 1;
  b(n1 - 1, n2 - 1) = 1;
  return BipartiteGraph(b, testing::uniform_matrix(n1, d1, rng), Matrix::Ones(n2, 1));
}

// Properties with no reference numbers.
Outcome criterion_6() {
  std::vector<std::string> failed;
  auto require = [&](bool ok, const std::string& what) {
    if (!ok) failed.push_back(what);
  };

  // Finite differences: training objective in every weight block, and f in X1.
  {
    const BipartiteGraph g = random_graph(6, 4, 3, 13);
    const PlantAssignment plants({0, 1, 0, 1, 2, 2}, 3);
    ModelConfig c;
    c.d_plus = 2;
    c.d_minus = 1;
    c.hidden_dim = 5;
    c.recover_bprime = true;
    c.hsic_weight = 5.0;
    c.hsic_columns = {1};
    Rng rng(77);
    const Matrix eps_rows = standard_normal(6, 3, rng);
    const Matrix eps_cols = standard_normal(4, 3, rng);
    const EncoderWeights w = initial_weights(g, c);
    const ObjectiveEvaluation ev = evaluate_objective(g, &plants, c, w, eps_rows, eps_cols);
    double worst = 0;
    for (auto member : {&EncoderWeights::row_w1, &EncoderWeights::row_w2_mu, &EncoderWeights::row_w2_sigma,
                        &EncoderWeights::col_w1, &EncoderWeights::col_w2_mu, &EncoderWeights::col_w2_sigma}) {
      const Matrix fd = testing::numeric_gradient(
          [&](const Matrix& v) {
            EncoderWeights p = w;
            p.*member = v;
            return evaluate_objective(g, &plants, c, p, eps_rows, eps_cols).total;
          },
          w.*member);
      worst = std::max(worst, testing::relative_error(ev.gradient.*member, fd));
    }
    ModelConfig fc;
    fc.epochs = 30;
    const TrainedModel m = train(g, nullptr, fc);
    const ConnectivityFunctional f(m, g);
    const Matrix fd = testing::numeric_gradient([&](const Matrix& x) { return f.value(x); }, g.x1);
    worst = std::max(worst, testing::relative_error(f.gradient(g.x1), fd));
    require(worst <= 1e-4, "finite differences " + fmt(worst, 8));
  }

  // IG completeness at m = 128 on a trained model with a planted degree signal.
  {
    Rng rng(5);
    const Matrix x1 = testing::uniform_matrix(30, 4, rng);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Matrix b = Matrix::Zero(30, 8);
    for (Eigen::Index i = 0; i < 30; ++i) {
      for (Eigen::Index j = 0; j < 8; ++j) b(i, j) = u(rng) < (x1(i, 0) > 0 ? 0.8 : 0.1) ? 1.0 : 0.0;
    }
    const BipartiteGraph g(b, x1, Matrix::Ones(8, 1));
    ModelConfig c;
    c.epochs = 150;
    const TrainedModel m = train(g, nullptr, c);
    const ConnectivityFunctional f(m, g);
    double worst = 0;
    for (const Matrix& base : {column_mean_baseline(x1), Matrix(Matrix::Zero(30, 4))}) {
      const AttributionResult r = integrated_gradients(f.as_functional(), x1, base, 128);
      const double gap = f.value(x1) - f.value(base);
      worst = std::max(worst, std::abs(r.phi.sum() - gap) / std::abs(gap));
    }
    require(worst <= 1e-3, "ig completeness " + fmt(worst, 8));
  }

  // KL >= 0, and 0 exactly at the standard-normal posterior.
  {
    Rng rng(8);
    bool ok = true;
    const BipartiteGraph g = random_graph(4, 3, 2, 1);
    for (int trial = 0; trial < 20; ++trial) {
      LatentState s;
      s.mu1 = testing::uniform_matrix(4, 2, rng);
      s.log_sigma1 = testing::uniform_matrix(4, 2, rng);
      s.mu2 = Matrix::Zero(3, 2);
      s.log_sigma2 = Matrix::Zero(3, 2);
      const LossTerms t = elbo_terms(g, s, Matrix::Constant(4, 3, 0.5));
      ok = ok && t.kl_rows >= 0.0 && t.kl_cols == 0.0;
    }
    require(ok, "kl sign");
  }

  // Negating one latent dimension on both sides leaves the decoder unchanged.
  {
    Rng rng(5);
    const Matrix z1 = testing::uniform_matrix(6, 4, rng);
    const Matrix z2 = testing::uniform_matrix(5, 4, rng);
    const Vector s = make_signature(2, 2);
    const Matrix b = decode(z1, z2, s);
    double worst = 0;
    for (int d = 0; d < 4; ++d) {
      Matrix f1 = z1, f2 = z2;
      f1.col(d) *= -1;
      f2.col(d) *= -1;
      worst = std::max(worst, (decode(f1, f2, s) - b).cwiseAbs().maxCoeff());
    }
    require(worst <= 1e-12, "signature flip " + fmt(worst, 15));
  }

  // Kernel Shapley on additive games up to ten players.
  {
    double worst = 0;
    for (int m = 2; m <= 10; ++m) {
      Rng rng(static_cast<std::uint64_t>(m));
      const Matrix coef = testing::uniform_matrix(m, 1, rng);
      auto v = [&](const std::vector<char>& z) {
        double acc = 0.5;
        for (int j = 0; j < m; ++j) acc += coef(j, 0) * z[static_cast<std::size_t>(j)];
        return acc;
      };
      const ShapleyGame g = kernel_shapley(v, m, default_coalitions(m), 3);
      worst = std::max(worst, (g.phi - exact_shapley(v, m)).cwiseAbs().maxCoeff());
    }
    require(worst <= 1e-8, "shapley " + fmt(worst, 12));
  }

  // Study 2: B <= B0'(Y, .) and B0' connectance, 20 seeds each.
  {
    bool structural = true;
    double worst = 0;
    const double expected = SbmParameters{}.expected_density();
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      SimSetting s = preset("2.A");
      s.seed = seed;
      const SamplingSimulation sim = simulate_sampling(s);
      const auto& y = sim.process.plant_choice;
      for (Eigen::Index i = 0; i < sim.graph.n1(); ++i) {
        for (Eigen::Index j = 0; j < sim.graph.n2(); ++j) {
          structural = structural &&
                       sim.graph.incidence(i, j) <= sim.process.b0_prime(y[static_cast<std::size_t>(i)], j);
        }
      }
      worst = std::max(worst, std::abs(sim.process.b0_prime.mean() - expected));
    }
    require(structural, "B <= B0'");
    require(worst <= 0.05, "connectance deviation " + fmt(worst, 4));
  }

  std::string detail = "finite differences, ig completeness, kl, signature flip, shapley, study-2 invariants";
  if (!failed.empty()) {
    detail = "failed:";
    for (const auto& f : failed) detail += " [" + f + "]";
  }
  return {failed.empty(), detail};
}

int cli(std::vector<std::string> args) {
  args.insert(args.begin(), "bvgae");
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  if (code != 0) std::cerr << err.str();
  return code;
}

// Every CSV under `a` equals its counterpart under `b`.
bool same_csvs(const fs::path& a, const fs::path& b, std::string& why, int& compared) {
  for (const auto& e : fs::recursive_directory_iterator(a)) {
    if (e.path().extension() != ".csv") continue;
    const fs::path other = b / fs::relative(e.path(), a);
    ++compared;
    if (!fs::exists(other) || testing::slurp(e.path()) != testing::slurp(other)) {
      why = fs::relative(e.path(), a).string();
      return false;
    }
  }
  return true;
}

// CLI reruns with the same config and seed.
Outcome criterion_7() {
  testing::TempDir dir("acceptance_cli");
  std::string sessions = "row_id,col_id\n", cov = "row_id,plant_id,user_id,day,year,delta_t\n",
              clc = "row_id,forest,urban\n";
  Rng rng(5);
  for (int i = 0; i < 40; ++i) {
    const std::string id = "s" + std::to_string(i);
    for (int j = 0; j < 6; ++j) {
      if (uniform01(rng) < 0.4 || j == i % 6) sessions += id + ",ins" + std::to_string(j) + "\n";
    }
    cov += id + ",plant" + std::to_string(i % 3) + ",user" + std::to_string(i % 4) + "," +
           std::to_string(i * 3 % 365) + "," + std::to_string(2018 + i % 3) + "," + std::to_string(10 + i % 7) + "\n";
    clc += id + "," + format_double(uniform01(rng)) + ",0.01\n";
  }
  testing::write_file(dir / "sessions.csv", sessions);
  testing::write_file(dir / "cov.csv", cov);
  testing::write_file(dir / "clc.csv", clc);

  auto pipeline = [&](const fs::path& root) {
    const std::string r = root.string();
    int rc = 0;
    rc |= cli({"simulate", "--preset", "1.C", "--seed", "4", "--n1", "200", "--n2", "30", "--out", r + "/sim1"});
    rc |= cli({"simulate", "--preset", "2.C", "--seed", "4", "--n1", "300", "--n2", "40", "--out", r + "/sim2"});
    rc |= cli({"train", "--data", r + "/sim2", "--epochs", "40", "--seed", "3", "--out", r + "/train"});
    rc |= cli({"attribute", "--data", r + "/sim2", "--checkpoint", r + "/train/checkpoint.json", "--grad-samples",
               "5", "--ig-steps", "8", "--coalitions", "64", "--seed", "2", "--out", r + "/attr"});
    rc |= cli({"benchmark", "--preset", "1.B", "--runs", "2", "--n1", "200", "--n2", "30", "--epochs", "30",
               "--grad-samples", "4", "--ig-steps", "8", "--coalitions", "64", "--seed", "9", "--out", r + "/bench"});
    rc |= cli({"report", "--inputs", r + "/attr/attribution.csv", "--out", r + "/report"});
    rc |= cli({"ingest", "--sessions", (dir / "sessions.csv").string(), "--covariates", (dir / "cov.csv").string(),
               "--clc", (dir / "clc.csv").string(), "--out", r + "/ingest"});
    rc |= cli({"train", "--data", r + "/ingest", "--epochs", "20", "--out", r + "/train_ingest"});
    return rc;
  };
  if (pipeline(dir / "a") != 0 || pipeline(dir / "b") != 0) return {false, "a command failed"};
  std::string why;
  int compared = 0;
  const bool pass = same_csvs(dir / "a", dir / "b", why, compared) && compared > 0;
  return {pass, pass ? std::to_string(compared) + " CSV files byte-identical across reruns of all six commands"
                     : "differs: " + why};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acceptance suite"};
  std::vector<int> only;
  app.add_option("--only", only, "Run only these criteria")->check(CLI::Range(1, 7));
  CLI11_PARSE(app, argc, argv);

  const std::vector<std::function<Outcome()>> criteria{criterion_1, criterion_2, criterion_3, criterion_4,
                                                       criterion_5, criterion_6, criterion_7};
  bool all = true;
  for (int n = 1; n <= static_cast<int>(criteria.size()); ++n) {
    if (!only.empty() && std::find(only.begin(), only.end(), n) == only.end()) continue;
    Outcome o;
    try {
      o = criteria[static_cast<std::size_t>(n - 1)]();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    std::cout << "criterion " << n << ": " << (o.pass ? "PASS" : "FAIL") << "  " << o.detail << std::endl;
    all = all && o.pass;
  }
  return all ? 0 : 1;
}
