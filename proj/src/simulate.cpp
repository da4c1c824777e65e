#include "bvgae/simulate.hpp"

#include <algorithm>
#include <iostream>
#include <numeric>
#include <random>

#include "bvgae/tape.hpp"

namespace bvgae {

namespace {

// Substreams of one replicate.
enum Stream : std::uint64_t { kLatent = 1, kEdges = 2, kCovariates = 3, kSbm = 4, kPlants = 5, kObserve = 6 };

struct PresetRow {
  const char* name;
  int study, d_plus, d_noise, k;
  std::vector<int> gamma;
  int hsic;
  bool with_p;
};

const std::vector<PresetRow>& preset_table() {
  static const std::vector<PresetRow> rows = {
      {"1.A", 1, 3, 50, 1, {1}, 0, false},         {"1.B", 1, 1, 1, 2, {1, -1}, 0, false},
      {"1.C", 1, 3, 6, 2, {1, 0, -1}, 0, false},   {"1.D", 1, 3, 1, 4, {1}, 2, false},
      {"2.A", 2, 3, 50, 1, {1}, 0, false},         {"2.B", 2, 1, 1, 2, {1, -1}, 0, false},
      {"2.C", 2, 3, 6, 2, {1, 0, -1}, 0, false},   {"2.D", 2, 3, 1, 4, {1}, 2, false},
      {"2.E", 2, 4, 8, 83, {1, 0, -1}, 2, true},   {"2.F", 2, 4, 50, 83, {1, 0, -1}, 2, true},
  };
  return rows;
}

std::vector<int> uniform_groups(Eigen::Index n, int k, Rng& rng) {
  std::uniform_int_distribution<int> dist(0, k - 1);
  std::vector<int> labels(static_cast<std::size_t>(n));
  for (;;) {
    std::vector<int> count(static_cast<std::size_t>(k), 0);
    for (auto& l : labels) {
      l = dist(rng);
      ++count[static_cast<std::size_t>(l)];
    }
    if (std::all_of(count.begin(), count.end(), [](int c) { return c > 0; })) return labels;
  }
}

// Order in which X columns are protected: first Z+ column, first Z- column,
// then the next pair.
std::vector<int> protected_signal_columns(int d_plus, int count) {
  std::vector<int> cols;
  for (int j = 0; static_cast<int>(cols.size()) < count && j < d_plus; ++j) {
    cols.push_back(j);
    if (static_cast<int>(cols.size()) < count) cols.push_back(d_plus + j);
  }
  return cols;
}

int draw_category(const std::vector<double>& p, Rng& rng) {
  std::discrete_distribution<int> dist(p.begin(), p.end());
  return dist(rng);
}

}  // namespace

void SimSetting::validate() const {
  if (study != 1 && study != 2) throw std::invalid_argument("setting: study must be 1 or 2");
  if (d_plus < 1) throw std::invalid_argument("setting: d_plus must be >= 1");
  if (d_noise < 0) throw std::invalid_argument("setting: d_noise must be >= 0");
  if (k_groups < 1) throw std::invalid_argument("setting: k_groups must be >= 1");
  if (gamma_set.empty()) throw std::invalid_argument("setting: gamma_set must be nonempty");
  for (int g : gamma_set) {
    if (g < -1 || g > 1) throw std::invalid_argument("setting: gamma values must lie in {-1, 0, 1}");
  }
  if (hsic_cols < 0 || hsic_cols > 2 * d_plus) throw std::invalid_argument("setting: hsic_cols out of range");
  if (n1 < 1 || n2 < 1) throw std::invalid_argument("setting: n1 and n2 must be >= 1");
  if (k_groups > n1) throw std::invalid_argument("setting: K larger than n1");
  if (study == 2 && n_plants < 1) throw std::invalid_argument("setting: n_plants must be >= 1");
}

std::vector<std::string> preset_names() {
  std::vector<std::string> names;
  for (const auto& r : preset_table()) names.emplace_back(r.name);
  return names;
}

SimSetting preset(std::string_view name) {
  for (const auto& r : preset_table()) {
    if (name != r.name) continue;
    SimSetting s;
    s.name = r.name;
    s.study = r.study;
    s.d_plus = r.d_plus;
    s.d_noise = r.d_noise;
    s.k_groups = r.k;
    s.gamma_set = r.gamma;
    s.hsic_cols = r.hsic;
    s.include_p_in_h = r.with_p;
    if (r.study == 2) {
      s.n1 = 1000;
      s.n2 = 306;
      s.n_plants = 83;
    }
    return s;
  }
  std::string valid;
  for (const auto& n : preset_names()) valid += (valid.empty() ? "" : ", ") + n;
  throw UnknownPreset("unknown preset '" + std::string(name) + "'; valid presets: " + valid);
}

double SbmParameters::expected_density() const {
  const Eigen::Map<const Vector> a(row_proportions.data(), static_cast<Eigen::Index>(row_proportions.size()));
  const Eigen::Map<const Vector> b(col_proportions.data(), static_cast<Eigen::Index>(col_proportions.size()));
  return a.dot(connectivity * b);
}

Matrix sample_incidence(const Matrix& z1, const Matrix& z2, const Vector& signature, Rng& rng) {
  const Matrix logits = z1 * signature.asDiagonal() * z2.transpose();
  Matrix b(logits.rows(), logits.cols());
  for (Eigen::Index i = 0; i < b.rows(); ++i) {
    for (Eigen::Index j = 0; j < b.cols(); ++j) b(i, j) = uniform01(rng) < num::sigmoid(logits(i, j)) ? 1.0 : 0.0;
  }
  return b;
}

LatentGraph simulate_bipartite(const SimSetting& setting) {
  setting.validate();
  if (setting.study != 1) throw std::invalid_argument("simulate_bipartite: setting is not study 1");
  Rng latent = make_rng(setting.seed, kLatent);
  Rng edges = make_rng(setting.seed, kEdges);
  const int d = setting.latent_dim();
  LatentGraph out;
  out.z1 = standard_normal(setting.n1, d, latent);
  out.z2 = standard_normal(setting.n2, d, latent, 1.0, 1.0);
  Vector signature(d);
  signature.head(setting.d_plus).setOnes();
  signature.tail(setting.d_minus()).setConstant(-1.0);
  Matrix b = sample_incidence(out.z1, out.z2, signature, edges);
  out.graph = BipartiteGraph(std::move(b), Matrix(setting.n1, 0), Matrix::Ones(setting.n2, 1));
  return out;
}

Covariates build_covariates(const Matrix& z, const SimSetting& setting, Rng& rng, const PlantAssignment* plants) {
  setting.validate();
  const Eigen::Index n1 = z.rows();
  const int d = setting.latent_dim();
  const int k = setting.k_groups;
  if (z.cols() != d) throw std::invalid_argument("build_covariates: Z has " + std::to_string(z.cols()) +
                                                 " columns, setting needs " + std::to_string(d));
  if (k > n1) throw std::invalid_argument("build_covariates: K = " + std::to_string(k) + " exceeds n1 = " +
                                          std::to_string(n1));
  if (plants != nullptr && plants->n_rows() != n1) throw std::invalid_argument("build_covariates: plant rows differ from n1");

  Covariates out;
  std::vector<std::string> group_names;
  for (int g = 0; g < k; ++g) group_names.push_back(std::to_string(g + 1));
  if (k == 1) {
    out.partition = GroupPartition::single(n1);
  } else if (plants != nullptr && plants->n_plants() == k) {
    out.partition = GroupPartition(plants->labels(), k, group_names);
  } else {
    out.partition = GroupPartition(uniform_groups(n1, k, rng), k, group_names);
  }

  // Round-robin over Gamma, shuffled, so every value occurs.
  std::vector<int> cells(static_cast<std::size_t>(k * d));
  for (std::size_t c = 0; c < cells.size(); ++c) cells[c] = setting.gamma_set[c % setting.gamma_set.size()];
  std::shuffle(cells.begin(), cells.end(), rng);
  out.truth.gamma.resize(k, d);
  for (int g = 0; g < k; ++g) {
    for (int j = 0; j < d; ++j) out.truth.gamma(g, j) = cells[static_cast<std::size_t>(g * d + j)];
  }

  Matrix x(n1, d);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (Eigen::Index i = 0; i < n1; ++i) {
    const int g = out.partition.labels[static_cast<std::size_t>(i)];
    for (int j = 0; j < d; ++j) {
      const double gamma = out.truth.gamma(g, j);
      x(i, j) = gamma != 0.0 ? gamma * z(i, j) : normal(rng);
    }
  }
  const Matrix x0 = standard_normal(n1, setting.d_noise, rng);

  Matrix h = Matrix::Ones(n1, 1);
  std::vector<std::string> names{"ones"};
  if (setting.include_p_in_h) {
    const Matrix p = plants != nullptr ? plants->one_hot()
                                       : PlantAssignment(out.partition.labels, out.partition.k).one_hot();
    Matrix hp(n1, 1 + p.cols());
    hp << h, p;
    h = std::move(hp);
    for (Eigen::Index c = 0; c < p.cols(); ++c) names.push_back("plant:" + std::to_string(c + 1));
  }
  const int hw = static_cast<int>(h.cols());
  for (int j = 0; j < setting.d_plus; ++j) names.push_back("xpos" + std::to_string(j + 1));
  for (int j = 0; j < setting.d_minus(); ++j) names.push_back("xneg" + std::to_string(j + 1));
  for (int j = 0; j < setting.d_noise; ++j) names.push_back("noise" + std::to_string(j + 1));

  out.x1.resize(n1, hw + d + setting.d_noise);
  out.x1 << h, x, x0;

  const Eigen::Index d1 = out.x1.cols();
  GroundTruth& t = out.truth;
  t.h_width = hw;
  t.feature_names = std::move(names);
  t.expected_sign = Matrix::Zero(k, d1);
  t.signal_mask = Matrix::Zero(k, d1);
  t.evaluated = Matrix::Zero(k, d1);
  t.evaluated.rightCols(d1 - hw).setOnes();
  const auto protected_cols = protected_signal_columns(setting.d_plus, setting.hsic_cols);
  for (int c : protected_cols) t.hsic_columns.push_back(hw + c);
  for (int g = 0; g < k; ++g) {
    for (int j = 0; j < d; ++j) {
      if (std::find(protected_cols.begin(), protected_cols.end(), j) != protected_cols.end()) continue;
      const double gamma = t.gamma(g, j);
      if (gamma == 0.0) continue;
      const double direction = j < setting.d_plus ? 1.0 : -1.0;
      t.expected_sign(g, hw + j) = gamma * direction;
      t.signal_mask(g, hw + j) = 1.0;
    }
  }
  return out;
}

SamplingSimulation simulate_sampling(const SimSetting& setting, const SbmParameters& sbm) {
  setting.validate();
  if (setting.study != 2) throw std::invalid_argument("simulate_sampling: setting is not study 2");
  const int u = setting.n_plants;
  const int n1 = setting.n1;
  const int n2 = setting.n2;
  SamplingSimulation out;
  SamplingProcessTruth& proc = out.process;

  Rng sbm_rng = make_rng(setting.seed, kSbm);
  proc.row_blocks.resize(static_cast<std::size_t>(u));
  proc.col_blocks.resize(static_cast<std::size_t>(n2));
  for (auto& v : proc.row_blocks) v = draw_category(sbm.row_proportions, sbm_rng);
  for (auto& v : proc.col_blocks) v = draw_category(sbm.col_proportions, sbm_rng);
  proc.b0_prime.resize(u, n2);
  for (int k = 0; k < u; ++k) {
    for (int j = 0; j < n2; ++j) {
      const double pi = sbm.connectivity(proc.row_blocks[static_cast<std::size_t>(k)],
                                         proc.col_blocks[static_cast<std::size_t>(j)]);
      proc.b0_prime(k, j) = uniform01(sbm_rng) < pi ? 1.0 : 0.0;
    }
  }

  Rng plant_rng = make_rng(setting.seed, kPlants);
  std::uniform_int_distribution<int> pick(0, u - 1);
  proc.plant_choice.resize(static_cast<std::size_t>(n1));
  std::vector<int> used(static_cast<std::size_t>(u), 0);
  const bool redraw = n1 >= 5 * u;
  for (;;) {
    std::fill(used.begin(), used.end(), 0);
    for (auto& y : proc.plant_choice) {
      y = pick(plant_rng);
      used[static_cast<std::size_t>(y)] = 1;
    }
    if (!redraw || std::all_of(used.begin(), used.end(), [](int c) { return c != 0; })) break;
  }
  // Plants never drawn are dropped from P's columns.
  std::vector<int> remap(static_cast<std::size_t>(u), -1);
  int kept = 0;
  for (int k = 0; k < u; ++k) {
    if (used[static_cast<std::size_t>(k)]) remap[static_cast<std::size_t>(k)] = kept++;
  }
  if (kept < u) std::clog << "simulate_sampling: " << (u - kept) << " plant(s) never chosen; dropped from P\n";
  std::vector<int> labels(static_cast<std::size_t>(n1));
  for (int i = 0; i < n1; ++i) labels[static_cast<std::size_t>(i)] = remap[static_cast<std::size_t>(proc.plant_choice[static_cast<std::size_t>(i)])];
  out.plants = PlantAssignment(std::move(labels), kept);

  Rng obs = make_rng(setting.seed, kObserve);
  const int d = setting.latent_dim();
  out.z = standard_normal(n1, d, obs);
  Vector beta(d);
  beta.head(setting.d_plus).setOnes();
  beta.tail(setting.d_minus()).setConstant(-1.0);
  const Vector logit = (out.z * beta).array() + setting.beta0;
  proc.observation_probability = logit.unaryExpr([](double v) { return num::sigmoid(v); });
  Matrix b(n1, n2);
  for (int i = 0; i < n1; ++i) {
    const int y = proc.plant_choice[static_cast<std::size_t>(i)];
    for (int j = 0; j < n2; ++j) {
      b(i, j) = uniform01(obs) < proc.observation_probability(i) * proc.b0_prime(y, j) ? 1.0 : 0.0;
    }
  }

  Rng cov = make_rng(setting.seed, kCovariates);
  SimSetting effective = setting;
  if (setting.k_groups == u) effective.k_groups = kept;
  out.covariates = build_covariates(out.z, effective, cov, &out.plants);
  out.graph = BipartiteGraph(std::move(b), out.covariates.x1, Matrix::Ones(n2, 1));
  return out;
}

SimulatedData simulate(const SimSetting& setting) {
  SimulatedData data;
  data.setting = setting;
  if (setting.study == 1) {
    LatentGraph lg = simulate_bipartite(setting);
    Rng cov = make_rng(setting.seed, kCovariates);
    Covariates c = build_covariates(lg.z1, setting, cov);
    data.graph = BipartiteGraph(std::move(lg.graph.incidence), c.x1, std::move(lg.graph.x2));
    data.truth = std::move(c.truth);
    data.partition = std::move(c.partition);
    data.latent = std::move(lg.z1);
  } else {
    SamplingSimulation s = simulate_sampling(setting);
    data.graph = std::move(s.graph);
    data.plants = std::move(s.plants);
    data.truth = std::move(s.covariates.truth);
    data.partition = std::move(s.covariates.partition);
    data.latent = std::move(s.z);
    data.process = std::move(s.process);
  }
  return data;
}

}  // namespace bvgae
