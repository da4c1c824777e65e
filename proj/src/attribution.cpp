#include "bvgae/attribution.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <stdexcept>

#include "bvgae/rng.hpp"

namespace bvgae {

std::string_view method_name(Method m) {
  switch (m) {
    case Method::Grad: return "grad";
    case Method::GradInput: return "gradinput";
    case Method::IntegratedGradients: return "ig";
    case Method::GraphSvx: return "graphsvx";
  }
  return "unknown";
}

std::optional<Method> parse_method(std::string_view name) {
  if (name == "grad" || name == "smoothgrad") return Method::Grad;
  if (name == "gradinput" || name == "grad_input" || name == "gxi") return Method::GradInput;
  if (name == "ig" || name == "integrated_gradients") return Method::IntegratedGradients;
  if (name == "graphsvx" || name == "svx") return Method::GraphSvx;
  return std::nullopt;
}

GroupPartition::GroupPartition(std::vector<int> labels_, int k_, std::vector<std::string> names_)
    : labels(std::move(labels_)), k(k_), names(std::move(names_)) {
  if (k < 1) throw std::invalid_argument("group partition: K must be >= 1");
  if (!names.empty() && static_cast<int>(names.size()) != k) {
    throw std::invalid_argument("group partition: expected " + std::to_string(k) + " group names");
  }
  const auto s = sizes();
  for (int g = 0; g < k; ++g) {
    if (s[static_cast<std::size_t>(g)] == 0) {
      throw std::invalid_argument("group partition: group " + name(g) + " is empty");
    }
  }
}

GroupPartition GroupPartition::single(Eigen::Index n) {
  return GroupPartition(std::vector<int>(static_cast<std::size_t>(n), 0), 1);
}

std::vector<int> GroupPartition::sizes() const {
  std::vector<int> s(static_cast<std::size_t>(k), 0);
  for (int g : labels) {
    if (g < 0 || g >= k) throw std::invalid_argument("group partition: label " + std::to_string(g) + " out of range");
    ++s[static_cast<std::size_t>(g)];
  }
  return s;
}

std::string GroupPartition::name(int group) const {
  if (!names.empty()) return names[static_cast<std::size_t>(group)];
  return std::to_string(group + 1);
}

Vector noise_scales(const Matrix& x) {
  return 0.1 * (x.colwise().maxCoeff() - x.colwise().minCoeff()).transpose();
}

AttributionResult smoothgrad(const Functional& f, const Matrix& x, int k_samples, std::uint64_t seed) {
  if (k_samples < 1) throw std::invalid_argument("smoothgrad: k_samples must be >= 1");
  const Vector sigma = noise_scales(x);
  AttributionResult r;
  r.method = Method::Grad;
  r.seed = seed;
  if ((sigma.array() == 0.0).all()) {
    r.phi = f.gradient(x);
    r.phi_global = r.phi.colwise().mean().transpose();
    return r;
  }
  Matrix acc = Matrix::Zero(x.rows(), x.cols());
  for (int k = 0; k < k_samples; ++k) {
    Rng rng = make_rng(seed, static_cast<std::uint64_t>(k));
    const Matrix noise = standard_normal(x.rows(), x.cols(), rng) * sigma.asDiagonal();
    acc += f.gradient(x + noise);
  }
  r.phi = acc / static_cast<double>(k_samples);
  r.phi_global = r.phi.colwise().mean().transpose();
  return r;
}

AttributionResult grad_times_input(const AttributionResult& grad, const Matrix& x) {
  if (grad.phi.rows() != x.rows() || grad.phi.cols() != x.cols()) {
    throw std::invalid_argument("grad_times_input: gradient scores do not match X");
  }
  AttributionResult r;
  r.method = Method::GradInput;
  r.phi = x.cwiseProduct(grad.phi);
  r.phi_global = r.phi.colwise().mean().transpose();
  r.seed = grad.seed;
  return r;
}

AttributionResult grad_times_input(const Functional& f, const Matrix& x, int k_samples, std::uint64_t seed) {
  return grad_times_input(smoothgrad(f, x, k_samples, seed), x);
}

Matrix column_mean_baseline(const Matrix& x) {
  Matrix b(x.rows(), x.cols());
  b.rowwise() = x.colwise().mean();
  return b;
}

AttributionResult integrated_gradients(const Functional& f, const Matrix& x, const Matrix& baseline, int m_steps) {
  if (m_steps < 2) throw std::invalid_argument("integrated_gradients: m_steps must be >= 2");
  if (baseline.rows() != x.rows() || baseline.cols() != x.cols()) {
    throw std::invalid_argument("integrated_gradients: baseline shape differs from X");
  }
  const Matrix delta = x - baseline;
  Matrix acc = Matrix::Zero(x.rows(), x.cols());
  for (int t = 0; t < m_steps; ++t) {
    const double alpha = (static_cast<double>(t) + 0.5) / m_steps;
    acc += f.gradient(baseline + alpha * delta);
  }
  AttributionResult r;
  r.method = Method::IntegratedGradients;
  r.phi = delta.cwiseProduct(acc) / static_cast<double>(m_steps);
  r.phi_global = r.phi.colwise().mean().transpose();
  return r;
}

int default_coalitions(Eigen::Index players) {
  if (players >= 11) return 2048;
  return static_cast<int>(std::min<Eigen::Index>(Eigen::Index{1} << players, 2048));
}

ShapleyGame kernel_shapley(const std::function<double(const std::vector<char>&)>& value, int players,
                           int n_coalitions, std::uint64_t seed) {
  if (players < 1) throw std::invalid_argument("kernel_shapley: need at least one player");
  if (n_coalitions < players + 2) {
    throw std::invalid_argument("kernel_shapley: n_coalitions = " + std::to_string(n_coalitions) + " but " +
                                std::to_string(players) + " players need at least " + std::to_string(players + 2));
  }
  const auto m = static_cast<std::size_t>(players);
  ShapleyGame game;
  const double v_empty = value(std::vector<char>(m, 0));
  const double v_full = value(std::vector<char>(m, 1));
  game.intercept = v_empty;
  if (players == 1) {
    game.phi = Vector::Constant(1, v_full - v_empty);
    return game;
  }

  std::vector<std::vector<char>> masks;
  std::vector<double> weights;
  const double mm1 = static_cast<double>(players - 1);
  const bool enumerate = players < 31 && (std::int64_t{1} << players) <= n_coalitions;
  if (enumerate) {
    // Exact Shapley kernel (M-1) / (C(M, s) s (M-s)) over all proper subsets.
    const std::int64_t total = std::int64_t{1} << players;
    for (std::int64_t code = 1; code + 1 < total; ++code) {
      std::vector<char> z(m, 0);
      int s = 0;
      for (std::size_t j = 0; j < m; ++j) {
        if ((code >> j) & 1) {
          z[j] = 1;
          ++s;
        }
      }
      const double log_binom = std::lgamma(players + 1.0) - std::lgamma(s + 1.0) - std::lgamma(players - s + 1.0);
      weights.push_back(mm1 * std::exp(-log_binom) / (static_cast<double>(s) * (players - s)));
      masks.push_back(std::move(z));
    }
  } else {
    // Size uniform on 1..M-1, then a uniform subset of that size. Dividing the
    // kernel by the sampling probability leaves (M-1) / (s (M-s)) per sample.
    Rng rng = make_rng(seed, 0);
    std::uniform_int_distribution<int> size_dist(1, players - 1);
    std::vector<std::size_t> idx(m);
    for (int c = 0; c < n_coalitions - 2; ++c) {
      const int s = size_dist(rng);
      std::iota(idx.begin(), idx.end(), std::size_t{0});
      for (int j = 0; j < s; ++j) {
        std::uniform_int_distribution<std::size_t> pick(static_cast<std::size_t>(j), m - 1);
        std::swap(idx[static_cast<std::size_t>(j)], idx[pick(rng)]);
      }
      std::vector<char> z(m, 0);
      for (int j = 0; j < s; ++j) z[idx[static_cast<std::size_t>(j)]] = 1;
      weights.push_back(mm1 / (static_cast<double>(s) * (players - s)));
      masks.push_back(std::move(z));
    }
  }

  const std::set<std::vector<char>> distinct(masks.begin(), masks.end());
  const auto unknowns = static_cast<Eigen::Index>(players - 1);
  if (static_cast<Eigen::Index>(distinct.size()) < unknowns) {
    throw std::runtime_error("kernel_shapley: singular regression, " + std::to_string(distinct.size()) +
                             " distinct coalitions for " + std::to_string(unknowns) + " free coefficients (deficit " +
                             std::to_string(unknowns - static_cast<Eigen::Index>(distinct.size())) + ")");
  }

  // phi_M = (v_full - v_empty) - sum_{j<M} phi_j eliminates the efficiency
  // constraint; the intercept is pinned to v_empty.
  const double total_gain = v_full - v_empty;
  const auto rows = static_cast<Eigen::Index>(masks.size());
  Matrix a(rows, unknowns);
  Vector b(rows);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const auto& z = masks[static_cast<std::size_t>(r)];
    const double sw = std::sqrt(weights[static_cast<std::size_t>(r)]);
    const double last = z[m - 1];
    for (Eigen::Index j = 0; j < unknowns; ++j) a(r, j) = sw * (z[static_cast<std::size_t>(j)] - last);
    b(r) = sw * (value(z) - v_empty - last * total_gain);
  }
  Eigen::ColPivHouseholderQR<Matrix> qr(a);
  if (qr.rank() < unknowns) {
    throw std::runtime_error("kernel_shapley: singular regression, design rank " + std::to_string(qr.rank()) +
                             " for " + std::to_string(unknowns) + " free coefficients (deficit " +
                             std::to_string(unknowns - qr.rank()) + ")");
  }
  const Vector head = qr.solve(b);
  game.phi.resize(players);
  game.phi.head(unknowns) = head;
  game.phi(unknowns) = total_gain - head.sum();
  return game;
}

AttributionResult graphsvx_grouped(const Functional& f, const Matrix& x, const GroupPartition& partition,
                                   int n_coalitions, std::uint64_t seed) {
  if (static_cast<Eigen::Index>(partition.labels.size()) != x.rows()) {
    throw std::invalid_argument("graphsvx: partition covers " + std::to_string(partition.labels.size()) +
                                " nodes, X has " + std::to_string(x.rows()));
  }
  const Matrix mean_input = column_mean_baseline(x);
  std::vector<std::vector<Eigen::Index>> members(static_cast<std::size_t>(partition.k));
  for (Eigen::Index i = 0; i < x.rows(); ++i) members[static_cast<std::size_t>(partition.labels[i])].push_back(i);

  AttributionResult r;
  r.method = Method::GraphSvx;
  r.seed = seed;
  r.phi_group.resize(partition.k, x.cols());
  r.intercept.resize(partition.k);
  const int players = static_cast<int>(x.cols());
  Matrix work = mean_input;
  for (int g = 0; g < partition.k; ++g) {
    const auto& rows = members[static_cast<std::size_t>(g)];
    const auto n_rows = static_cast<Eigen::Index>(rows.size());
    Matrix local(n_rows, x.cols());
    Functional::RowEvaluator fast;
    if (f.restrict_rows && 4 * n_rows <= x.rows()) fast = f.restrict_rows(mean_input, rows);
    auto value = [&](const std::vector<char>& z) {
      for (Eigen::Index k = 0; k < n_rows; ++k) {
        const Eigen::Index i = rows[static_cast<std::size_t>(k)];
        for (Eigen::Index j = 0; j < x.cols(); ++j) local(k, j) = z[static_cast<std::size_t>(j)] ? x(i, j) : mean_input(i, j);
      }
      if (fast) return fast(local);
      for (Eigen::Index k = 0; k < n_rows; ++k) work.row(rows[static_cast<std::size_t>(k)]) = local.row(k);
      return f.value(work);
    };
    const ShapleyGame game = kernel_shapley(value, players, n_coalitions, derive_seed(seed, static_cast<std::uint64_t>(g)));
    for (Eigen::Index i : rows) work.row(i) = mean_input.row(i);
    r.phi_group.row(g) = game.phi.transpose();
    r.intercept(g) = game.intercept;
  }
  const auto sizes = partition.sizes();
  r.phi_global = Vector::Zero(x.cols());
  for (int g = 0; g < partition.k; ++g) {
    r.phi_global += (static_cast<double>(sizes[static_cast<std::size_t>(g)]) / x.rows()) * r.phi_group.row(g).transpose();
  }
  return r;
}

Matrix aggregate_by_group(const AttributionResult& result, const GroupPartition& partition) {
  if (result.phi.size() == 0) throw std::invalid_argument("aggregate_by_group: result has no per-node scores");
  if (static_cast<Eigen::Index>(partition.labels.size()) != result.phi.rows()) {
    throw std::invalid_argument("aggregate_by_group: partition size differs from node count");
  }
  const auto sizes = partition.sizes();
  Matrix out = Matrix::Zero(partition.k, result.phi.cols());
  for (Eigen::Index i = 0; i < result.phi.rows(); ++i) out.row(partition.labels[i]) += result.phi.row(i);
  for (int g = 0; g < partition.k; ++g) {
    if (sizes[static_cast<std::size_t>(g)] == 0) throw std::invalid_argument("aggregate_by_group: empty group");
    out.row(g) /= sizes[static_cast<std::size_t>(g)];
  }
  return out;
}

Eigen::MatrixXi estimate_sign(const AttributionResult& grad_result) {
  const Matrix scores =
      grad_result.phi_group.size() != 0 ? grad_result.phi_group : Matrix(grad_result.phi_global.transpose());
  return scores.unaryExpr([](double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }).cast<int>();
}

}  // namespace bvgae
