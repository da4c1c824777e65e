#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "bvgae/functional.hpp"
#include "bvgae/graph.hpp"

namespace bvgae {

enum class Method { Grad, GradInput, IntegratedGradients, GraphSvx };

std::string_view method_name(Method m);
// Accepts "grad", "gradinput" / "grad_input", "ig", "graphsvx" / "svx".
std::optional<Method> parse_method(std::string_view name);

// Nodes split into K nonempty groups, labels in [0, K).
struct GroupPartition {
  std::vector<int> labels;
  int k = 1;
  std::vector<std::string> names;  // optional, one per group

  GroupPartition() = default;
  GroupPartition(std::vector<int> labels, int k, std::vector<std::string> names = {});
  static GroupPartition single(Eigen::Index n);

  std::vector<int> sizes() const;
  std::string name(int group) const;
};

struct AttributionResult {
  Method method = Method::Grad;
  Matrix phi;          // n1 x d1 per-node scores, empty for GraphSVX
  Vector phi_global;   // d1
  Matrix phi_group;    // K x d1, empty until aggregated
  Vector intercept;    // GraphSVX only: f at the all-mean input, per group
  std::uint64_t seed = 0;
};

// 0.1 * (max - min) per column.
Vector noise_scales(const Matrix& x);

// Mean gradient of f at X + E, E_ij ~ N(0, s_j^2) with s = noise_scales(X).
// Sample k draws from a substream derived from (seed, k).
AttributionResult smoothgrad(const Functional& f, const Matrix& x, int k_samples, std::uint64_t seed);

// X .* smoothgrad(f, X).phi
AttributionResult grad_times_input(const Functional& f, const Matrix& x, int k_samples, std::uint64_t seed);
AttributionResult grad_times_input(const AttributionResult& grad, const Matrix& x);

// Every column replaced by its mean.
Matrix column_mean_baseline(const Matrix& x);

// Midpoint Riemann sum of the path integral from `baseline` to `x`.
AttributionResult integrated_gradients(const Functional& f, const Matrix& x, const Matrix& baseline, int m_steps);

// Kernel-SHAP surrogate per group. Players of group k are the d1 features;
// a coalition keeps the selected features of group-k nodes, every other
// value is replaced by its column mean. The empty and full coalitions enter
// as exact constraints.
struct ShapleyGame {
  Vector phi;
  double intercept = 0.0;
};

// Shapley values of a set function over `players` features by weighted
// regression on coalitions (full enumeration when 2^players <= n_coalitions).
ShapleyGame kernel_shapley(const std::function<double(const std::vector<char>&)>& value, int players,
                           int n_coalitions, std::uint64_t seed);

AttributionResult graphsvx_grouped(const Functional& f, const Matrix& x, const GroupPartition& partition,
                                   int n_coalitions, std::uint64_t seed);

int default_coalitions(Eigen::Index players);

// Phi(k, j) = mean of phi(i, j) over nodes i of group k.
Matrix aggregate_by_group(const AttributionResult& result, const GroupPartition& partition);

// Elementwise sign of the group-aggregated (or global, as one row) scores.
Eigen::MatrixXi estimate_sign(const AttributionResult& grad_result);

}  // namespace bvgae
