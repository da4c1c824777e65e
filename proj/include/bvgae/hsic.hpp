#pragma once

#include "bvgae/graph.hpp"
#include "bvgae/tape.hpp"

namespace bvgae {

inline constexpr double kBandwidthFloor = 1e-8;

// Median pairwise Euclidean distance between rows, floored at kBandwidthFloor.
double median_bandwidth(const Matrix& u);

// exp(-|u_i - u_j|^2 / (2 bandwidth^2)).
Matrix gaussian_gram(const Matrix& u, double bandwidth);

// H K H with H = I - 11^T / n.
Matrix double_center(const Matrix& k);

// Biased empirical HSIC, (n-1)^-2 tr(K H L H), Gaussian kernels with
// median-heuristic bandwidths. Requires n >= 4.
double hsic(const Matrix& u, const Matrix& v);

// Differentiable in `u`, including through the median bandwidth of `u`.
num::Var<double> hsic(num::Var<double> u, const Matrix& v);

}  // namespace bvgae
