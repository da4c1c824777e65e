#include "bvgae/hsic.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace bvgae {

namespace {

Matrix squared_distances(const Matrix& u) {
  const Vector norms = u.rowwise().squaredNorm();
  Matrix d = -2.0 * (u * u.transpose());
  d.colwise() += norms;
  d.rowwise() += norms.transpose();
  d = d.cwiseMax(0.0);
  d.diagonal().setZero();
  return d;
}

void require_rows(const Matrix& u, const Matrix& v) {
  if (u.rows() != v.rows()) {
    throw num::ShapeError("hsic: row counts differ (" + std::to_string(u.rows()) + " vs " +
                          std::to_string(v.rows()) + ")");
  }
  if (u.rows() < 4) throw std::invalid_argument("hsic: need at least 4 samples");
}

struct MedianPairs {
  double bandwidth = kBandwidthFloor;
  // Pairs whose squared distances average to bandwidth^2.
  std::vector<std::pair<Eigen::Index, Eigen::Index>> pairs;
  bool floored = true;
};

MedianPairs median_pairs(const Matrix& u) {
  MedianPairs out;
  const Eigen::Index n = u.rows();
  if (n < 2) return out;
  const Matrix d2 = squared_distances(u);
  struct Entry {
    double d2;
    Eigen::Index i, j;
  };
  std::vector<Entry> dist;
  dist.reserve(static_cast<std::size_t>(n * (n - 1) / 2));
  for (Eigen::Index j = 1; j < n; ++j) {
    for (Eigen::Index i = 0; i < j; ++i) dist.push_back({d2(i, j), i, j});
  }
  auto less = [](const Entry& a, const Entry& b) {
    if (a.d2 != b.d2) return a.d2 < b.d2;
    return a.j != b.j ? a.j < b.j : a.i < b.i;
  };
  const auto mid = dist.begin() + static_cast<std::ptrdiff_t>(dist.size() / 2);
  std::nth_element(dist.begin(), mid, dist.end(), less);
  double median_d2 = mid->d2;
  out.pairs.emplace_back(mid->i, mid->j);
  if (dist.size() % 2 == 0) {
    const auto lower = std::max_element(dist.begin(), mid, less);
    median_d2 = 0.5 * (median_d2 + lower->d2);
    out.pairs.emplace_back(lower->i, lower->j);
  }
  const double median = std::sqrt(median_d2);
  out.floored = !(median > kBandwidthFloor);
  out.bandwidth = out.floored ? kBandwidthFloor : median;
  return out;
}

}  // namespace

double median_bandwidth(const Matrix& u) { return median_pairs(u).bandwidth; }

Matrix gaussian_gram(const Matrix& u, double bandwidth) {
  const double scale = -1.0 / (2.0 * bandwidth * bandwidth);
  return (squared_distances(u).array() * scale).exp().matrix();
}

Matrix double_center(const Matrix& k) {
  const Vector row_mean = k.rowwise().mean();
  const Vector col_mean = k.colwise().mean().transpose();
  const double grand = k.mean();
  Matrix out = k;
  out.colwise() -= row_mean;
  out.rowwise() -= col_mean.transpose();
  out.array() += grand;
  return out;
}

double hsic(const Matrix& u, const Matrix& v) {
  require_rows(u, v);
  const auto n = static_cast<double>(u.rows());
  const Matrix k = gaussian_gram(u, median_bandwidth(u));
  const Matrix lc = double_center(gaussian_gram(v, median_bandwidth(v)));
  // tr(K H L H) = sum(K .* (H L H)) since K and HLH are symmetric.
  return k.cwiseProduct(lc).sum() / ((n - 1.0) * (n - 1.0));
}

num::Var<double> hsic(num::Var<double> u, const Matrix& v) {
  const Matrix& uv = u.value();
  require_rows(uv, v);
  const auto n = static_cast<double>(uv.rows());
  const MedianPairs med = median_pairs(uv);
  const double bw = med.bandwidth;
  const double norm = 1.0 / ((n - 1.0) * (n - 1.0));
  const Matrix d2 = squared_distances(uv);
  const Matrix k = (d2.array() * (-1.0 / (2.0 * bw * bw))).exp().matrix();
  Matrix m = norm * k.cwiseProduct(double_center(gaussian_gram(v, median_bandwidth(v))));
  Matrix out(1, 1);
  out(0, 0) = m.sum();
  // Through the kernel entries: d/du_a = -(2 / bw^2) sum_j M_aj (u_a - u_j).
  // Through the bandwidth: d/d(bw) = sum_ij M_ij d2_ij / bw^3, and bw^2 is the
  // mean squared distance of the median pair(s).
  const double dval_dbw = med.floored ? 0.0 : m.cwiseProduct(d2).sum() / (bw * bw * bw);
  return u.tape->push(
      std::move(out), u.tape->requires_grad(u),
      [u, m = std::move(m), bw, dval_dbw, pairs = med.pairs](num::Tape<double>& tp, const Matrix& g) {
        const Matrix& x = tp.value(u);
        const Vector row_sum = m.rowwise().sum();
        Matrix grad = (-2.0 / (bw * bw)) * (row_sum.asDiagonal() * x - m * x);
        if (dval_dbw != 0.0) {
          // bw = sqrt(mean_p |x_i - x_j|^2) => d(bw)/dx_i = (x_i - x_j) / (|pairs| bw).
          const double c = dval_dbw / (static_cast<double>(pairs.size()) * bw);
          for (const auto& [i, j] : pairs) {
            const Eigen::RowVectorXd diff = x.row(i) - x.row(j);
            grad.row(i) += c * diff;
            grad.row(j) -= c * diff;
          }
        }
        tp.accumulate(u, g(0, 0) * grad);
      });
}

}  // namespace bvgae
