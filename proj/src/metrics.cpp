#include "bvgae/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace bvgae {

std::optional<double> rank_auc(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) throw std::invalid_argument("rank_auc: scores and labels differ in length");
  const std::size_t n = scores.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  double pos_rank_sum = 0.0;
  std::size_t n_pos = 0;
  for (std::size_t start = 0; start < n;) {
    std::size_t end = start + 1;
    while (end < n && scores[order[end]] == scores[order[start]]) ++end;
    // Ranks start..end-1 (0-based) share the midrank.
    const double midrank = 0.5 * static_cast<double>(start + end + 1);
    for (std::size_t k = start; k < end; ++k) {
      if (labels[order[k]] != 0) {
        pos_rank_sum += midrank;
        ++n_pos;
      }
    }
    start = end;
  }
  const std::size_t n_neg = n - n_pos;
  if (n_pos == 0 || n_neg == 0) return std::nullopt;
  const double np = static_cast<double>(n_pos);
  return (pos_rank_sum - np * (np + 1.0) / 2.0) / (np * static_cast<double>(n_neg));
}

namespace {

void check_shapes(const char* op, const Matrix& a, const Matrix& b, const Matrix& evaluated) {
  if (a.rows() != b.rows() || a.cols() != b.cols() ||
      (evaluated.size() != 0 && (evaluated.rows() != a.rows() || evaluated.cols() != a.cols()))) {
    throw std::invalid_argument(std::string(op) + ": shape mismatch");
  }
}

bool counted(const Matrix& evaluated, Eigen::Index r, Eigen::Index c) {
  return evaluated.size() == 0 || evaluated(r, c) != 0.0;
}

}  // namespace

SignRates sign_rates(const Matrix& scores, const Matrix& expected_sign, const Matrix& evaluated) {
  check_shapes("sign_rates", scores, expected_sign, evaluated);
  int pos = 0, pos_ok = 0, neg = 0, neg_ok = 0;
  for (Eigen::Index c = 0; c < scores.cols(); ++c) {
    for (Eigen::Index r = 0; r < scores.rows(); ++r) {
      if (!counted(evaluated, r, c)) continue;
      if (expected_sign(r, c) > 0) {
        ++pos;
        if (scores(r, c) > 0) ++pos_ok;
      } else if (expected_sign(r, c) < 0) {
        ++neg;
        if (scores(r, c) < 0) ++neg_ok;
      }
    }
  }
  SignRates out;
  if (pos > 0) out.plus = static_cast<double>(pos_ok) / pos;
  if (neg > 0) out.minus = static_cast<double>(neg_ok) / neg;
  return out;
}

double auc_abs(const Matrix& scores, const Matrix& signal_mask, const Matrix& evaluated) {
  check_shapes("auc_abs", scores, signal_mask, evaluated);
  std::vector<double> s;
  std::vector<int> y;
  for (Eigen::Index c = 0; c < scores.cols(); ++c) {
    for (Eigen::Index r = 0; r < scores.rows(); ++r) {
      if (!counted(evaluated, r, c)) continue;
      s.push_back(std::abs(scores(r, c)));
      y.push_back(signal_mask(r, c) != 0.0 ? 1 : 0);
    }
  }
  const auto auc = rank_auc(s, y);
  if (!auc) throw std::invalid_argument("auc_abs: needs both signal and noise cells");
  return *auc;
}

}  // namespace bvgae
