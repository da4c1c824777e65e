#pragma once

#include <functional>
#include <vector>

#include "bvgae/graph.hpp"

namespace bvgae {

// A scalar functional of the row-covariate matrix X1 together with its
// gradient. This is the f that every attribution method explains.
struct Functional {
  using RowEvaluator = std::function<double(const Matrix& row_values)>;

  std::function<double(const Matrix&)> value;
  std::function<Matrix(const Matrix&)> gradient;
  // Optional: f at `base` with the listed rows replaced by `row_values`
  // (rows.size() x d1). Agrees with `value` up to rounding.
  std::function<RowEvaluator(const Matrix& base, const std::vector<Eigen::Index>& rows)> restrict_rows;

  double operator()(const Matrix& x) const { return value(x); }
};

}  // namespace bvgae
