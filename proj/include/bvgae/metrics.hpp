#pragma once

#include <optional>
#include <span>
#include <vector>

#include "bvgae/graph.hpp"

namespace bvgae {

// Mann-Whitney AUC with midranks for ties. nullopt when a class is empty.
std::optional<double> rank_auc(std::span<const double> scores, std::span<const int> labels);

struct SignRates {
  std::optional<double> plus;   // absent when no cell is expected positive
  std::optional<double> minus;  // absent when no cell is expected negative
};

// Fraction of expected-positive (negative) cells whose score is > 0 (< 0).
// Cells where `evaluated` is false are skipped; pass an empty matrix to
// evaluate every cell.
SignRates sign_rates(const Matrix& scores, const Matrix& expected_sign, const Matrix& evaluated = Matrix());

// AUC of |score| separating signal cells from noise cells over evaluated
// cells. Throws std::invalid_argument on single-class input.
double auc_abs(const Matrix& scores, const Matrix& signal_mask, const Matrix& evaluated = Matrix());

}  // namespace bvgae
