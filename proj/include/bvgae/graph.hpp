#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

namespace bvgae {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Binary n1 x n2 incidence matrix with row (session) and column (insect)
// covariates.
struct BipartiteGraph {
  Matrix incidence;
  Matrix x1;
  Matrix x2;

  BipartiteGraph() = default;
  // Throws std::invalid_argument when an invariant does not hold.
  BipartiteGraph(Matrix incidence, Matrix x1, Matrix x2);

  Eigen::Index n1() const { return incidence.rows(); }
  Eigen::Index n2() const { return incidence.cols(); }
  Eigen::Index d1() const { return x1.cols(); }
  Eigen::Index d2() const { return x2.cols(); }

  void validate() const;
};

// One plant group per row; every group is nonempty.
class PlantAssignment {
 public:
  PlantAssignment() = default;
  // `plant_of_row[i]` in [0, n_plants). Throws on an empty group.
  PlantAssignment(std::vector<int> plant_of_row, int n_plants);

  static PlantAssignment from_one_hot(const Matrix& p);

  const std::vector<int>& labels() const { return plant_of_row_; }
  int n_plants() const { return n_plants_; }
  Eigen::Index n_rows() const { return static_cast<Eigen::Index>(plant_of_row_.size()); }
  std::vector<int> group_sizes() const;

  Matrix one_hot() const;

 private:
  std::vector<int> plant_of_row_;
  int n_plants_ = 0;
};

// D1^{-1/2} B D2^{-1/2}, with 0/0 := 0 for isolated rows or columns.
Matrix normalize_incidence(const Matrix& incidence);

// 1(P^T B > 0): plant k interacts with column j iff some session of plant k did.
Matrix project_plant_network(const Matrix& incidence, const PlantAssignment& plants);

// P~ with P~(i,k) = P(i,k) / |plant k|; P~^T M averages rows of M per plant.
Matrix plant_average_matrix(const PlantAssignment& plants);

// Mean of a probability matrix. Throws if an entry lies outside [0, 1].
double connectivity(const Matrix& probabilities);

bool is_binary(const Matrix& m);

}  // namespace bvgae
