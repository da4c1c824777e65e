#include "bvgae/graph.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace bvgae {

namespace {

std::string shape(const Matrix& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

}  // namespace

bool is_binary(const Matrix& m) {
  return ((m.array() == 0.0) || (m.array() == 1.0)).all();
}

BipartiteGraph::BipartiteGraph(Matrix b, Matrix x1_, Matrix x2_)
    : incidence(std::move(b)), x1(std::move(x1_)), x2(std::move(x2_)) {
  validate();
}

void BipartiteGraph::validate() const {
  if (incidence.rows() < 1 || incidence.cols() < 1) {
    throw std::invalid_argument("graph: incidence matrix must have at least one row and column");
  }
  if (!is_binary(incidence)) throw std::invalid_argument("graph: incidence entries must be 0 or 1");
  if (x1.rows() != incidence.rows()) {
    throw std::invalid_argument("graph: X1 is " + shape(x1) + " but B has " +
                                std::to_string(incidence.rows()) + " rows");
  }
  if (x2.rows() != incidence.cols()) {
    throw std::invalid_argument("graph: X2 is " + shape(x2) + " but B has " +
                                std::to_string(incidence.cols()) + " columns");
  }
}

PlantAssignment::PlantAssignment(std::vector<int> plant_of_row, int n_plants)
    : plant_of_row_(std::move(plant_of_row)), n_plants_(n_plants) {
  if (n_plants_ < 1) throw std::invalid_argument("plant assignment: need at least one plant group");
  std::vector<int> sizes(static_cast<std::size_t>(n_plants_), 0);
  for (int k : plant_of_row_) {
    if (k < 0 || k >= n_plants_) {
      throw std::invalid_argument("plant assignment: label " + std::to_string(k) + " outside [0, " +
                                  std::to_string(n_plants_) + ")");
    }
    ++sizes[static_cast<std::size_t>(k)];
  }
  for (int k = 0; k < n_plants_; ++k) {
    if (sizes[static_cast<std::size_t>(k)] == 0) {
      throw std::invalid_argument("plant assignment: plant group " + std::to_string(k) + " is empty");
    }
  }
}

PlantAssignment PlantAssignment::from_one_hot(const Matrix& p) {
  std::vector<int> labels(static_cast<std::size_t>(p.rows()));
  for (Eigen::Index i = 0; i < p.rows(); ++i) {
    int found = -1;
    for (Eigen::Index k = 0; k < p.cols(); ++k) {
      if (p(i, k) == 1.0) {
        if (found >= 0) throw std::invalid_argument("plant assignment: row " + std::to_string(i) + " has several plants");
        found = static_cast<int>(k);
      } else if (p(i, k) != 0.0) {
        throw std::invalid_argument("plant assignment: P must be binary");
      }
    }
    if (found < 0) throw std::invalid_argument("plant assignment: row " + std::to_string(i) + " has no plant");
    labels[static_cast<std::size_t>(i)] = found;
  }
  return PlantAssignment(std::move(labels), static_cast<int>(p.cols()));
}

std::vector<int> PlantAssignment::group_sizes() const {
  std::vector<int> sizes(static_cast<std::size_t>(n_plants_), 0);
  for (int k : plant_of_row_) ++sizes[static_cast<std::size_t>(k)];
  return sizes;
}

Matrix PlantAssignment::one_hot() const {
  Matrix p = Matrix::Zero(n_rows(), n_plants_);
  for (Eigen::Index i = 0; i < n_rows(); ++i) p(i, plant_of_row_[static_cast<std::size_t>(i)]) = 1.0;
  return p;
}

Matrix normalize_incidence(const Matrix& incidence) {
  const Vector row_deg = incidence.rowwise().sum();
  const Vector col_deg = incidence.colwise().sum().transpose();
  Matrix out = Matrix::Zero(incidence.rows(), incidence.cols());
  for (Eigen::Index j = 0; j < incidence.cols(); ++j) {
    for (Eigen::Index i = 0; i < incidence.rows(); ++i) {
      const double d = row_deg(i) * col_deg(j);
      if (d > 0.0) out(i, j) = incidence(i, j) / std::sqrt(d);
    }
  }
  return out;
}

Matrix project_plant_network(const Matrix& incidence, const PlantAssignment& plants) {
  if (plants.n_rows() != incidence.rows()) {
    throw std::invalid_argument("project_plant_network: P has " + std::to_string(plants.n_rows()) +
                                " rows but B has " + std::to_string(incidence.rows()));
  }
  const Matrix counts = plants.one_hot().transpose() * incidence;
  return (counts.array() > 0.0).cast<double>().matrix();
}

Matrix plant_average_matrix(const PlantAssignment& plants) {
  const auto sizes = plants.group_sizes();
  Matrix p = Matrix::Zero(plants.n_rows(), plants.n_plants());
  for (Eigen::Index i = 0; i < plants.n_rows(); ++i) {
    const int k = plants.labels()[static_cast<std::size_t>(i)];
    p(i, k) = 1.0 / sizes[static_cast<std::size_t>(k)];
  }
  return p;
}

double connectivity(const Matrix& probabilities) {
  if (probabilities.size() == 0) throw std::invalid_argument("connectivity: empty matrix");
  if (!((probabilities.array() >= 0.0) && (probabilities.array() <= 1.0)).all()) {
    throw std::invalid_argument("connectivity: entries must lie in [0, 1]");
  }
  return probabilities.mean();
}

}  // namespace bvgae
