#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "bvgae/attribution.hpp"
#include "bvgae/graph.hpp"
#include "bvgae/rng.hpp"

namespace bvgae {

// Generator configuration. Study 1 draws a latent-Gaussian bipartite graph;
// study 2 draws an SBM of possible plant-insect interactions observed
// through a session-level sampling process.
struct SimSetting {
  std::string name;
  int study = 1;
  int d_plus = 3;  // D- = D+
  int d_noise = 50;
  int k_groups = 1;
  std::vector<int> gamma_set{1};
  int hsic_cols = 0;
  bool include_p_in_h = false;
  std::uint64_t seed = 0;

  int n1 = 1000;
  int n2 = 100;
  int n_plants = 83;    // study 2 only
  double beta0 = 0.0;   // study 2 only

  int d_minus() const { return d_plus; }
  int latent_dim() const { return 2 * d_plus; }
  void validate() const;
};

class UnknownPreset : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

std::vector<std::string> preset_names();
// Table rows 1.A-1.D and 2.A-2.F with their default sizes.
SimSetting preset(std::string_view name);

// SBM of the study-2 possible-interaction network.
struct SbmParameters {
  std::vector<double> row_proportions{0.3, 0.4, 0.3};
  std::vector<double> col_proportions{0.2, 0.4, 0.4};
  Matrix connectivity = (Matrix(3, 3) << 0.95, 0.80, 0.50, 0.90, 0.55, 0.20, 0.70, 0.25, 0.06).finished();

  // alpha^T pi beta: expected density of the SBM.
  double expected_density() const;
};

struct GroundTruth {
  Matrix gamma;          // K x D effects in {-1, 0, 1}
  Matrix expected_sign;  // K x d1
  Matrix signal_mask;    // K x d1
  Matrix evaluated;      // K x d1; 0 on the H block
  std::vector<int> hsic_columns;  // X1 column indices of protected columns
  int h_width = 1;
  std::vector<std::string> feature_names;  // d1
};

struct Covariates {
  Matrix x1;
  GroundTruth truth;
  GroupPartition partition;
};

struct LatentGraph {
  BipartiteGraph graph;  // X1 has no columns yet; X2 = 1
  Matrix z1;             // n1 x D
  Matrix z2;             // n2 x D
};

struct SamplingProcessTruth {
  Matrix b0_prime;        // u x n2 possible interactions
  std::vector<int> plant_choice;  // Y, one per session
  Vector observation_probability;  // p
  std::vector<int> row_blocks;     // V1
  std::vector<int> col_blocks;     // V2
};

// A full simulated replicate, ready for training.
struct SimulatedData {
  SimSetting setting;
  BipartiteGraph graph;             // X1 assembled
  std::optional<PlantAssignment> plants;  // study 2
  GroundTruth truth;
  GroupPartition partition;
  Matrix latent;                    // Z used for X1
  std::optional<SamplingProcessTruth> process;
};

// B(i, j) ~ Bernoulli(sigmoid(z1_i^T diag(signature) z2_j)).
Matrix sample_incidence(const Matrix& z1, const Matrix& z2, const Vector& signature, Rng& rng);

LatentGraph simulate_bipartite(const SimSetting& setting);

// X1 = [H | X | X0]. `plants`, when given, supplies P for H = [1 | P] and
// becomes the group assignment when K equals the plant count.
Covariates build_covariates(const Matrix& z, const SimSetting& setting, Rng& rng,
                            const PlantAssignment* plants = nullptr);

struct SamplingSimulation {
  BipartiteGraph graph;
  PlantAssignment plants;
  SamplingProcessTruth process;
  Matrix z;
  Covariates covariates;
};

SamplingSimulation simulate_sampling(const SimSetting& setting, const SbmParameters& sbm = {});

SimulatedData simulate(const SimSetting& setting);

}  // namespace bvgae
