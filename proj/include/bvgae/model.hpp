#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "bvgae/functional.hpp"
#include "bvgae/graph.hpp"
#include "bvgae/rng.hpp"

namespace bvgae {

struct ModelConfig {
  int d_plus = 3;
  int d_minus = 3;
  int hidden_dim = 32;
  int epochs = 300;
  double learning_rate = 0.01;
  double hsic_weight = 0.0;
  // Protected columns of X1; empty selects the plain model.
  std::vector<int> hsic_columns;
  bool recover_bprime = false;
  double bprime_weight = 1.0;
  double holdout_fraction = 0.1;
  std::uint64_t seed = 0;

  int latent_dim() const { return d_plus + d_minus; }
  void validate() const;
};

// GCN_mu and GCN_sigma of a side share the first layer, so each side stores a
// single first-layer matrix.
struct EncoderWeights {
  Matrix row_w1;        // d1 x hidden
  Matrix row_w2_mu;     // hidden x D
  Matrix row_w2_sigma;  // hidden x D
  Matrix col_w1;        // d2 x hidden
  Matrix col_w2_mu;     // hidden x D
  Matrix col_w2_sigma;  // hidden x D

  // Glorot-uniform initialization.
  static EncoderWeights glorot(Eigen::Index d1, Eigen::Index d2, int hidden, int latent_dim, Rng& rng);
  static EncoderWeights zeros(Eigen::Index d1, Eigen::Index d2, int hidden, int latent_dim);

  bool operator==(const EncoderWeights& other) const;
};

struct LatentState {
  Matrix mu1, log_sigma1;
  Matrix mu2, log_sigma2;
  Matrix z1, z2;
};

// d_plus entries +1 followed by d_minus entries -1.
Vector make_signature(int d_plus, int d_minus);

// Reparameterized sample z = mu + sigma .* eps.
LatentState encode(const BipartiteGraph& graph, const EncoderWeights& weights, Rng& rng);
// Same posterior parameters with z = mu.
LatentState encode_mean(const BipartiteGraph& graph, const EncoderWeights& weights);

// sigmoid(z1 diag(signature) z2^T).
Matrix decode(const Matrix& z1, const Matrix& z2, const Vector& signature);

// #zeros / #ones of a binary matrix; 1 when either class is absent.
double positive_weight(const Matrix& target);

struct LossTerms {
  double reconstruction = 0.0;
  double kl_rows = 0.0;
  double kl_cols = 0.0;
  double bprime = 0.0;

  double total() const { return reconstruction + kl_rows + kl_cols + bprime; }
};

// Negative ELBO: weighted mean BCE(B, B_hat) + KL_1 / n1^2 + KL_2 / n2^2, with
// KL_s summed over the entries of side s.
LossTerms elbo_terms(const BipartiteGraph& graph, const LatentState& latent, const Matrix& b_hat,
                     std::optional<double> pos_weight = std::nullopt);
double elbo_loss(const BipartiteGraph& graph, const LatentState& latent, const Matrix& b_hat,
                 std::optional<double> pos_weight = std::nullopt);

// elbo_loss + bprime_weight * BCE(B', P~^T B_hat), B' weighted by its own
// class ratio.
LossTerms spipoll_terms(const BipartiteGraph& graph, const PlantAssignment& plants, const LatentState& latent,
                        const Matrix& b_hat, std::optional<double> pos_weight = std::nullopt,
                        double bprime_weight = 1.0);
double spipoll_loss(const BipartiteGraph& graph, const PlantAssignment& plants, const LatentState& latent,
                    const Matrix& b_hat, std::optional<double> pos_weight = std::nullopt,
                    double bprime_weight = 1.0);

struct EpochRecord {
  int epoch = 0;
  double total = 0.0;
  double reconstruction = 0.0;
  double kl = 0.0;
  double bprime = 0.0;
  double hsic = 0.0;
};

struct TrainedModel {
  EncoderWeights weights;
  ModelConfig config;
  Vector signature;
  std::vector<EpochRecord> trace;
  // Link-prediction AUC on the monitoring split; NaN when the split has a single class.
  double holdout_auc = 0.0;
};

class TrainingDiverged : public std::runtime_error {
 public:
  TrainingDiverged(int epoch, const std::string& what);
  int epoch() const { return epoch_; }

 private:
  int epoch_;
};

// Full-batch Adam on the negative ELBO (plus the B' term when
// config.recover_bprime, plus hsic_weight * HSIC(mu1, protected)). The
// protected block is X1[:, config.hsic_columns] unless `protected_block` is
// given explicitly.
TrainedModel train(const BipartiteGraph& graph, const PlantAssignment* plants, const ModelConfig& config,
                   const Matrix* protected_block = nullptr);

// The initialization train() would start from.
EncoderWeights initial_weights(const BipartiteGraph& graph, const ModelConfig& config);

// Loss and per-weight gradients of the training objective at fixed noise.
struct ObjectiveEvaluation {
  double total = 0.0;
  LossTerms terms;
  double hsic = 0.0;
  EncoderWeights gradient;
};
ObjectiveEvaluation evaluate_objective(const BipartiteGraph& graph, const PlantAssignment* plants,
                                       const ModelConfig& config, const EncoderWeights& weights,
                                       const Matrix& eps_rows, const Matrix& eps_cols,
                                       const Matrix* protected_block = nullptr);

// Expected connectivity f(X1) = mean(B_hat) or mean(P~^T B_hat), evaluated on
// the mean embedding. X1 of `graph` is replaced by the argument.
class ConnectivityFunctional {
 public:
  ConnectivityFunctional(const TrainedModel& model, const BipartiteGraph& graph,
                         const PlantAssignment* plants = nullptr);

  double value(const Matrix& x1) const;
  Matrix gradient(const Matrix& x1) const;
  Functional as_functional() const;
  // Cached evaluation of f for inputs equal to `base` outside `rows`.
  Functional::RowEvaluator restrict_rows(const Matrix& base, const std::vector<Eigen::Index>& rows) const;

  Eigen::Index n1() const { return norm_.rows(); }
  Eigen::Index d1() const { return row_w1_.rows(); }

 private:
  void check(const Matrix& x1) const;
  double finish(const Matrix& h1_pre) const;

  Matrix norm_;        // B~
  Matrix norm_t_;      // B~^T
  Matrix row_w1_;
  Matrix row_w2_mu_;
  Matrix col_mu_signed_;  // mu2 diag(signature), n2 x D
  Vector row_weight_;     // f = sum_i row_weight_(i) sum_j B_hat(i, j)
};

double predict_connectivity(const TrainedModel& model, const BipartiteGraph& graph,
                            const PlantAssignment* plants = nullptr);

// Offsets column `feature` of X1 by `delta` for every node and returns f.
double offset_response(const ConnectivityFunctional& f, const Matrix& x1, Eigen::Index feature, double delta);

}  // namespace bvgae
