#include "bvgae/model.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <string>

#include "bvgae/hsic.hpp"
#include "bvgae/metrics.hpp"
#include "bvgae/tape.hpp"

namespace bvgae {

using Tape = num::Tape<double>;
using Var = num::Var<double>;

void ModelConfig::validate() const {
  if (d_plus < 0 || d_minus < 0) throw std::invalid_argument("model config: d_plus and d_minus must be >= 0");
  if (d_plus + d_minus < 1) throw std::invalid_argument("model config: d_plus + d_minus must be >= 1");
  if (hidden_dim < 1) throw std::invalid_argument("model config: hidden_dim must be >= 1");
  if (epochs < 0) throw std::invalid_argument("model config: epochs must be >= 0");
  if (!(learning_rate > 0.0)) throw std::invalid_argument("model config: learning_rate must be > 0");
  if (!(hsic_weight >= 0.0)) throw std::invalid_argument("model config: hsic_weight must be >= 0");
  if (!(bprime_weight >= 0.0)) throw std::invalid_argument("model config: bprime_weight must be >= 0");
  if (!(holdout_fraction >= 0.0 && holdout_fraction < 1.0)) {
    throw std::invalid_argument("model config: holdout_fraction must lie in [0, 1)");
  }
}

namespace {

Matrix glorot_matrix(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(rows + cols));
  std::uniform_real_distribution<double> dist(-limit, limit);
  Matrix m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = dist(rng);
  }
  return m;
}

// Rng substreams of a training run.
enum Stream : std::uint64_t { kInit = 1, kHoldout = 2, kNoise = 3 };

struct WeightVars {
  Var row_w1, row_w2_mu, row_w2_sigma, col_w1, col_w2_mu, col_w2_sigma;
};

WeightVars as_vars(Tape& t, const EncoderWeights& w, bool trainable) {
  auto mk = [&](const Matrix& m) { return trainable ? t.variable(m) : t.constant(m); };
  return {mk(w.row_w1), mk(w.row_w2_mu), mk(w.row_w2_sigma), mk(w.col_w1), mk(w.col_w2_mu), mk(w.col_w2_sigma)};
}

struct Posterior {
  Var mu1, log_sigma1, mu2, log_sigma2;
};

// mu1 = B~ ReLU(B~^T X1 W1) W2 ; mu2 = B~^T ReLU(B~ X2 W1') W2'.
Posterior encode_on_tape(Var norm, Var norm_t, Var x1, Var x2, const WeightVars& w) {
  Var h1 = num::relu(num::matmul(norm_t, num::matmul(x1, w.row_w1)));
  Var mu1 = num::matmul(norm, num::matmul(h1, w.row_w2_mu));
  Var ls1 = num::matmul(norm, num::matmul(h1, w.row_w2_sigma));
  Var h2 = num::relu(num::matmul(norm, num::matmul(x2, w.col_w1)));
  Var mu2 = num::matmul(norm_t, num::matmul(h2, w.col_w2_mu));
  Var ls2 = num::matmul(norm_t, num::matmul(h2, w.col_w2_sigma));
  return {mu1, ls1, mu2, ls2};
}

void check_weights(const BipartiteGraph& graph, const EncoderWeights& w) {
  auto fail = [](const std::string& what) { throw num::ShapeError("encoder weights: " + what); };
  if (w.row_w1.rows() != graph.d1()) fail("row first layer expects d1 = " + std::to_string(w.row_w1.rows()) +
                                          ", graph has " + std::to_string(graph.d1()));
  if (w.col_w1.rows() != graph.d2()) fail("column first layer expects d2 = " + std::to_string(w.col_w1.rows()) +
                                          ", graph has " + std::to_string(graph.d2()));
  const auto h = w.row_w1.cols();
  const auto d = w.row_w2_mu.cols();
  if (w.row_w2_mu.rows() != h || w.row_w2_sigma.rows() != h || w.row_w2_sigma.cols() != d) fail("row layers disagree");
  if (w.col_w2_mu.rows() != w.col_w1.cols() || w.col_w2_sigma.rows() != w.col_w1.cols() ||
      w.col_w2_mu.cols() != d || w.col_w2_sigma.cols() != d)
    fail("column layers disagree");
}

void check_finite(const Matrix& m, const char* what) {
  if (!m.allFinite()) throw std::runtime_error(std::string("encode: non-finite values in ") + what);
}

LatentState encode_impl(const BipartiteGraph& graph, const EncoderWeights& weights, Rng* rng) {
  check_weights(graph, weights);
  const Matrix norm = normalize_incidence(graph.incidence);
  LatentState s;
  const Matrix h1 = (norm.transpose() * (graph.x1 * weights.row_w1)).cwiseMax(0.0);
  s.mu1 = norm * (h1 * weights.row_w2_mu);
  s.log_sigma1 = norm * (h1 * weights.row_w2_sigma);
  const Matrix h2 = (norm * (graph.x2 * weights.col_w1)).cwiseMax(0.0);
  s.mu2 = norm.transpose() * (h2 * weights.col_w2_mu);
  s.log_sigma2 = norm.transpose() * (h2 * weights.col_w2_sigma);
  check_finite(s.mu1, "mu1");
  check_finite(s.log_sigma1, "log_sigma1");
  check_finite(s.mu2, "mu2");
  check_finite(s.log_sigma2, "log_sigma2");
  if (rng != nullptr) {
    const Matrix e1 = standard_normal(s.mu1.rows(), s.mu1.cols(), *rng);
    const Matrix e2 = standard_normal(s.mu2.rows(), s.mu2.cols(), *rng);
    s.z1 = s.mu1 + s.log_sigma1.array().exp().matrix().cwiseProduct(e1);
    s.z2 = s.mu2 + s.log_sigma2.array().exp().matrix().cwiseProduct(e2);
  } else {
    s.z1 = s.mu1;
    s.z2 = s.mu2;
  }
  return s;
}

struct Objective {
  Var total;
  Var reconstruction, kl_rows, kl_cols, bprime, hsic;
  bool has_bprime = false, has_hsic = false;
};

struct TrainingData {
  Matrix norm, norm_t;
  double pos_weight = 1.0;
  Matrix bprime;
  double bprime_pos_weight = 1.0;
  Matrix protected_block;
  bool use_hsic = false;
};

TrainingData prepare(const BipartiteGraph& graph, const PlantAssignment* plants, const ModelConfig& config,
                     const Matrix* protected_block) {
  TrainingData d;
  d.norm = normalize_incidence(graph.incidence);
  d.norm_t = d.norm.transpose();
  d.pos_weight = positive_weight(graph.incidence);
  if (config.recover_bprime) {
    if (plants == nullptr) throw std::invalid_argument("train: recover_bprime requires a plant assignment");
    d.bprime = project_plant_network(graph.incidence, *plants);
    d.bprime_pos_weight = positive_weight(d.bprime);
  }
  if (config.hsic_weight > 0.0) {
    if (protected_block != nullptr) {
      if (protected_block->rows() != graph.n1()) throw num::ShapeError("train: protected block row count differs from n1");
      d.protected_block = *protected_block;
    } else if (!config.hsic_columns.empty()) {
      d.protected_block.resize(graph.n1(), static_cast<Eigen::Index>(config.hsic_columns.size()));
      for (std::size_t c = 0; c < config.hsic_columns.size(); ++c) {
        const int col = config.hsic_columns[c];
        if (col < 0 || col >= graph.d1()) {
          throw std::invalid_argument("train: hsic column " + std::to_string(col) + " outside X1");
        }
        d.protected_block.col(static_cast<Eigen::Index>(c)) = graph.x1.col(col);
      }
    }
    d.use_hsic = d.protected_block.size() > 0;
  }
  return d;
}

Objective build_objective(Tape& t, const BipartiteGraph& graph, const PlantAssignment* plants,
                          const ModelConfig& config, const TrainingData& data, const WeightVars& w,
                          const Matrix& eps_rows, const Matrix& eps_cols, const Vector& signature) {
  Var norm = t.constant(data.norm);
  Var norm_t = t.constant(data.norm_t);
  Var x1 = t.constant(graph.x1);
  Var x2 = t.constant(graph.x2);
  Posterior q = encode_on_tape(norm, norm_t, x1, x2, w);
  Var z1 = num::add(q.mu1, num::hadamard(num::exp(q.log_sigma1), t.constant(eps_rows)));
  Var z2 = num::add(q.mu2, num::hadamard(num::exp(q.log_sigma2), t.constant(eps_cols)));
  Var b_hat = num::sigmoid(num::matmul(num::scale_columns(z1, signature), num::transpose(z2)));

  Objective o;
  o.reconstruction = num::binary_cross_entropy(b_hat, graph.incidence, data.pos_weight);
  const double n1 = static_cast<double>(graph.n1());
  const double n2 = static_cast<double>(graph.n2());
  o.kl_rows = num::scale(num::kl_standard_normal(q.mu1, q.log_sigma1), 1.0 / (n1 * n1));
  o.kl_cols = num::scale(num::kl_standard_normal(q.mu2, q.log_sigma2), 1.0 / (n2 * n2));
  o.total = num::add(o.reconstruction, num::add(o.kl_rows, o.kl_cols));
  if (config.recover_bprime) {
    Var b_hat_prime = num::group_average_rows(b_hat, plants->labels(), plants->n_plants());
    o.bprime = num::binary_cross_entropy(b_hat_prime, data.bprime, data.bprime_pos_weight);
    o.has_bprime = true;
    o.total = num::add(o.total, num::scale(o.bprime, config.bprime_weight));
  }
  if (data.use_hsic) {
    o.hsic = hsic(q.mu1, data.protected_block);
    o.has_hsic = true;
    o.total = num::add(o.total, num::scale(o.hsic, config.hsic_weight));
  }
  return o;
}

struct AdamState {
  Matrix m, v;
};

void adam_step(Matrix& param, const Matrix& grad, AdamState& s, double lr, int step) {
  constexpr double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  if (s.m.size() == 0) {
    s.m = Matrix::Zero(param.rows(), param.cols());
    s.v = Matrix::Zero(param.rows(), param.cols());
  }
  s.m = beta1 * s.m + (1.0 - beta1) * grad;
  s.v = beta2 * s.v + (1.0 - beta2) * grad.cwiseProduct(grad);
  const double c1 = 1.0 - std::pow(beta1, step);
  const double c2 = 1.0 - std::pow(beta2, step);
  param.array() -= lr * (s.m.array() / c1) / ((s.v.array() / c2).sqrt() + eps);
}

double holdout_auc(const Matrix& b_hat, const Matrix& target, const std::vector<Eigen::Index>& entries) {
  std::vector<double> scores;
  std::vector<int> labels;
  scores.reserve(entries.size());
  labels.reserve(entries.size());
  const Eigen::Index rows = target.rows();
  for (Eigen::Index e : entries) {
    scores.push_back(b_hat(e % rows, e / rows));
    labels.push_back(target(e % rows, e / rows) > 0.5 ? 1 : 0);
  }
  const auto auc = rank_auc(scores, labels);
  return auc ? *auc : std::nan("");
}

}  // namespace

EncoderWeights EncoderWeights::glorot(Eigen::Index d1, Eigen::Index d2, int hidden, int latent_dim, Rng& rng) {
  EncoderWeights w;
  w.row_w1 = glorot_matrix(d1, hidden, rng);
  w.row_w2_mu = glorot_matrix(hidden, latent_dim, rng);
  w.row_w2_sigma = glorot_matrix(hidden, latent_dim, rng);
  w.col_w1 = glorot_matrix(d2, hidden, rng);
  w.col_w2_mu = glorot_matrix(hidden, latent_dim, rng);
  w.col_w2_sigma = glorot_matrix(hidden, latent_dim, rng);
  return w;
}

EncoderWeights EncoderWeights::zeros(Eigen::Index d1, Eigen::Index d2, int hidden, int latent_dim) {
  EncoderWeights w;
  w.row_w1 = Matrix::Zero(d1, hidden);
  w.row_w2_mu = Matrix::Zero(hidden, latent_dim);
  w.row_w2_sigma = Matrix::Zero(hidden, latent_dim);
  w.col_w1 = Matrix::Zero(d2, hidden);
  w.col_w2_mu = Matrix::Zero(hidden, latent_dim);
  w.col_w2_sigma = Matrix::Zero(hidden, latent_dim);
  return w;
}

bool EncoderWeights::operator==(const EncoderWeights& o) const {
  auto eq = [](const Matrix& a, const Matrix& b) {
    return a.rows() == b.rows() && a.cols() == b.cols() && (a.array() == b.array()).all();
  };
  return eq(row_w1, o.row_w1) && eq(row_w2_mu, o.row_w2_mu) && eq(row_w2_sigma, o.row_w2_sigma) &&
         eq(col_w1, o.col_w1) && eq(col_w2_mu, o.col_w2_mu) && eq(col_w2_sigma, o.col_w2_sigma);
}

Vector make_signature(int d_plus, int d_minus) {
  Vector s(d_plus + d_minus);
  s.head(d_plus).setOnes();
  s.tail(d_minus).setConstant(-1.0);
  return s;
}

LatentState encode(const BipartiteGraph& graph, const EncoderWeights& weights, Rng& rng) {
  return encode_impl(graph, weights, &rng);
}

LatentState encode_mean(const BipartiteGraph& graph, const EncoderWeights& weights) {
  return encode_impl(graph, weights, nullptr);
}

Matrix decode(const Matrix& z1, const Matrix& z2, const Vector& signature) {
  if (z1.cols() != signature.size() || z2.cols() != signature.size()) {
    throw num::ShapeError("decode: latent widths " + std::to_string(z1.cols()) + ", " + std::to_string(z2.cols()) +
                          " vs signature length " + std::to_string(signature.size()));
  }
  const Matrix logits = z1 * signature.asDiagonal() * z2.transpose();
  return logits.unaryExpr([](double x) { return num::sigmoid(x); });
}

double positive_weight(const Matrix& target) {
  const double ones = target.sum();
  const double zeros = static_cast<double>(target.size()) - ones;
  if (ones <= 0.0 || zeros <= 0.0) return 1.0;
  return zeros / ones;
}

LossTerms elbo_terms(const BipartiteGraph& graph, const LatentState& latent, const Matrix& b_hat,
                     std::optional<double> pos_weight) {
  Tape t;
  const double pw = pos_weight.value_or(positive_weight(graph.incidence));
  const double n1 = static_cast<double>(graph.n1());
  const double n2 = static_cast<double>(graph.n2());
  LossTerms terms;
  terms.reconstruction = num::binary_cross_entropy(t.constant(b_hat), graph.incidence, pw).value()(0, 0);
  terms.kl_rows =
      num::kl_standard_normal(t.constant(latent.mu1), t.constant(latent.log_sigma1)).value()(0, 0) / (n1 * n1);
  terms.kl_cols =
      num::kl_standard_normal(t.constant(latent.mu2), t.constant(latent.log_sigma2)).value()(0, 0) / (n2 * n2);
  return terms;
}

double elbo_loss(const BipartiteGraph& graph, const LatentState& latent, const Matrix& b_hat,
                 std::optional<double> pos_weight) {
  return elbo_terms(graph, latent, b_hat, pos_weight).total();
}

LossTerms spipoll_terms(const BipartiteGraph& graph, const PlantAssignment& plants, const LatentState& latent,
                        const Matrix& b_hat, std::optional<double> pos_weight, double bprime_weight) {
  LossTerms terms = elbo_terms(graph, latent, b_hat, pos_weight);
  const Matrix bprime = project_plant_network(graph.incidence, plants);
  Tape t;
  Var avg = num::group_average_rows(t.constant(b_hat), plants.labels(), plants.n_plants());
  terms.bprime = bprime_weight * num::binary_cross_entropy(avg, bprime, positive_weight(bprime)).value()(0, 0);
  return terms;
}

double spipoll_loss(const BipartiteGraph& graph, const PlantAssignment& plants, const LatentState& latent,
                    const Matrix& b_hat, std::optional<double> pos_weight, double bprime_weight) {
  return spipoll_terms(graph, plants, latent, b_hat, pos_weight, bprime_weight).total();
}

TrainingDiverged::TrainingDiverged(int epoch, const std::string& what)
    : std::runtime_error(what), epoch_(epoch) {}

EncoderWeights initial_weights(const BipartiteGraph& graph, const ModelConfig& config) {
  Rng rng = make_rng(config.seed, kInit);
  return EncoderWeights::glorot(graph.d1(), graph.d2(), config.hidden_dim, config.latent_dim(), rng);
}

ObjectiveEvaluation evaluate_objective(const BipartiteGraph& graph, const PlantAssignment* plants,
                                       const ModelConfig& config, const EncoderWeights& weights,
                                       const Matrix& eps_rows, const Matrix& eps_cols,
                                       const Matrix* protected_block) {
  config.validate();
  check_weights(graph, weights);
  const TrainingData data = prepare(graph, plants, config, protected_block);
  const Vector signature = make_signature(config.d_plus, config.d_minus);
  Tape t;
  const WeightVars w = as_vars(t, weights, true);
  const Objective o = build_objective(t, graph, plants, config, data, w, eps_rows, eps_cols, signature);
  t.backward(o.total);
  ObjectiveEvaluation ev;
  ev.total = o.total.value()(0, 0);
  ev.terms.reconstruction = o.reconstruction.value()(0, 0);
  ev.terms.kl_rows = o.kl_rows.value()(0, 0);
  ev.terms.kl_cols = o.kl_cols.value()(0, 0);
  ev.terms.bprime = o.has_bprime ? o.bprime.value()(0, 0) : 0.0;
  ev.hsic = o.has_hsic ? o.hsic.value()(0, 0) : 0.0;
  ev.gradient = {t.grad(w.row_w1), t.grad(w.row_w2_mu), t.grad(w.row_w2_sigma),
                 t.grad(w.col_w1), t.grad(w.col_w2_mu), t.grad(w.col_w2_sigma)};
  return ev;
}

TrainedModel train(const BipartiteGraph& graph, const PlantAssignment* plants, const ModelConfig& config,
                   const Matrix* protected_block) {
  config.validate();
  graph.validate();
  if (plants != nullptr && plants->n_rows() != graph.n1()) {
    throw num::ShapeError("train: plant assignment has " + std::to_string(plants->n_rows()) + " rows, graph has " +
                          std::to_string(graph.n1()));
  }
  const TrainingData data = prepare(graph, plants, config, protected_block);

  TrainedModel model;
  model.config = config;
  model.signature = make_signature(config.d_plus, config.d_minus);
  model.weights = initial_weights(graph, config);

  // Monitoring split: a random subset of entries, scored after training.
  std::vector<Eigen::Index> holdout;
  {
    Rng rng = make_rng(config.seed, kHoldout);
    std::vector<Eigen::Index> all(static_cast<std::size_t>(graph.incidence.size()));
    std::iota(all.begin(), all.end(), Eigen::Index{0});
    std::shuffle(all.begin(), all.end(), rng);
    const auto count = static_cast<std::size_t>(config.holdout_fraction * static_cast<double>(all.size()));
    holdout.assign(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(count));
  }

  Rng noise = make_rng(config.seed, kNoise);
  const int latent = config.latent_dim();
  std::array<AdamState, 6> adam;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    const Matrix eps_rows = standard_normal(graph.n1(), latent, noise);
    const Matrix eps_cols = standard_normal(graph.n2(), latent, noise);
    Tape t;
    const WeightVars w = as_vars(t, model.weights, true);
    const Objective o = build_objective(t, graph, plants, config, data, w, eps_rows, eps_cols, model.signature);
    EpochRecord rec;
    rec.epoch = epoch;
    rec.total = o.total.value()(0, 0);
    rec.reconstruction = o.reconstruction.value()(0, 0);
    rec.kl = o.kl_rows.value()(0, 0) + o.kl_cols.value()(0, 0);
    rec.bprime = o.has_bprime ? o.bprime.value()(0, 0) : 0.0;
    rec.hsic = o.has_hsic ? o.hsic.value()(0, 0) : 0.0;
    if (!std::isfinite(rec.total)) {
      throw TrainingDiverged(epoch, "training diverged: non-finite loss at epoch " + std::to_string(epoch));
    }
    t.backward(o.total);
    const Matrix grads[6] = {t.grad(w.row_w1), t.grad(w.row_w2_mu), t.grad(w.row_w2_sigma),
                             t.grad(w.col_w1), t.grad(w.col_w2_mu), t.grad(w.col_w2_sigma)};
    Matrix* params[6] = {&model.weights.row_w1, &model.weights.row_w2_mu, &model.weights.row_w2_sigma,
                         &model.weights.col_w1, &model.weights.col_w2_mu, &model.weights.col_w2_sigma};
    for (int k = 0; k < 6; ++k) {
      if (!grads[k].allFinite()) {
        throw TrainingDiverged(epoch, "training diverged: non-finite gradient at epoch " + std::to_string(epoch));
      }
      adam_step(*params[k], grads[k], adam[static_cast<std::size_t>(k)], config.learning_rate, epoch + 1);
    }
    model.trace.push_back(rec);
  }

  if (!holdout.empty()) {
    const LatentState s = encode_mean(graph, model.weights);
    model.holdout_auc = holdout_auc(decode(s.mu1, s.mu2, model.signature), graph.incidence, holdout);
  } else {
    model.holdout_auc = std::nan("");
  }
  return model;
}

ConnectivityFunctional::ConnectivityFunctional(const TrainedModel& model, const BipartiteGraph& graph,
                                               const PlantAssignment* plants) {
  check_weights(graph, model.weights);
  norm_ = normalize_incidence(graph.incidence);
  norm_t_ = norm_.transpose();
  row_w1_ = model.weights.row_w1;
  row_w2_mu_ = model.weights.row_w2_mu;
  const Matrix h2 = (norm_ * (graph.x2 * model.weights.col_w1)).cwiseMax(0.0);
  col_mu_signed_ = (norm_t_ * (h2 * model.weights.col_w2_mu)) * model.signature.asDiagonal();
  const double n1 = static_cast<double>(graph.n1());
  const double n2 = static_cast<double>(graph.n2());
  if (plants == nullptr) {
    row_weight_ = Vector::Constant(graph.n1(), 1.0 / (n1 * n2));
  } else {
    if (plants->n_rows() != graph.n1()) throw num::ShapeError("connectivity: plant assignment row count differs");
    // mean(P~^T B_hat) = (1 / (u n2)) sum_i P~(i, plant(i)) sum_j B_hat(i, j).
    const auto sizes = plants->group_sizes();
    row_weight_.resize(graph.n1());
    const double u = static_cast<double>(plants->n_plants());
    for (Eigen::Index i = 0; i < graph.n1(); ++i) {
      row_weight_(i) = 1.0 / (sizes[static_cast<std::size_t>(plants->labels()[static_cast<std::size_t>(i)])] * u * n2);
    }
  }
}

void ConnectivityFunctional::check(const Matrix& x1) const {
  if (x1.rows() != norm_.rows() || x1.cols() != row_w1_.rows()) {
    throw num::ShapeError("connectivity: X1 is " + std::to_string(x1.rows()) + "x" + std::to_string(x1.cols()) +
                          ", model expects " + std::to_string(norm_.rows()) + "x" + std::to_string(row_w1_.rows()));
  }
}

double ConnectivityFunctional::finish(const Matrix& h1_pre) const {
  const Matrix mu1 = norm_ * (h1_pre.cwiseMax(0.0) * row_w2_mu_);
  const Matrix logits = mu1 * col_mu_signed_.transpose();
  return row_weight_.dot(logits.array().logistic().matrix().rowwise().sum());
}

double ConnectivityFunctional::value(const Matrix& x1) const {
  check(x1);
  return finish(norm_t_ * (x1 * row_w1_));
}

Functional::RowEvaluator ConnectivityFunctional::restrict_rows(const Matrix& base,
                                                               const std::vector<Eigen::Index>& rows) const {
  check(base);
  const auto r = static_cast<Eigen::Index>(rows.size());
  Matrix base_rows(r, base.cols());
  Matrix norm_cols(norm_t_.rows(), r);
  for (Eigen::Index k = 0; k < r; ++k) {
    const Eigen::Index i = rows[static_cast<std::size_t>(k)];
    if (i < 0 || i >= base.rows()) throw num::ShapeError("connectivity: row index out of range");
    base_rows.row(k) = base.row(i);
    norm_cols.col(k) = norm_t_.col(i);
  }
  auto self = std::make_shared<const ConnectivityFunctional>(*this);
  auto h1_base = std::make_shared<const Matrix>(norm_t_ * (base * row_w1_));
  return [self, h1_base, base_rows = std::move(base_rows), norm_cols = std::move(norm_cols)](const Matrix& values) {
    if (values.rows() != base_rows.rows() || values.cols() != base_rows.cols()) {
      throw num::ShapeError("connectivity: row values shape mismatch");
    }
    return self->finish(*h1_base + norm_cols * ((values - base_rows) * self->row_w1_));
  };
}

Matrix ConnectivityFunctional::gradient(const Matrix& x1) const {
  check(x1);
  Tape t;
  Var x = t.variable(x1);
  Var h1 = num::relu(num::matmul(t.constant(norm_t_), num::matmul(x, t.constant(row_w1_))));
  Var mu1 = num::matmul(t.constant(norm_), num::matmul(h1, t.constant(row_w2_mu_)));
  Var probs = num::sigmoid(num::matmul(mu1, t.constant(col_mu_signed_.transpose())));
  Var f = num::sum(num::matmul(t.constant(row_weight_.transpose()), probs));
  return num::gradient(f, x);
}

Functional ConnectivityFunctional::as_functional() const {
  auto self = std::make_shared<const ConnectivityFunctional>(*this);
  return Functional{[self](const Matrix& x) { return self->value(x); },
                    [self](const Matrix& x) { return self->gradient(x); },
                    [self](const Matrix& base, const std::vector<Eigen::Index>& rows) {
                      return self->restrict_rows(base, rows);
                    }};
}

double predict_connectivity(const TrainedModel& model, const BipartiteGraph& graph, const PlantAssignment* plants) {
  return ConnectivityFunctional(model, graph, plants).value(graph.x1);
}

double offset_response(const ConnectivityFunctional& f, const Matrix& x1, Eigen::Index feature, double delta) {
  Matrix shifted = x1;
  shifted.col(feature).array() += delta;
  return f.value(shifted);
}

}  // namespace bvgae
