#include "bvgae/serialize.hpp"

#include <bit>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "bvgae/io.hpp"

namespace bvgae {

namespace {

void reject_unknown(const Json& j, const std::set<std::string>& known, const char* what) {
  if (!j.is_object()) throw std::invalid_argument(std::string(what) + ": expected a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (!known.count(key)) throw std::invalid_argument(std::string(what) + ": unknown key '" + key + "'");
  }
}

template <typename T>
void maybe(const Json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

Json to_json(const ModelConfig& c) {
  return Json{{"d_plus", c.d_plus},
              {"d_minus", c.d_minus},
              {"hidden_dim", c.hidden_dim},
              {"epochs", c.epochs},
              {"learning_rate", c.learning_rate},
              {"hsic_weight", c.hsic_weight},
              {"hsic_columns", c.hsic_columns},
              {"recover_bprime", c.recover_bprime},
              {"bprime_weight", c.bprime_weight},
              {"holdout_fraction", c.holdout_fraction},
              {"seed", c.seed}};
}

ModelConfig model_config_from_json(const Json& j, ModelConfig c) {
  reject_unknown(j,
                 {"d_plus", "d_minus", "hidden_dim", "epochs", "learning_rate", "hsic_weight", "hsic_columns",
                  "recover_bprime", "bprime_weight", "holdout_fraction", "seed"},
                 "model config");
  maybe(j, "d_plus", c.d_plus);
  maybe(j, "d_minus", c.d_minus);
  maybe(j, "hidden_dim", c.hidden_dim);
  maybe(j, "epochs", c.epochs);
  maybe(j, "learning_rate", c.learning_rate);
  maybe(j, "hsic_weight", c.hsic_weight);
  maybe(j, "hsic_columns", c.hsic_columns);
  maybe(j, "recover_bprime", c.recover_bprime);
  maybe(j, "bprime_weight", c.bprime_weight);
  maybe(j, "holdout_fraction", c.holdout_fraction);
  maybe(j, "seed", c.seed);
  c.validate();
  return c;
}

Json to_json(const SimSetting& s) {
  return Json{{"name", s.name},         {"study", s.study},         {"d_plus", s.d_plus},
              {"d_noise", s.d_noise},   {"k_groups", s.k_groups},   {"gamma_set", s.gamma_set},
              {"hsic_cols", s.hsic_cols}, {"include_p_in_h", s.include_p_in_h}, {"seed", s.seed},
              {"n1", s.n1},             {"n2", s.n2},               {"n_plants", s.n_plants},
              {"beta0", s.beta0}};
}

SimSetting sim_setting_from_json(const Json& j, SimSetting s) {
  reject_unknown(j,
                 {"name", "study", "d_plus", "d_noise", "k_groups", "gamma_set", "hsic_cols", "include_p_in_h",
                  "seed", "n1", "n2", "n_plants", "beta0"},
                 "setting");
  maybe(j, "name", s.name);
  maybe(j, "study", s.study);
  maybe(j, "d_plus", s.d_plus);
  maybe(j, "d_noise", s.d_noise);
  maybe(j, "k_groups", s.k_groups);
  maybe(j, "gamma_set", s.gamma_set);
  maybe(j, "hsic_cols", s.hsic_cols);
  maybe(j, "include_p_in_h", s.include_p_in_h);
  maybe(j, "seed", s.seed);
  maybe(j, "n1", s.n1);
  maybe(j, "n2", s.n2);
  maybe(j, "n_plants", s.n_plants);
  maybe(j, "beta0", s.beta0);
  s.validate();
  return s;
}

Json matrix_to_json(const Matrix& m) {
  Json bits = Json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) bits.push_back(hex64(std::bit_cast<std::uint64_t>(m(r, c))));
  }
  return Json{{"rows", m.rows()}, {"cols", m.cols()}, {"order", "row-major"}, {"ieee754_bits", std::move(bits)}};
}

Matrix matrix_from_json(const Json& j) {
  const auto rows = j.at("rows").get<Eigen::Index>();
  const auto cols = j.at("cols").get<Eigen::Index>();
  const Json& bits = j.at("ieee754_bits");
  if (rows < 0 || cols < 0 || bits.size() != static_cast<std::size_t>(rows * cols)) {
    throw std::invalid_argument("matrix: entry count does not match " + std::to_string(rows) + "x" + std::to_string(cols));
  }
  Matrix m(rows, cols);
  std::size_t k = 0;
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) {
      const std::string s = bits[k++].get<std::string>();
      std::size_t used = 0;
      const std::uint64_t v = std::stoull(s, &used, 16);
      if (used != s.size()) throw std::invalid_argument("matrix: bad bit pattern '" + s + "'");
      m(r, c) = std::bit_cast<double>(v);
    }
  }
  return m;
}

Json checkpoint_json(const TrainedModel& model) {
  const EncoderWeights& w = model.weights;
  Json weights{{"row_w1", matrix_to_json(w.row_w1)},       {"row_w2_mu", matrix_to_json(w.row_w2_mu)},
               {"row_w2_sigma", matrix_to_json(w.row_w2_sigma)}, {"col_w1", matrix_to_json(w.col_w1)},
               {"col_w2_mu", matrix_to_json(w.col_w2_mu)},   {"col_w2_sigma", matrix_to_json(w.col_w2_sigma)}};
  return Json{{"format", "bvgae-checkpoint"},
              {"version", 1},
              {"config", to_json(model.config)},
              {"signature", std::vector<double>(model.signature.data(), model.signature.data() + model.signature.size())},
              {"holdout_auc", matrix_to_json(Matrix::Constant(1, 1, model.holdout_auc))},
              {"weights", std::move(weights)}};
}

TrainedModel checkpoint_from_json(const Json& j) {
  if (j.value("format", "") != "bvgae-checkpoint") throw std::invalid_argument("checkpoint: not a bvgae checkpoint");
  if (j.at("version").get<int>() != 1) throw std::invalid_argument("checkpoint: unsupported version");
  TrainedModel m;
  m.config = model_config_from_json(j.at("config"));
  const auto sig = j.at("signature").get<std::vector<double>>();
  m.signature = Eigen::Map<const Vector>(sig.data(), static_cast<Eigen::Index>(sig.size()));
  if (m.signature.size() != m.config.latent_dim() || m.signature != make_signature(m.config.d_plus, m.config.d_minus)) {
    throw std::invalid_argument("checkpoint: signature does not match d_plus/d_minus");
  }
  m.holdout_auc = matrix_from_json(j.at("holdout_auc"))(0, 0);
  const Json& w = j.at("weights");
  m.weights.row_w1 = matrix_from_json(w.at("row_w1"));
  m.weights.row_w2_mu = matrix_from_json(w.at("row_w2_mu"));
  m.weights.row_w2_sigma = matrix_from_json(w.at("row_w2_sigma"));
  m.weights.col_w1 = matrix_from_json(w.at("col_w1"));
  m.weights.col_w2_mu = matrix_from_json(w.at("col_w2_mu"));
  m.weights.col_w2_sigma = matrix_from_json(w.at("col_w2_sigma"));
  const Eigen::Index h = m.config.hidden_dim, d = m.config.latent_dim();
  const EncoderWeights& e = m.weights;
  if (e.row_w1.cols() != h || e.col_w1.cols() != h || e.row_w2_mu.rows() != h || e.row_w2_mu.cols() != d ||
      e.row_w2_sigma.rows() != h || e.row_w2_sigma.cols() != d || e.col_w2_mu.rows() != h ||
      e.col_w2_mu.cols() != d || e.col_w2_sigma.rows() != h || e.col_w2_sigma.cols() != d) {
    throw std::invalid_argument("checkpoint: weight shapes do not match the config");
  }
  return m;
}

void save_checkpoint(const std::filesystem::path& path, const TrainedModel& model) {
  write_text(path, checkpoint_json(model).dump(1) + "\n");
}

TrainedModel load_checkpoint(const std::filesystem::path& path) {
  try {
    return checkpoint_from_json(read_json(path));
  } catch (const IoError&) {
    throw;
  } catch (const std::exception& e) {
    throw IoError(path.string() + ": " + e.what());
  }
}

Json read_json(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  try {
    return Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw IoError(path.string() + ": " + e.what());
  }
}

std::uint64_t config_hash(const Json& j) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : j.dump()) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

}  // namespace bvgae
