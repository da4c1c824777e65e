#include <doctest.h>

#include "bvgae/attribution.hpp"
#include "bvgae/benchmark.hpp"
#include "bvgae/model.hpp"
#include "support.hpp"

using namespace bvgae;

namespace {

Functional mean_functional() {
  return Functional{[](const Matrix& x) { return x.mean(); },
                    [](const Matrix& x) { return Matrix(Matrix::Constant(x.rows(), x.cols(), 1.0 / x.size())); },
                    {}};
}

Functional mean_sigmoid() {
  auto sig = [](const Matrix& x) { return Matrix((1.0 + (-x.array()).exp()).inverse().matrix()); };
  return Functional{[sig](const Matrix& x) { return sig(x).mean(); },
                    [sig](const Matrix& x) {
                      const Matrix s = sig(x);
                      return Matrix((s.array() * (1.0 - s.array())).matrix() / static_cast<double>(x.size()));
                    },
                    {}};
}

// f = sum_j c_j mean_i x_ij plus a smooth nonlinear part.
Functional cubic_functional(const Vector& c) {
  return Functional{[c](const Matrix& x) {
                      return (x.colwise().mean() * c)(0, 0) + 0.1 * x.array().cube().sum() / x.size();
                    },
                    [c](const Matrix& x) {
                      Matrix g = (Matrix::Ones(x.rows(), 1) * c.transpose()) / static_cast<double>(x.rows());
                      return Matrix(g.array() + 0.3 * x.array().square() / x.size());
                    },
                    {}};
}

double factorial(int n) { return std::tgamma(n + 1.0); }

Vector exact_shapley(const std::function<double(const std::vector<char>&)>& v, int m) {
  Vector phi = Vector::Zero(m);
  for (int j = 0; j < m; ++j) {
    for (int code = 0; code < (1 << m); ++code) {
      if ((code >> j) & 1) continue;
      std::vector<char> s(static_cast<std::size_t>(m), 0);
      int size = 0;
      for (int k = 0; k < m; ++k) {
        if ((code >> k) & 1) {
          s[static_cast<std::size_t>(k)] = 1;
          ++size;
        }
      }
      std::vector<char> with = s;
      with[static_cast<std::size_t>(j)] = 1;
      phi(j) += factorial(size) * factorial(m - size - 1) / factorial(m) * (v(with) - v(s));
    }
  }
  return phi;
}

}  // namespace

TEST_CASE("method names round-trip") {
  for (Method m : {Method::Grad, Method::GradInput, Method::IntegratedGradients, Method::GraphSvx}) {
    CHECK(parse_method(method_name(m)) == m);
  }
  CHECK(parse_method("svx") == Method::GraphSvx);
  CHECK(parse_method("grad_input") == Method::GradInput);
  CHECK_FALSE(parse_method("lrp").has_value());
}

TEST_CASE("group partition invariants") {
  CHECK_NOTHROW(GroupPartition({0, 1, 1}, 2));
  CHECK_THROWS(GroupPartition({0, 0, 0}, 2));
  CHECK_THROWS(GroupPartition({0, 2}, 2));
  CHECK_THROWS(GroupPartition({0, 1}, 0));
  const GroupPartition p({0, 1, 1}, 2, {"a", "b"});
  CHECK(p.name(1) == "b");
  CHECK(p.sizes() == std::vector<int>{1, 2});
  CHECK(GroupPartition({0, 1}, 2).name(0) == "1");
  CHECK(GroupPartition::single(4).labels == std::vector<int>(4, 0));
}

TEST_CASE("noise scales") {
  Matrix x(3, 2);
  x << 0, 5, 1, 5, 4, 5;
  const Vector s = noise_scales(x);
  CHECK(s(0) == doctest::Approx(0.4));
  CHECK(s(1) == 0.0);
}

TEST_CASE("smoothgrad examples") {
  Rng rng(1);
  const Matrix x = testing::uniform_matrix(5, 3, rng);
  const AttributionResult r = smoothgrad(mean_functional(), x, 7, 3);
  CHECK((r.phi.array() - 1.0 / 15).abs().maxCoeff() <= 1e-17);
  CHECK(r.phi_global.size() == 3);
  CHECK_THROWS(smoothgrad(mean_functional(), x, 0, 3));

  // Constant columns carry no noise: plain gradient.
  const Vector c = Vector::LinSpaced(3, -1.0, 1.0);
  const Matrix flat = Matrix::Constant(4, 3, 0.7);
  const AttributionResult plain = smoothgrad(cubic_functional(c), flat, 5, 9);
  CHECK((plain.phi - cubic_functional(c).gradient(flat)).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("smoothgrad of mean sigmoid at zero is near 0.25 / (n d)") {
  // Noise amplitude comes from the column range, so plant a range of 2 in
  // every column around mostly-zero entries.
  Matrix x = Matrix::Zero(4, 2);
  x.row(0).setConstant(1.0);
  x.row(1).setConstant(-1.0);
  const int k = 500;
  const AttributionResult r = smoothgrad(mean_sigmoid(), x, k, 5);
  // sigma' at N(0, 0.2^2) inputs: expectation and spread by direct Monte Carlo
  // with independent draws.
  Rng rng(99);
  std::normal_distribution<double> n(0.0, 0.2);
  std::vector<double> draws;
  for (int t = 0; t < 200000; ++t) {
    const double s = 1.0 / (1.0 + std::exp(-n(rng)));
    draws.push_back(s * (1 - s));
  }
  double mean = 0, var = 0;
  for (double d : draws) mean += d;
  mean /= draws.size();
  for (double d : draws) var += (d - mean) * (d - mean);
  var /= draws.size() - 1;
  const double tol = 3.0 * std::sqrt(var / k) / 8.0 + 1e-6;
  for (int i = 2; i < 4; ++i) {
    for (int j = 0; j < 2; ++j) CHECK(std::abs(r.phi(i, j) - mean / 8.0) <= tol);
  }
  CHECK(std::abs(mean - 0.25) < 0.01);
}

TEST_CASE("smoothgrad is deterministic in its seed") {
  Rng rng(2);
  const Matrix x = testing::uniform_matrix(6, 3, rng);
  const Vector c = Vector::Ones(3);
  CHECK(smoothgrad(cubic_functional(c), x, 10, 4).phi == smoothgrad(cubic_functional(c), x, 10, 4).phi);
  CHECK(smoothgrad(cubic_functional(c), x, 10, 4).phi != smoothgrad(cubic_functional(c), x, 10, 5).phi);
}

TEST_CASE("grad times input") {
  Rng rng(3);
  Matrix x = testing::uniform_matrix(5, 3, rng);
  x(2, 1) = 0.0;
  const Vector c = Vector::LinSpaced(3, -2.0, 2.0);
  const AttributionResult gi = grad_times_input(cubic_functional(c), x, 6, 8);
  CHECK(gi.phi(2, 1) == 0.0);
  const AttributionResult g = smoothgrad(cubic_functional(c), x, 6, 8);
  CHECK((gi.phi - x.cwiseProduct(g.phi)).cwiseAbs().maxCoeff() <= 1e-15);
  CHECK(gi.method == Method::GradInput);

  const AttributionResult m = grad_times_input(mean_functional(), x, 3, 1);
  CHECK((m.phi - x / 15.0).cwiseAbs().maxCoeff() <= 1e-15);
  CHECK_THROWS(grad_times_input(g, Matrix::Zero(2, 2)));
}

TEST_CASE("integrated gradients examples") {
  Rng rng(4);
  const Matrix x = testing::uniform_matrix(5, 3, rng);
  const Vector c = Vector::LinSpaced(3, -1.0, 2.0);
  CHECK(integrated_gradients(cubic_functional(c), x, x, 16).phi.isZero(0.0));
  CHECK_THROWS(integrated_gradients(mean_functional(), x, x, 1));
  CHECK_THROWS(integrated_gradients(mean_functional(), x, Matrix::Zero(2, 3), 8));

  const Functional linear{[c](const Matrix& m) { return (m.colwise().mean() * c)(0, 0); },
                          [c](const Matrix& m) {
                            return Matrix((Matrix::Ones(m.rows(), 1) * c.transpose()) / static_cast<double>(m.rows()));
                          },
                          {}};
  const Matrix base = column_mean_baseline(x);
  for (int steps : {2, 7, 64}) {
    const AttributionResult r = integrated_gradients(linear, x, base, steps);
    for (int i = 0; i < 5; ++i) {
      for (int j = 0; j < 3; ++j) CHECK(r.phi(i, j) == doctest::Approx(c(j) * (x(i, j) - base(i, j)) / 5.0));
    }
  }
}

TEST_CASE("column mean baseline") {
  Matrix x(2, 2);
  x << 1, 2, 3, 6;
  Matrix expected(2, 2);
  expected << 2, 4, 2, 4;
  CHECK(column_mean_baseline(x) == expected);
}

TEST_CASE("integrated gradients completeness on a trained toy model") {
  // Degree follows the sign of covariate 0, so the baseline gap is large.
  Rng rng(5);
  const Matrix x1 = testing::uniform_matrix(30, 4, rng);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Matrix b = Matrix::Zero(30, 8);
  for (Eigen::Index i = 0; i < 30; ++i) {
    for (Eigen::Index j = 0; j < 8; ++j) b(i, j) = u(rng) < (x1(i, 0) > 0 ? 0.8 : 0.1) ? 1.0 : 0.0;
  }
  const BipartiteGraph g(b, x1, Matrix::Ones(8, 1));
  ModelConfig c;
  c.epochs = 150;
  const TrainedModel m = train(g, nullptr, c);
  const ConnectivityFunctional f(m, g);
  for (const Matrix& base : {column_mean_baseline(g.x1), Matrix(Matrix::Zero(30, 4))}) {
    const AttributionResult r = integrated_gradients(f.as_functional(), g.x1, base, 128);
    const double gap = f.value(g.x1) - f.value(base);
    CHECK(std::abs(gap) > 0.05);
    CHECK(std::abs(r.phi.sum() - gap) <= 1e-3 * std::abs(gap));
  }
}

TEST_CASE("kernel shapley equals exact enumeration") {
  SUBCASE("three-player interacting game") {
    auto v = [](const std::vector<char>& z) {
      return 1.5 * z[0] - 0.7 * z[1] + 2.0 * z[2] + 0.9 * z[0] * z[1] - 1.3 * z[0] * z[1] * z[2] + 0.25;
    };
    const ShapleyGame g = kernel_shapley(v, 3, 8, 1);
    CHECK((g.phi - exact_shapley(v, 3)).cwiseAbs().maxCoeff() <= 1e-8);
    CHECK(g.intercept == 0.25);
  }
  SUBCASE("additive games up to ten players") {
    for (int m = 2; m <= 10; ++m) {
      Rng rng(static_cast<std::uint64_t>(m));
      const Matrix coef = testing::uniform_matrix(m, 1, rng);
      auto v = [&](const std::vector<char>& z) {
        double acc = 0.5;
        for (int j = 0; j < m; ++j) acc += coef(j, 0) * z[static_cast<std::size_t>(j)];
        return acc;
      };
      const ShapleyGame g = kernel_shapley(v, m, 1 << m, 3);
      CHECK((g.phi - exact_shapley(v, m)).cwiseAbs().maxCoeff() <= 1e-8);
      CHECK((g.phi - coef.col(0)).cwiseAbs().maxCoeff() <= 1e-8);
    }
  }
  SUBCASE("sampled coalitions keep efficiency and recover additive games") {
    Rng rng(44);
    const int m = 14;
    const Matrix coef = testing::uniform_matrix(m, 1, rng);
    auto v = [&](const std::vector<char>& z) {
      double acc = 0;
      for (int j = 0; j < m; ++j) acc += coef(j, 0) * z[static_cast<std::size_t>(j)];
      return acc;
    };
    const ShapleyGame g = kernel_shapley(v, m, 400, 9);
    CHECK(g.phi.sum() == doctest::Approx(coef.sum()).epsilon(1e-10));
    CHECK((g.phi - coef.col(0)).cwiseAbs().maxCoeff() <= 1e-8);
  }
  CHECK_THROWS_AS(kernel_shapley([](const std::vector<char>&) { return 0.0; }, 5, 6, 0), std::invalid_argument);
  CHECK(default_coalitions(3) == 8);
  CHECK(default_coalitions(57) == 2048);
}

TEST_CASE("graphsvx examples") {
  Rng rng(6);
  const Matrix x = testing::uniform_matrix(8, 4, rng);
  const GroupPartition one = GroupPartition::single(8);
  const Functional constant{[](const Matrix&) { return 0.3; }, [](const Matrix& m) { return Matrix(Matrix::Zero(m.rows(), m.cols())); }, {}};
  const AttributionResult c = graphsvx_grouped(constant, x, one, 16, 1);
  CHECK(c.phi_group.cwiseAbs().maxCoeff() <= 1e-12);
  CHECK(c.intercept(0) == 0.3);
  CHECK(c.phi.size() == 0);

  // Additive in feature 2 only.
  const Functional single{[](const Matrix& m) { return 3.0 * m.col(2).mean(); }, {}, {}};
  const AttributionResult s = graphsvx_grouped(single, x, one, 16, 1);
  const double effect = 3.0 * (x.col(2).mean() - column_mean_baseline(x).col(2).mean());
  for (int j : {0, 1, 3}) CHECK(std::abs(s.phi_group(0, j)) <= 1e-12);
  CHECK(s.phi_group(0, 2) == doctest::Approx(effect).epsilon(1e-10));

  // Sharper single-feature game: per-row signal over a group of 4.
  const GroupPartition two({0, 0, 0, 0, 1, 1, 1, 1}, 2);
  const Functional rows{[](const Matrix& m) { return m.col(1).head(4).array().square().sum(); }, {}, {}};
  const AttributionResult r = graphsvx_grouped(rows, x, two, 16, 2);
  Matrix probe = column_mean_baseline(x);
  const double base = rows.value(probe);
  probe.block(0, 1, 4, 1) = x.block(0, 1, 4, 1);
  CHECK(r.phi_group(0, 1) == doctest::Approx(rows.value(probe) - base).epsilon(1e-10));
  CHECK(r.phi_group.row(1).cwiseAbs().maxCoeff() <= 1e-12);
  CHECK_THROWS(graphsvx_grouped(rows, x, GroupPartition::single(5), 16, 2));
  CHECK_THROWS(graphsvx_grouped(rows, x, two, 5, 2));
}

TEST_CASE("graphsvx on a three-feature functional equals exact Shapley values") {
  Rng rng(7);
  const Matrix x = testing::uniform_matrix(6, 3, rng);
  const Functional f{[](const Matrix& m) { return std::tanh(m.col(0).sum() * m.col(1).mean()) + m.col(2).squaredNorm(); },
                     {}, {}};
  const Matrix mean = column_mean_baseline(x);
  auto v = [&](const std::vector<char>& z) {
    Matrix w = mean;
    for (int j = 0; j < 3; ++j) {
      if (z[static_cast<std::size_t>(j)]) w.col(j) = x.col(j);
    }
    return f.value(w);
  };
  const AttributionResult r = graphsvx_grouped(f, x, GroupPartition::single(6), 8, 3);
  CHECK((r.phi_group.row(0).transpose() - exact_shapley(v, 3)).cwiseAbs().maxCoeff() <= 1e-8);
}

TEST_CASE("graphsvx with the row-restricted evaluator matches the plain path") {
  Rng rng(8);
  Matrix b = testing::bernoulli_matrix(16, 6, 0.5, rng);
  b(0, 0) = 1;
  const BipartiteGraph g(b, testing::uniform_matrix(16, 5, rng), Matrix::Ones(6, 1));
  ModelConfig c;
  c.epochs = 30;
  const TrainedModel m = train(g, nullptr, c);
  const ConnectivityFunctional cf(m, g);
  Functional fast = cf.as_functional();
  Functional slow = fast;
  slow.restrict_rows = {};
  std::vector<int> labels(16);
  for (int i = 0; i < 16; ++i) labels[static_cast<std::size_t>(i)] = i % 4;
  const GroupPartition p(labels, 4);
  const Matrix a = graphsvx_grouped(fast, g.x1, p, 32, 5).phi_group;
  const Matrix s = graphsvx_grouped(slow, g.x1, p, 32, 5).phi_group;
  CHECK((a - s).cwiseAbs().maxCoeff() <= 1e-10);
}

TEST_CASE("aggregate by group") {
  Rng rng(9);
  AttributionResult r;
  r.phi = testing::uniform_matrix(9, 4, rng);
  r.phi_global = r.phi.colwise().mean().transpose();
  const Matrix one = aggregate_by_group(r, GroupPartition::single(9));
  CHECK((one.row(0).transpose() - r.phi_global).cwiseAbs().maxCoeff() <= 1e-15);

  const std::vector<int> labels{2, 0, 1, 1, 0, 2, 2, 1, 0};
  const GroupPartition p(labels, 3);
  const Matrix agg = aggregate_by_group(r, p);
  for (int k = 0; k < 3; ++k) {
    for (int j = 0; j < 4; ++j) {
      double s = 0;
      int n = 0;
      for (int i = 0; i < 9; ++i) {
        if (labels[static_cast<std::size_t>(i)] == k) {
          s += r.phi(i, j);
          ++n;
        }
      }
      CHECK(agg(k, j) == doctest::Approx(s / n).epsilon(1e-14));
    }
  }
  Vector weighted = Vector::Zero(4);
  const auto sizes = p.sizes();
  for (int k = 0; k < 3; ++k) weighted += sizes[static_cast<std::size_t>(k)] / 9.0 * agg.row(k).transpose();
  CHECK((weighted - r.phi_global).cwiseAbs().maxCoeff() <= 1e-12);

  Matrix constant(9, 4);
  for (int i = 0; i < 9; ++i) constant.row(i).setConstant(10.0 * labels[static_cast<std::size_t>(i)]);
  r.phi = constant;
  CHECK(aggregate_by_group(r, p).col(2) == Eigen::Vector3d(0, 10, 20));

  AttributionResult empty;
  CHECK_THROWS(aggregate_by_group(empty, p));
}

TEST_CASE("estimate sign") {
  AttributionResult r;
  r.phi_global = Eigen::Vector3d(0.2, 0.0, -1e-9);
  CHECK(estimate_sign(r) == Eigen::RowVector3i(1, 0, -1));
  r.phi_group = Matrix(2, 2);
  r.phi_group << 1, -1, 0, 3;
  Eigen::MatrixXi expected(2, 2);
  expected << 1, -1, 0, 1;
  CHECK(estimate_sign(r) == expected);
}

TEST_CASE("attribute dispatch fills group scores") {
  Rng rng(10);
  const Matrix x = testing::uniform_matrix(6, 3, rng);
  const GroupPartition p({0, 1, 0, 1, 0, 1}, 2);
  const Vector c = Vector::Ones(3);
  AttributionParams params;
  params.grad_samples = 4;
  params.ig_steps = 8;
  const auto all = attribute_all({Method::Grad, Method::GradInput, Method::IntegratedGradients, Method::GraphSvx},
                                  cubic_functional(c), x, p, params, 3);
  REQUIRE(all.size() == 4);
  for (const auto& r : all) CHECK(r.phi_group.rows() == 2);
  CHECK((all[1].phi - x.cwiseProduct(all[0].phi)).cwiseAbs().maxCoeff() <= 1e-15);
  const AttributionResult alone = attribute(Method::GradInput, cubic_functional(c), x, p, params, 3);
  CHECK(alone.phi == all[1].phi);
  params.ig_zero_baseline = true;
  const AttributionResult zero = attribute(Method::IntegratedGradients, cubic_functional(c), x, p, params, 3);
  CHECK(zero.phi != all[2].phi);
}
