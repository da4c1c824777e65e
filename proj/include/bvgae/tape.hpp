#pragma once

// Minimal reverse-mode differentiation over dense Eigen matrices.
//
// A Tape records every operation applied to its Vars. After a scalar (1x1)
// output is built, backward() propagates adjoints to every node that depends
// on a variable leaf. Constants never receive gradients.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace bvgae::num {

template <typename Scalar>
using MatrixT = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

template <typename Scalar>
using VectorT = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

template <typename Scalar>
class Tape;

template <typename Scalar>
struct Var {
  Tape<Scalar>* tape = nullptr;
  std::size_t id = 0;

  const MatrixT<Scalar>& value() const { return tape->value(*this); }
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
};

template <typename Scalar>
class Tape {
 public:
  using Matrix = MatrixT<Scalar>;
  using Backward = std::function<void(Tape&, const Matrix&)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var<Scalar> variable(Matrix value) { return push(std::move(value), true, {}); }
  Var<Scalar> constant(Matrix value) { return push(std::move(value), false, {}); }

  // Records a derived node. `backward` receives the adjoint of this node and
  // must call accumulate() on each parent that requires a gradient.
  Var<Scalar> push(Matrix value, bool requires_grad, Backward backward) {
    Node node;
    node.value = std::move(value);
    node.requires_grad = requires_grad;
    node.backward = std::move(backward);
    nodes_.push_back(std::move(node));
    return Var<Scalar>{this, nodes_.size() - 1};
  }

  const Matrix& value(Var<Scalar> v) const { return node(v).value; }
  bool requires_grad(Var<Scalar> v) const { return node(v).requires_grad; }
  std::size_t size() const { return nodes_.size(); }

  void accumulate(Var<Scalar> v, const Matrix& contribution) {
    Node& n = node(v);
    if (!n.requires_grad) return;
    if (n.grad.size() == 0) {
      n.grad = contribution;
    } else {
      n.grad += contribution;
    }
  }

  void backward(Var<Scalar> output) {
    check_owned(output);
    const Matrix& out = value(output);
    if (out.rows() != 1 || out.cols() != 1) {
      throw ShapeError("backward: output must be 1x1, got " +
                       std::to_string(out.rows()) + "x" + std::to_string(out.cols()));
    }
    for (auto& n : nodes_) n.grad.resize(0, 0);
    nodes_[output.id].grad = Matrix::Ones(1, 1);
    for (std::size_t k = output.id + 1; k-- > 0;) {
      Node& n = nodes_[k];
      if (n.grad.size() == 0 || !n.backward) continue;
      n.backward(*this, n.grad);
    }
    backward_done_ = true;
  }

  // Adjoint of `v` from the most recent backward(); zeros when `v` does not
  // influence the output.
  Matrix grad(Var<Scalar> v) const {
    check_owned(v);
    if (!backward_done_) throw std::logic_error("grad: backward() has not been run");
    const Node& n = nodes_[v.id];
    if (n.grad.size() == 0) return Matrix::Zero(n.value.rows(), n.value.cols());
    return n.grad;
  }

  void check_owned(Var<Scalar> v) const {
    if (v.tape != this || v.id >= nodes_.size()) {
      throw std::invalid_argument("variable is not registered on this tape");
    }
  }

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    bool requires_grad = false;
    Backward backward;
  };

  Node& node(Var<Scalar> v) {
    check_owned(v);
    return nodes_[v.id];
  }
  const Node& node(Var<Scalar> v) const {
    check_owned(v);
    return nodes_[v.id];
  }

  std::vector<Node> nodes_;
  bool backward_done_ = false;
};

// d(output)/d(input). `input` must be a variable leaf on the same tape.
template <typename Scalar>
MatrixT<Scalar> gradient(Var<Scalar> output, Var<Scalar> input) {
  if (output.tape == nullptr || output.tape != input.tape) {
    throw std::invalid_argument("gradient: input is not registered in the computation");
  }
  output.tape->check_owned(input);
  if (!output.tape->requires_grad(input)) {
    throw std::invalid_argument("gradient: input is a constant, not a variable");
  }
  output.tape->backward(output);
  return output.tape->grad(input);
}

namespace detail {

template <typename Scalar>
Tape<Scalar>& same_tape(Var<Scalar> a, Var<Scalar> b) {
  if (a.tape == nullptr || a.tape != b.tape) {
    throw std::invalid_argument("operands belong to different tapes");
  }
  return *a.tape;
}

inline std::string shape_str(Eigen::Index r, Eigen::Index c) {
  return std::to_string(r) + "x" + std::to_string(c);
}

template <typename Scalar>
void require_same_shape(const char* op, Var<Scalar> a, Var<Scalar> b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a.rows(), a.cols()) +
                     " vs " + shape_str(b.rows(), b.cols()));
  }
}

template <typename Scalar>
bool any_grad(Var<Scalar> a) {
  return a.tape->requires_grad(a);
}

template <typename Scalar>
bool any_grad(Var<Scalar> a, Var<Scalar> b) {
  return a.tape->requires_grad(a) || b.tape->requires_grad(b);
}

}  // namespace detail

template <typename Scalar>
Var<Scalar> matmul(Var<Scalar> a, Var<Scalar> b) {
  auto& t = detail::same_tape(a, b);
  if (a.cols() != b.rows()) {
    throw ShapeError("matmul: inner dimensions differ " + detail::shape_str(a.rows(), a.cols()) +
                     " * " + detail::shape_str(b.rows(), b.cols()));
  }
  MatrixT<Scalar> out = a.value() * b.value();
  return t.push(std::move(out), detail::any_grad(a, b),
                [a, b](Tape<Scalar>& tp, const MatrixT<Scalar>& g) {
                  if (tp.requires_grad(a)) tp.accumulate(a, g * tp.value(b).transpose());
                  if (tp.requires_grad(b)) tp.accumulate(b, tp.value(a).transpose() * g);
                });
}

template <typename Scalar>
Var<Scalar> add(Var<Scalar> a, Var<Scalar> b) {
  auto& t = detail::same_tape(a, b);
  detail::require_same_shape("add", a, b);
  MatrixT<Scalar> out = a.value() + b.value();
  return t.push(std::move(out), detail::any_grad(a, b),
                [a, b](Tape<Scalar>& tp, const MatrixT<Scalar>& g) {
                  tp.accumulate(a, g);
                  tp.accumulate(b, g);
                });
}

template <typename Scalar>
Var<Scalar> sub(Var<Scalar> a, Var<Scalar> b) {
  auto& t = detail::same_tape(a, b);
  detail::require_same_shape("sub", a, b);
  MatrixT<Scalar> out = a.value() - b.value();
  return t.push(std::move(out), detail::any_grad(a, b),
                [a, b](Tape<Scalar>& tp, const MatrixT<Scalar>& g) {
                  tp.accumulate(a, g);
                  if (tp.requires_grad(b)) tp.accumulate(b, -g);
                });
}

template <typename Scalar>
Var<Scalar> hadamard(Var<Scalar> a, Var<Scalar> b) {
  auto& t = detail::same_tape(a, b);
  detail::require_same_shape("hadamard", a, b);
  MatrixT<Scalar> out = a.value().cwiseProduct(b.value());
  return t.push(std::move(out), detail::any_grad(a, b),
                [a, b](Tape<Scalar>& tp, const MatrixT<Scalar>& g) {
                  if (tp.requires_grad(a)) tp.accumulate(a, g.cwiseProduct(tp.value(b)));
                  if (tp.requires_grad(b)) tp.accumulate(b, g.cwiseProduct(tp.value(a)));
                });
}

template <typename Scalar>
Var<Scalar> scale(Var<Scalar> a, Scalar s) {
  MatrixT<Scalar> out = s * a.value();
  return a.tape->push(std::move(out), detail::any_grad(a),
                      [a, s](Tape<Scalar>& tp, const MatrixT<Scalar>& g) {
                        tp.accumulate(a, s * g);
                      });
}

template <typename Scalar>
Var<Scalar> transpose(Var<Scalar> a) {
  MatrixT<Scalar> out = a.value().transpose();
  return a.tape->push(std::move(out), detail::any_grad(a),
                      [a](Tape<Scalar>& tp, const MatrixT<Scalar>& g) {
                        tp.accumulate(a, g.transpose());
                      });
}

template <typename Scalar>
Var<Scalar> relu(Var<Scalar> a) {
  MatrixT<Scalar> out = a.value().cwiseMax(Scalar(0));
  return a.tape->push(std::move(out), detail::any_grad(a),
                      [a](Tape<Scalar>& tp, const MatrixT<Scalar>& g) {
                        const auto& x = tp.value(a);
                        tp.accumulate(a, (x.array() > Scalar(0)).select(g, Scalar(0)));
                      });
}

template <typename Scalar>
Scalar sigmoid(Scalar x) {
  if (x >= 0) return Scalar(1) / (Scalar(1) + std::exp(-x));
  const Scalar e = std::exp(x);
  return e / (Scalar(1) + e);
}

// Applied entrywise; never returns exactly 0 or 1 for |x| < ~36.
template <typename Scalar>
Var<Scalar> sigmoid(Var<Scalar> a) {
  MatrixT<Scalar> out = a.value().unaryExpr([](Scalar x) { return sigmoid(x); });
  const std::size_t out_id = a.tape->size();
  return a.tape->push(std::move(out), detail::any_grad(a),
                      [a, out_id](Tape<Scalar>& tp, const MatrixT<Scalar>& g) {
                        const auto& s = tp.value(Var<Scalar>{&tp, out_id});
                        tp.accumulate(a, (g.array() * s.array() * (Scalar(1) - s.array())).matrix());
                      });
}

template <typename Scalar>
Var<Scalar> exp(Var<Scalar> a) {
  MatrixT<Scalar> out = a.value().array().exp().matrix();
  const std::size_t out_id = a.tape->size();
  return a.tape->push(std::move(out), detail::any_grad(a),
                      [a, out_id](Tape<Scalar>& tp, const MatrixT<Scalar>& g) {
                        const auto& e = tp.value(Var<Scalar>{&tp, out_id});
                        tp.accumulate(a, g.cwiseProduct(e));
                      });
}

template <typename Scalar>
Var<Scalar> sum(Var<Scalar> a) {
  MatrixT<Scalar> out(1, 1);
  out(0, 0) = a.value().sum();
  return a.tape->push(std::move(out), detail::any_grad(a),
                      [a](Tape<Scalar>& tp, const MatrixT<Scalar>& g) {
                        const auto& x = tp.value(a);
                        tp.accumulate(a, MatrixT<Scalar>::Constant(x.rows(), x.cols(), g(0, 0)));
                      });
}

template <typename Scalar>
Var<Scalar> reduce_mean(Var<Scalar> a) {
  const auto n = static_cast<Scalar>(a.value().size());
  if (n == 0) throw ShapeError("reduce_mean: empty matrix");
  return scale(sum(a), Scalar(1) / n);
}

// Multiplies column d of `a` by s(d).
template <typename Scalar>
Var<Scalar> scale_columns(Var<Scalar> a, const VectorT<Scalar>& s) {
  if (a.cols() != s.size()) {
    throw ShapeError("scale_columns: " + std::to_string(a.cols()) + " columns vs " +
                     std::to_string(s.size()) + " scales");
  }
  MatrixT<Scalar> out = a.value() * s.asDiagonal();
  return a.tape->push(std::move(out), detail::any_grad(a),
                      [a, s](Tape<Scalar>& tp, const MatrixT<Scalar>& g) {
                        tp.accumulate(a, g * s.asDiagonal());
                      });
}

// Row k of the result is the mean of the rows of `a` whose label is k.
template <typename Scalar>
Var<Scalar> group_average_rows(Var<Scalar> a, const std::vector<int>& labels, int n_groups) {
  const auto& x = a.value();
  if (static_cast<Eigen::Index>(labels.size()) != x.rows()) {
    throw ShapeError("group_average_rows: label count differs from row count");
  }
  std::vector<Scalar> counts(static_cast<std::size_t>(n_groups), Scalar(0));
  for (int k : labels) {
    if (k < 0 || k >= n_groups) throw std::out_of_range("group_average_rows: label out of range");
    counts[static_cast<std::size_t>(k)] += 1;
  }
  for (Scalar c : counts) {
    if (c == 0) throw std::invalid_argument("group_average_rows: empty group");
  }
  MatrixT<Scalar> out = MatrixT<Scalar>::Zero(n_groups, x.cols());
  for (Eigen::Index i = 0; i < x.rows(); ++i) out.row(labels[i]) += x.row(i);
  for (int k = 0; k < n_groups; ++k) out.row(k) /= counts[static_cast<std::size_t>(k)];
  return a.tape->push(std::move(out), detail::any_grad(a),
                      [a, labels, counts](Tape<Scalar>& tp, const MatrixT<Scalar>& g) {
                        const auto& v = tp.value(a);
                        MatrixT<Scalar> ga(v.rows(), v.cols());
                        for (Eigen::Index i = 0; i < v.rows(); ++i) {
                          ga.row(i) = g.row(labels[i]) / counts[static_cast<std::size_t>(labels[i])];
                        }
                        tp.accumulate(a, ga);
                      });
}

// Mean binary cross-entropy of probabilities `prob` against a fixed 0/1
// target; entries with target 1 carry weight `pos_weight`. Probabilities are
// clamped to [eps, 1 - eps]; clamped entries pass no gradient.
template <typename Scalar>
Var<Scalar> binary_cross_entropy(Var<Scalar> prob, const MatrixT<Scalar>& target, Scalar pos_weight,
                                 Scalar eps = Scalar(1e-7)) {
  const auto& p = prob.value();
  if (p.rows() != target.rows() || p.cols() != target.cols()) {
    throw ShapeError("binary_cross_entropy: shape mismatch " + detail::shape_str(p.rows(), p.cols()) +
                     " vs " + detail::shape_str(target.rows(), target.cols()));
  }
  const auto n = static_cast<Scalar>(p.size());
  Scalar total = 0;
  for (Eigen::Index c = 0; c < p.cols(); ++c) {
    for (Eigen::Index r = 0; r < p.rows(); ++r) {
      const Scalar q = std::clamp(p(r, c), eps, Scalar(1) - eps);
      const Scalar y = target(r, c);
      total -= pos_weight * y * std::log(q) + (Scalar(1) - y) * std::log(Scalar(1) - q);
    }
  }
  MatrixT<Scalar> out(1, 1);
  out(0, 0) = total / n;
  return prob.tape->push(
      std::move(out), detail::any_grad(prob),
      [prob, target, pos_weight, eps, n](Tape<Scalar>& tp, const MatrixT<Scalar>& g) {
        const auto& pv = tp.value(prob);
        MatrixT<Scalar> gp(pv.rows(), pv.cols());
        for (Eigen::Index c = 0; c < pv.cols(); ++c) {
          for (Eigen::Index r = 0; r < pv.rows(); ++r) {
            const Scalar q = pv(r, c);
            if (q < eps || q > Scalar(1) - eps) {
              gp(r, c) = 0;
              continue;
            }
            const Scalar y = target(r, c);
            gp(r, c) = -(pos_weight * y / q - (Scalar(1) - y) / (Scalar(1) - q)) / n;
          }
        }
        tp.accumulate(prob, g(0, 0) * gp);
      });
}

// Sum over entries of KL(N(mu, exp(log_sigma)^2) || N(0, 1)).
template <typename Scalar>
Var<Scalar> kl_standard_normal(Var<Scalar> mu, Var<Scalar> log_sigma) {
  auto& t = detail::same_tape(mu, log_sigma);
  detail::require_same_shape("kl_standard_normal", mu, log_sigma);
  const auto& m = mu.value().array();
  const auto& ls = log_sigma.value().array();
  MatrixT<Scalar> out(1, 1);
  out(0, 0) = Scalar(0.5) * (m.square() + (Scalar(2) * ls).exp() - Scalar(1) - Scalar(2) * ls).sum();
  return t.push(std::move(out), detail::any_grad(mu, log_sigma),
                [mu, log_sigma](Tape<Scalar>& tp, const MatrixT<Scalar>& g) {
                  const Scalar s = g(0, 0);
                  if (tp.requires_grad(mu)) tp.accumulate(mu, s * tp.value(mu));
                  if (tp.requires_grad(log_sigma)) {
                    const auto& l = tp.value(log_sigma).array();
                    tp.accumulate(log_sigma, (s * ((Scalar(2) * l).exp() - Scalar(1))).matrix());
                  }
                });
}

}  // namespace bvgae::num
