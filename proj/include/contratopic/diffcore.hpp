#pragma once

// Reverse-mode differentiation over a closed set of matrix primitives.
//
// A Tape records every primitive in execution order. Each record stores the
// forward value and an adjoint closure; Tape::backward walks the records in
// exact reverse order and accumulates gradients into the Parameters that
// were registered as leaves. Values are 2-D Eigen matrices; vectors are
// 1 x n rows and scalars are 1 x 1.

#include <cmath>
#include <cstddef>
#include <deque>
#include <functional>
#include <initializer_list>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "contratopic/error.hpp"
#include "contratopic/rng.hpp"

namespace contratopic::diff {

template <class T>
using Matrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>;
template <class T>
using SparseMatrix = Eigen::SparseMatrix<T, Eigen::RowMajor>;
using Index = Eigen::Index;

/// Guard added inside every logarithm.
inline constexpr double log_epsilon = 1e-10;
inline constexpr double selu_lambda = 1.0507009873554804934193349852946;
inline constexpr double selu_alpha = 1.6732632423543772848170429916717;

inline std::string shape_str(Index r, Index c) { return "[" + std::to_string(r) + " x " + std::to_string(c) + "]"; }

template <class M>
std::string shape_str(const M& m) {
  return shape_str(m.rows(), m.cols());
}

/// A learnable (or frozen) leaf tensor with its gradient buffer.
template <class T>
struct Parameter {
  std::string name;
  Matrix<T> value;
  Matrix<T> grad;
  bool requires_grad = true;

  Parameter() = default;
  Parameter(std::string n, Matrix<T> v, bool trainable = true)
      : name(std::move(n)), value(std::move(v)), requires_grad(trainable) {
    zero_grad();
  }

  void zero_grad() { grad.setZero(value.rows(), value.cols()); }
};

template <class T>
class Tape;

/// Handle to a value recorded on a Tape.
template <class T>
class Var {
 public:
  Var() = default;

  const Matrix<T>& value() const { return tape_->node(id_).value; }
  Index rows() const { return value().rows(); }
  Index cols() const { return value().cols(); }
  T scalar() const {
    if (value().size() != 1) throw ShapeError("scalar() on non-scalar " + shape_str(value()));
    return value()(0, 0);
  }
  /// Adjoint after Tape::backward; empty when the node did not receive one.
  const Matrix<T>& grad() const { return tape_->node(id_).grad; }
  bool needs_grad() const { return tape_->node(id_).needs_grad; }
  std::size_t id() const { return id_; }
  Tape<T>* tape() const { return tape_; }

 private:
  friend class Tape<T>;
  Var(Tape<T>* t, std::size_t id) : tape_(t), id_(id) {}
  Tape<T>* tape_ = nullptr;
  std::size_t id_ = 0;
};

template <class T>
class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, const Matrix<T>& upstream, const Matrix<T>& output)>;

  struct Node {
    std::string op;
    Matrix<T> value;
    Matrix<T> grad;
    bool needs_grad = false;
    BackwardFn backward;
    Parameter<T>* param = nullptr;
  };

  /// With `debug`, every recorded value is checked for NaN/Inf.
  explicit Tape(bool debug = false) : debug_(debug) {}

  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var<T> parameter(Parameter<T>& p) {
    Node n;
    n.op = "param:" + p.name;
    n.value = p.value;
    n.needs_grad = p.requires_grad && grad_enabled_;
    n.param = &p;
    nodes_.push_back(std::move(n));
    return Var<T>(this, nodes_.size() - 1);
  }

  Var<T> constant(Matrix<T> v, std::string op = "constant") {
    Node n;
    n.op = std::move(op);
    n.value = std::move(v);
    check(n);
    nodes_.push_back(std::move(n));
    return Var<T>(this, nodes_.size() - 1);
  }

  /// Record a primitive. The closure is dropped when no input needs a
  /// gradient.
  Var<T> record(std::string op, Matrix<T> value, std::initializer_list<Var<T>> inputs, BackwardFn fn) {
    Node n;
    n.op = std::move(op);
    n.value = std::move(value);
    for (const auto& in : inputs) {
      if (in.tape_ != this) throw Error("primitive '" + n.op + "' mixes values from different tapes", ExitCode::failure);
      n.needs_grad = n.needs_grad || nodes_[in.id_].needs_grad;
    }
    if (n.needs_grad) n.backward = std::move(fn);
    check(n);
    nodes_.push_back(std::move(n));
    return Var<T>(this, nodes_.size() - 1);
  }

  template <class Expr>
  void accumulate(const Var<T>& v, const Expr& g) {
    auto& n = nodes_[v.id_];
    if (!n.needs_grad) return;
    if (n.grad.size() == 0) {
      n.grad = g;
    } else {
      n.grad += g;
    }
  }

  /// Populate gradients of every requires_grad Parameter reachable from
  /// `loss`. Parameter gradients accumulate across calls until zero_grad.
  void backward(const Var<T>& loss) {
    if (loss.tape_ != this) throw Error("backward on a value from another tape", ExitCode::failure);
    if (nodes_[loss.id_].value.size() != 1)
      throw ShapeError("backward requires a scalar loss, got " + shape_str(nodes_[loss.id_].value));
    for (auto& n : nodes_) n.grad.resize(0, 0);
    visit_order_.clear();
    nodes_[loss.id_].grad = Matrix<T>::Ones(1, 1);
    for (std::size_t k = loss.id_ + 1; k-- > 0;) {
      auto& n = nodes_[k];
      if (!n.needs_grad || n.grad.size() == 0) continue;
      visit_order_.push_back(k);
      if (n.backward) n.backward(*this, n.grad, n.value);
      if (n.param != nullptr && n.param->requires_grad) {
        if (n.param->grad.rows() != n.grad.rows() || n.param->grad.cols() != n.grad.cols()) n.param->zero_grad();
        n.param->grad += n.grad;
      }
    }
  }

  const Node& node(std::size_t id) const { return nodes_[id]; }
  std::size_t size() const { return nodes_.size(); }
  /// Node ids visited by the last backward, in visit order.
  const std::vector<std::size_t>& last_backward_order() const { return visit_order_; }
  bool debug() const { return debug_; }
  /// Parameters registered while disabled are treated as constants, so no
  /// adjoint closures are kept (inference).
  void set_grad_enabled(bool on) { grad_enabled_ = on; }

 private:
  void check(const Node& n) const {
    if (debug_ && !n.value.allFinite())
      throw NumericalError("non-finite value produced by node '" + n.op + "' (#" + std::to_string(nodes_.size()) + ")");
  }

  std::deque<Node> nodes_;
  std::vector<std::size_t> visit_order_;
  bool debug_ = false;
  bool grad_enabled_ = true;
};

// ---------------------------------------------------------------------------
// Broadcasting helpers. A binary elementwise primitive accepts operands whose
// dimensions either match or equal 1.

namespace detail {

inline std::pair<Index, Index> broadcast_shape(const char* op, Index ar, Index ac, Index br, Index bc) {
  auto dim = [&](Index a, Index b) -> Index {
    if (a == b || b == 1) return a;
    if (a == 1) return b;
    throw ShapeError(std::string(op) + ": incompatible shapes " + shape_str(ar, ac) + " and " + shape_str(br, bc));
  };
  return {dim(ar, br), dim(ac, bc)};
}

template <class T>
Matrix<T> expand(const Matrix<T>& m, Index r, Index c) {
  if (m.rows() == r && m.cols() == c) return m;
  return m.replicate(r / m.rows(), c / m.cols());
}

template <class T>
Matrix<T> reduce_to(const Matrix<T>& g, Index r, Index c) {
  if (g.rows() == r && g.cols() == c) return g;
  Matrix<T> out = g;
  if (r == 1 && g.rows() != 1) out = out.colwise().sum().eval();
  if (c == 1 && g.cols() != 1) out = out.rowwise().sum().eval();
  return out;
}

template <class T>
Tape<T>& tape_of(const Var<T>& a, const char* op) {
  if (a.tape() == nullptr) throw Error(std::string(op) + ": uninitialised value", ExitCode::failure);
  return *a.tape();
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Elementwise arithmetic

template <class T>
Var<T> add(const Var<T>& a, const Var<T>& b) {
  auto& t = detail::tape_of(a, "add");
  auto [r, c] = detail::broadcast_shape("add", a.rows(), a.cols(), b.rows(), b.cols());
  Matrix<T> out = detail::expand(a.value(), r, c) + detail::expand(b.value(), r, c);
  return t.record("add", std::move(out), {a, b}, [a, b](Tape<T>& tp, const Matrix<T>& g, const Matrix<T>&) {
    tp.accumulate(a, detail::reduce_to(g, a.rows(), a.cols()));
    tp.accumulate(b, detail::reduce_to(g, b.rows(), b.cols()));
  });
}

template <class T>
Var<T> sub(const Var<T>& a, const Var<T>& b) {
  auto& t = detail::tape_of(a, "sub");
  auto [r, c] = detail::broadcast_shape("sub", a.rows(), a.cols(), b.rows(), b.cols());
  Matrix<T> out = detail::expand(a.value(), r, c) - detail::expand(b.value(), r, c);
  return t.record("sub", std::move(out), {a, b}, [a, b](Tape<T>& tp, const Matrix<T>& g, const Matrix<T>&) {
    tp.accumulate(a, detail::reduce_to(g, a.rows(), a.cols()));
    tp.accumulate(b, -detail::reduce_to(g, b.rows(), b.cols()));
  });
}

/// Elementwise (Hadamard) product with broadcasting.
template <class T>
Var<T> mul(const Var<T>& a, const Var<T>& b) {
  auto& t = detail::tape_of(a, "mul");
  auto [r, c] = detail::broadcast_shape("mul", a.rows(), a.cols(), b.rows(), b.cols());
  Matrix<T> out = detail::expand(a.value(), r, c).cwiseProduct(detail::expand(b.value(), r, c));
  return t.record("mul", std::move(out), {a, b}, [a, b, r = r, c = c](Tape<T>& tp, const Matrix<T>& g, const Matrix<T>&) {
    if (a.needs_grad())
      tp.accumulate(a, detail::reduce_to<T>(g.cwiseProduct(detail::expand(b.value(), r, c)), a.rows(), a.cols()));
    if (b.needs_grad())
      tp.accumulate(b, detail::reduce_to<T>(g.cwiseProduct(detail::expand(a.value(), r, c)), b.rows(), b.cols()));
  });
}

template <class T>
Var<T> scale(const Var<T>& a, T s) {
  auto& t = detail::tape_of(a, "scale");
  return t.record("scale", a.value() * s, {a}, [a, s](Tape<T>& tp, const Matrix<T>& g, const Matrix<T>&) { tp.accumulate(a, g * s); });
}

template <class T>
Var<T> add_scalar(const Var<T>& a, T s) {
  auto& t = detail::tape_of(a, "add_scalar");
  Matrix<T> out = a.value().array() + s;
  return t.record("add_scalar", std::move(out), {a}, [a](Tape<T>& tp, const Matrix<T>& g, const Matrix<T>&) { tp.accumulate(a, g); });
}

template <class T>
Var<T> square(const Var<T>& a) {
  auto& t = detail::tape_of(a, "square");
  return t.record("square", a.value().cwiseAbs2(), {a},
                  [a](Tape<T>& tp, const Matrix<T>& g, const Matrix<T>&) { tp.accumulate(a, T(2) * g.cwiseProduct(a.value())); });
}

// ---------------------------------------------------------------------------
// Linear algebra

template <class T>
Var<T> matmul(const Var<T>& a, const Var<T>& b) {
  auto& t = detail::tape_of(a, "matmul");
  if (a.cols() != b.rows())
    throw ShapeError("matmul: incompatible shapes " + shape_str(a.value()) + " and " + shape_str(b.value()));
  Matrix<T> out = a.value() * b.value();
  return t.record("matmul", std::move(out), {a, b}, [a, b](Tape<T>& tp, const Matrix<T>& g, const Matrix<T>&) {
    if (a.needs_grad()) tp.accumulate(a, g * b.value().transpose());
    if (b.needs_grad()) tp.accumulate(b, a.value().transpose() * g);
  });
}

/// X * W for a constant sparse X.
template <class T>
Var<T> sparse_matmul(const SparseMatrix<T>& x, const Var<T>& w) {
  auto& t = detail::tape_of(w, "sparse_matmul");
  if (x.cols() != w.rows())
    throw ShapeError("sparse_matmul: incompatible shapes " + shape_str(x) + " and " + shape_str(w.value()));
  Matrix<T> out = x * w.value();
  const SparseMatrix<T>* xp = &x;
  return t.record("sparse_matmul", std::move(out), {w},
                  [xp, w](Tape<T>& tp, const Matrix<T>& g, const Matrix<T>&) { tp.accumulate(w, Matrix<T>(xp->transpose() * g)); });
}

template <class T>
Var<T> transpose(const Var<T>& a) {
  auto& t = detail::tape_of(a, "transpose");
  Matrix<T> out = a.value().transpose();
  return t.record("transpose", std::move(out), {a},
                  [a](Tape<T>& tp, const Matrix<T>& g, const Matrix<T>&) { tp.accumulate(a, g.transpose()); });
}

template <class T>
Var<T> concat_cols(const Var<T>& a, const Var<T>& b) {
  auto& t = detail::tape_of(a, "concat_cols");
  if (a.rows() != b.rows())
    throw ShapeError("concat_cols: incompatible shapes " + shape_str(a.value()) + " and " + shape_str(b.value()));
  Matrix<T> out(a.rows(), a.cols() + b.cols());
  out << a.value(), b.value();
  const Index ac = a.cols(), bc = b.cols();
  return t.record("concat_cols", std::move(out), {a, b}, [a, b, ac, bc](Tape<T>& tp, const Matrix<T>& g, const Matrix<T>&) {
    tp.accumulate(a, g.leftCols(ac));
    tp.accumulate(b, g.rightCols(bc));
  });
}

// ---------------------------------------------------------------------------
// Nonlinearities


template <class T>
Var<T> exp(const Var<T>& a) {
  auto& t = detail::tape_of(a, "exp");
  Matrix<T> out = a.value().array().exp();
  return t.record("exp", std::move(out), {a},
                  [a](Tape<T>& tp, const Matrix<T>& g, const Matrix<T>& y) { tp.accumulate(a, g.cwiseProduct(y)); });
}

/// log(x + log_epsilon).
template <class T>
Var<T> log(const Var<T>& a) {
  auto& t = detail::tape_of(a, "log");
  const T eps = static_cast<T>(log_epsilon);
  Matrix<T> out = (a.value().array() + eps).log();
  return t.record("log", std::move(out), {a}, [a, eps](Tape<T>& tp, const Matrix<T>& g, const Matrix<T>&) {
    tp.accumulate(a, Matrix<T>(g.array() / (a.value().array() + eps)));
  });
}

/// max(x, lo); the gradient is zero where the clamp is active.
template <class T>
Var<T> clamp_min(const Var<T>& a, T lo) {
  auto& t = detail::tape_of(a, "clamp_min");
  Matrix<T> out = a.value().cwiseMax(lo);
  return t.record("clamp_min", std::move(out), {a}, [a, lo](Tape<T>& tp, const Matrix<T>& g, const Matrix<T>&) {
    tp.accumulate(a, Matrix<T>((a.value().array() >= lo).select(g, T(0))));
  });
}

template <class T>
Var<T> selu(const Var<T>& a) {
  auto& t = detail::tape_of(a, "selu");
  const T lam = static_cast<T>(selu_lambda), alpha = static_cast<T>(selu_alpha);
  const auto& x = a.value().array();
  Matrix<T> out = (x > T(0)).select(lam * x, lam * alpha * (x.exp() - T(1)));
  return t.record("selu", std::move(out), {a}, [a, lam, alpha](Tape<T>& tp, const Matrix<T>& g, const Matrix<T>&) {
    const auto& xv = a.value().array();
    tp.accumulate(a, Matrix<T>(g.array() * (xv > T(0)).select(Matrix<T>::Constant(xv.rows(), xv.cols(), lam).array(),
                                                               lam * alpha * xv.exp())));
  });
}

/// Softmax over the last axis (each row sums to 1).
template <class T>
Var<T> softmax_rows(const Var<T>& a) {
  auto& t = detail::tape_of(a, "softmax");
  Matrix<T> out = (a.value().colwise() - a.value().rowwise().maxCoeff()).array().exp();
  out.array().colwise() /= out.rowwise().sum().array();
  return t.record("softmax", std::move(out), {a}, [a](Tape<T>& tp, const Matrix<T>& g, const Matrix<T>& y) {
    Matrix<T> inner = g.cwiseProduct(y).rowwise().sum();
    tp.accumulate(a, Matrix<T>(y.array() * (g.colwise() - inner.col(0)).array()));
  });
}

// ---------------------------------------------------------------------------
// Reductions

template <class T>
Var<T> sum(const Var<T>& a) {
  auto& t = detail::tape_of(a, "sum");
  Matrix<T> out = Matrix<T>::Constant(1, 1, a.value().sum());
  return t.record("sum", std::move(out), {a}, [a](Tape<T>& tp, const Matrix<T>& g, const Matrix<T>&) {
    tp.accumulate(a, Matrix<T>::Constant(a.rows(), a.cols(), g(0, 0)));
  });
}

template <class T>
Var<T> mean(const Var<T>& a) {
  return scale(sum(a), T(1) / static_cast<T>(a.value().size()));
}

/// Sum over rows: [r x c] -> [1 x c].
template <class T>
Var<T> sum_rows(const Var<T>& a) {
  auto& t = detail::tape_of(a, "sum_rows");
  Matrix<T> out = a.value().colwise().sum();
  return t.record("sum_rows", std::move(out), {a}, [a](Tape<T>& tp, const Matrix<T>& g, const Matrix<T>&) {
    tp.accumulate(a, g.replicate(a.rows(), 1));
  });
}

/// Sum over columns: [r x c] -> [r x 1].
template <class T>
Var<T> sum_cols(const Var<T>& a) {
  auto& t = detail::tape_of(a, "sum_cols");
  Matrix<T> out = a.value().rowwise().sum();
  return t.record("sum_cols", std::move(out), {a}, [a](Tape<T>& tp, const Matrix<T>& g, const Matrix<T>&) {
    tp.accumulate(a, g.replicate(1, a.cols()));
  });
}

// ---------------------------------------------------------------------------
// Stochastic and normalisation layers

/// Inverted dropout: in train mode each entry is zeroed with probability
/// `rate` and survivors are scaled by 1/(1-rate). Eval mode is the identity.
template <class T>
Var<T> dropout(const Var<T>& a, double rate, bool train, Rng& rng) {
  if (!train || rate <= 0.0) return a;
  if (rate >= 1.0) throw ValidationError("dropout rate must be < 1");
  auto& t = detail::tape_of(a, "dropout");
  Matrix<T> mask(a.rows(), a.cols());
  const T keep = static_cast<T>(1.0 / (1.0 - rate));
  for (Index j = 0; j < mask.cols(); ++j)
    for (Index i = 0; i < mask.rows(); ++i) mask(i, j) = uniform01(rng) >= rate ? keep : T(0);
  Matrix<T> out = a.value().cwiseProduct(mask);
  return t.record("dropout", std::move(out), {a}, [a, mask = std::move(mask)](Tape<T>& tp, const Matrix<T>& g, const Matrix<T>&) {
    tp.accumulate(a, g.cwiseProduct(mask));
  });
}

/// Running statistics of a batch-norm layer, each [1 x features].
template <class T>
struct BatchNormState {
  Matrix<T> running_mean;
  Matrix<T> running_var;

  explicit BatchNormState(Index features = 0)
      : running_mean(Matrix<T>::Zero(1, features)), running_var(Matrix<T>::Ones(1, features)) {}
};

/// Per-feature batch normalisation. Train mode normalises with batch
/// statistics (biased variance) and updates the running estimates with the
/// unbiased variance; eval mode uses the running estimates.
template <class T>
Var<T> batch_norm(const Var<T>& x, const Var<T>& gamma, const Var<T>& beta, BatchNormState<T>& state, bool train,
                  double momentum = 0.1, double eps = 1e-5) {
  auto& t = detail::tape_of(x, "batch_norm");
  const Index n = x.rows(), f = x.cols();
  if (gamma.rows() != 1 || gamma.cols() != f || beta.rows() != 1 || beta.cols() != f)
    throw ShapeError("batch_norm: gamma/beta must be [1 x " + std::to_string(f) + "], got " + shape_str(gamma.value()) +
                     " and " + shape_str(beta.value()));
  if (state.running_mean.cols() != f) state = BatchNormState<T>(f);
  const T e = static_cast<T>(eps);
  if (train) {
    if (n < 2) throw ValidationError("batch_norm in train mode needs at least 2 rows");
    Matrix<T> mu = x.value().colwise().mean();
    Matrix<T> centered = x.value().rowwise() - mu.row(0);
    Matrix<T> var = centered.cwiseAbs2().colwise().mean();
    Matrix<T> inv_std = (var.array() + e).rsqrt();
    Matrix<T> xhat = centered.array().rowwise() * inv_std.row(0).array();
    Matrix<T> out = (xhat.array().rowwise() * gamma.value().row(0).array()).rowwise() + beta.value().row(0).array();
    const T m = static_cast<T>(momentum);
    state.running_mean = (T(1) - m) * state.running_mean + m * mu;
    state.running_var = (T(1) - m) * state.running_var + m * var * (static_cast<T>(n) / static_cast<T>(n - 1));
    return t.record("batch_norm", std::move(out), {x, gamma, beta},
                    [x, gamma, beta, xhat = std::move(xhat), inv_std = std::move(inv_std), n](
                        Tape<T>& tp, const Matrix<T>& g, const Matrix<T>&) {
                      if (gamma.needs_grad()) tp.accumulate(gamma, Matrix<T>(g.cwiseProduct(xhat).colwise().sum()));
                      if (beta.needs_grad()) tp.accumulate(beta, Matrix<T>(g.colwise().sum()));
                      if (x.needs_grad()) {
                        Matrix<T> dxhat = g.array().rowwise() * gamma.value().row(0).array();
                        Matrix<T> s1 = dxhat.colwise().sum();
                        Matrix<T> s2 = dxhat.cwiseProduct(xhat).colwise().sum();
                        Matrix<T> dx = (static_cast<T>(n) * dxhat.array()).rowwise() - s1.row(0).array();
                        dx.array() -= xhat.array().rowwise() * s2.row(0).array();
                        dx.array().rowwise() *= inv_std.row(0).array() / static_cast<T>(n);
                        tp.accumulate(x, dx);
                      }
                    });
  }
  Matrix<T> inv_std = (state.running_var.array() + e).rsqrt();
  Matrix<T> xhat = (x.value().rowwise() - state.running_mean.row(0)).array().rowwise() * inv_std.row(0).array();
  Matrix<T> out = (xhat.array().rowwise() * gamma.value().row(0).array()).rowwise() + beta.value().row(0).array();
  return t.record("batch_norm_eval", std::move(out), {x, gamma, beta},
                  [x, gamma, beta, xhat = std::move(xhat), inv_std = std::move(inv_std)](Tape<T>& tp, const Matrix<T>& g,
                                                                                   const Matrix<T>&) {
                    if (gamma.needs_grad()) tp.accumulate(gamma, Matrix<T>(g.cwiseProduct(xhat).colwise().sum()));
                    if (beta.needs_grad()) tp.accumulate(beta, Matrix<T>(g.colwise().sum()));
                    if (x.needs_grad())
                      tp.accumulate(x, Matrix<T>(g.array().rowwise() * (gamma.value().row(0).array() * inv_std.row(0).array())));
                  });
}

/// mu + exp(log_sigma) * noise for a constant noise draw.
template <class T>
Var<T> reparameterize(const Var<T>& mu, const Var<T>& log_sigma, const Matrix<T>& noise) {
  auto& t = detail::tape_of(mu, "reparameterize");
  if (mu.rows() != log_sigma.rows() || mu.cols() != log_sigma.cols() || mu.rows() != noise.rows() ||
      mu.cols() != noise.cols())
    throw ShapeError("reparameterize: shapes " + shape_str(mu.value()) + ", " + shape_str(log_sigma.value()) + ", " +
                     shape_str(noise) + " must agree");
  Matrix<T> sigma_noise = log_sigma.value().array().exp() * noise.array();
  Matrix<T> out = mu.value() + sigma_noise;
  return t.record("reparameterize", std::move(out), {mu, log_sigma},
                  [mu, log_sigma, sigma_noise = std::move(sigma_noise)](Tape<T>& tp, const Matrix<T>& g, const Matrix<T>&) {
                    tp.accumulate(mu, g);
                    if (log_sigma.needs_grad()) tp.accumulate(log_sigma, g.cwiseProduct(sigma_noise));
                  });
}

}  // namespace contratopic::diff
