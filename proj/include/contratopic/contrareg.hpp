#pragma once

// Topic-wise contrastive regularizer: relaxed top-v subset sampling from each
// topic-word row and a contrastive loss over word similarities, where words
// drawn from the same topic are positives and words from other topics are
// negatives.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <type_traits>
#include <vector>

#include "contratopic/cooc.hpp"
#include "contratopic/diffcore.hpp"
#include "contratopic/error.hpp"
#include "contratopic/rng.hpp"

namespace contratopic {

enum class ContrastMode { full, pos_only, neg_only };
enum class SimilarityKind { npmi, embedding_dot };
enum class SamplingKind { gumbel_subset, expectation };

inline const char* to_string(ContrastMode m) {
  switch (m) {
    case ContrastMode::full: return "full";
    case ContrastMode::pos_only: return "pos_only";
    case ContrastMode::neg_only: return "neg_only";
  }
  return "?";
}
inline const char* to_string(SimilarityKind s) { return s == SimilarityKind::npmi ? "npmi" : "embedding_dot"; }
inline const char* to_string(SamplingKind s) { return s == SamplingKind::gumbel_subset ? "gumbel_subset" : "expectation"; }

inline ContrastMode parse_contrast_mode(const std::string& s) {
  if (s == "full") return ContrastMode::full;
  if (s == "pos_only") return ContrastMode::pos_only;
  if (s == "neg_only") return ContrastMode::neg_only;
  throw ValidationError("unknown contrastive mode '" + s + "' (expected full, pos_only or neg_only)");
}
inline SimilarityKind parse_similarity(const std::string& s) {
  if (s == "npmi") return SimilarityKind::npmi;
  if (s == "embedding_dot") return SimilarityKind::embedding_dot;
  throw ValidationError("unknown similarity '" + s + "' (expected npmi or embedding_dot)");
}
inline SamplingKind parse_sampling(const std::string& s) {
  if (s == "gumbel_subset") return SamplingKind::gumbel_subset;
  if (s == "expectation") return SamplingKind::expectation;
  throw ValidationError("unknown sampling '" + s + "' (expected gumbel_subset or expectation)");
}

struct RegularizerConfig {
  double lambda = 40.0;
  std::size_t v = 10;
  double tau_g = 0.5;
  ContrastMode mode = ContrastMode::full;
  SimilarityKind similarity = SimilarityKind::npmi;
  SamplingKind sampling = SamplingKind::gumbel_subset;
  /// Keep the anchor's own term E[w,w] in numerator and denominator.
  bool include_self = false;

  void validate() const {
    if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw ValidationError("lambda must be a finite value >= 0");
    if (!(tau_g > 0.0)) throw ValidationError("tau_g must be positive");
    if (v < 1) throw ValidationError("v must be >= 1");
    if (v < 2 && mode != ContrastMode::neg_only && !include_self)
      throw ValidationError("v must be >= 2 in full and pos_only modes (no positive pairs otherwise)");
  }
};

// ---------------------------------------------------------------------------
// Sampling

/// -log(-log u) with u uniform on (0, 1) clamped to [eps, 1 - eps].
inline double gumbel_from_uniform(double u) {
  u = std::clamp(u, diff::log_epsilon, 1.0 - diff::log_epsilon);
  return -std::log(-std::log(u));
}

template <class T>
diff::Matrix<T> gumbel_noise(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  diff::Matrix<T> g(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) g(i, j) = static_cast<T>(gumbel_from_uniform(uniform01(rng)));
  return g;
}

template <class T>
diff::Matrix<T> gumbel_noise(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed) {
  auto rng = make_rng(seed, Stream::gumbel);
  return gumbel_noise<T>(rows, cols, rng);
}

/// K x V noise where row k comes from its own (seed, epoch, batch, k) stream.
template <class T>
diff::Matrix<T> topic_gumbel_noise(std::size_t K, std::size_t V, std::uint64_t seed, std::uint64_t epoch, std::uint64_t batch) {
  diff::Matrix<T> g(static_cast<Eigen::Index>(K), static_cast<Eigen::Index>(V));
  for (std::size_t k = 0; k < K; ++k) {
    auto rng = make_rng(seed, Stream::gumbel, {epoch, batch, k});
    for (Eigen::Index j = 0; j < g.cols(); ++j) g(static_cast<Eigen::Index>(k), j) = static_cast<T>(gumbel_from_uniform(uniform01(rng)));
  }
  return g;
}

template <class T>
struct RelaxedSubset {
  diff::Var<T> y;  // K x V
  std::size_t v = 0;
  double tau_g = 0.0;
  std::uint64_t gumbel_seed = 0;
};

namespace detail {

/// log(max(x, lo)); the gradient is zero where the clamp is active.
template <class T>
diff::Var<T> log_clamped(const diff::Var<T>& x, T lo) {
  auto& t = *x.tape();
  diff::Matrix<T> out = x.value().cwiseMax(lo).array().log();
  return t.record("log_clamped", std::move(out), {x}, [x, lo](diff::Tape<T>& tp, const diff::Matrix<T>& g, const diff::Matrix<T>&) {
    tp.accumulate(x, diff::Matrix<T>((x.value().array() > lo).select(g.array() / x.value().array(), T(0))));
  });
}

}  // namespace detail

/// Relaxed top-v over each row of beta with fixed Gumbel noise:
///   r^1 = log beta + g, p^j = softmax(r^j / tau), r^{j+1} = r^j + log(1 - p^j),
///   y = sum_j p^j.
template <class T>
RelaxedSubset<T> relaxed_topv(const diff::Var<T>& beta, std::size_t v, double tau_g, const std::type_identity_t<diff::Matrix<T>>& noise,
                              std::uint64_t gumbel_seed = 0) {
  auto& tape = *beta.tape();
  const auto V = static_cast<std::size_t>(beta.cols());
  if (v >= V) throw ValidationError("relaxed top-v needs v < V (v=" + std::to_string(v) + ", V=" + std::to_string(V) + ")");
  if (v == 0) throw ValidationError("relaxed top-v needs v >= 1");
  if (!(tau_g > 0.0)) throw ValidationError("tau_g must be positive");
  if (noise.rows() != beta.rows() || noise.cols() != beta.cols())
    throw ShapeError("relaxed_topv: noise " + diff::shape_str(noise) + " does not match beta " + diff::shape_str(beta.value()));
  const T inv_tau = static_cast<T>(1.0 / tau_g), eps = static_cast<T>(diff::log_epsilon);
  diff::Var<T> r = diff::add(diff::log(beta), tape.constant(noise, "gumbel"));
  diff::Var<T> y;
  for (std::size_t j = 1; j <= v; ++j) {
    if (!r.value().allFinite()) throw NumericalError("relaxed top-v: non-finite keys at iteration " + std::to_string(j));
    auto p = diff::softmax_rows(diff::scale(r, inv_tau));
    if (!p.value().allFinite()) throw NumericalError("relaxed top-v: non-finite selection at iteration " + std::to_string(j));
    y = j == 1 ? p : diff::add(y, p);
    if (j < v) r = diff::add(r, detail::log_clamped(diff::add_scalar(diff::scale(p, T(-1)), T(1)), eps));
  }
  return {y, v, tau_g, gumbel_seed};
}

/// Sampling-free weights for the expectation ablation: y_k = v * beta_k.
template <class T>
RelaxedSubset<T> expectation_weights(const diff::Var<T>& beta, std::size_t v) {
  if (v < 1) throw ValidationError("expectation weights need v >= 1");
  return {diff::scale(beta, static_cast<T>(v)), v, 0.0, 0};
}

// ---------------------------------------------------------------------------
// Loss

/// Y * E for a constant symmetric similarity E; the adjoint is G * E.
template <class T>
diff::Var<T> similarity_product(const diff::Var<T>& y, const DenseSimilarity<T>& sim) {
  auto& tape = *y.tape();
  const DenseSimilarity<T>* sp = &sim;
  return tape.record("similarity_product", sim.right_multiply(y.value()), {y},
                     [y, sp](diff::Tape<T>& tp, const diff::Matrix<T>& g, const diff::Matrix<T>&) { tp.accumulate(y, sp->right_multiply(g)); });
}

/// Per (topic, anchor word) positive and total similarity mass:
///   pos(w,k) = sum_w' y_k[w'] E[w,w'] - y_k[w] E[w,w]
///   all(w,k) = sum_l sum_w' y_l[w'] E[w,w'] - y_k[w] E[w,w]
/// (self terms kept when include_self).
template <class T>
struct ContrastTerms {
  diff::Var<T> pos;  // K x V
  diff::Var<T> all;  // K x V, or 1 x V when self terms are kept
};

template <class T>
ContrastTerms<T> contrast_terms(const diff::Var<T>& y, const DenseSimilarity<T>& sim, bool include_self) {
  auto& tape = *y.tape();
  if (static_cast<std::size_t>(y.cols()) != sim.size())
    throw ShapeError("contrastive loss: weights have " + std::to_string(y.cols()) + " columns, similarity covers " +
                     std::to_string(sim.size()) + " words");
  auto a = similarity_product(y, sim);
  auto total = diff::sum_rows(a);
  if (include_self) return {a, total};
  diff::Matrix<T> diag = sim.diagonal().transpose();
  auto self = diff::mul(y, tape.constant(std::move(diag), "similarity_diagonal"));
  return {diff::sub(a, self), diff::sub(total, self)};
}

/// Weighted contrastive loss; the hard one-hot limit of y recovers the
/// supervised-contrastive form over the sampled word sets.
///   full:     sum_k sum_w y_k[w] (log all - log pos)
///   pos_only: -sum_k sum_w y_k[w] log pos
///   neg_only: sum_k sum_w y_k[w] log(all - pos)
template <class T>
diff::Var<T> contrastive_loss(const diff::Var<T>& y, const DenseSimilarity<T>& sim, ContrastMode mode, bool include_self = false) {
  const auto K = y.rows();
  if (mode == ContrastMode::neg_only && K < 2) throw ValidationError("neg_only contrastive loss needs at least 2 topics");
  auto terms = contrast_terms(y, sim, include_self);
  diff::Var<T> per;
  switch (mode) {
    case ContrastMode::full: per = diff::sub(diff::log(terms.all), diff::log(terms.pos)); break;
    case ContrastMode::pos_only: per = diff::scale(diff::log(terms.pos), T(-1)); break;
    case ContrastMode::neg_only: per = diff::log(diff::sub(terms.all, terms.pos)); break;
  }
  auto loss = diff::sum(diff::mul(y, per));
  if (!std::isfinite(static_cast<double>(loss.scalar())))
    throw NumericalError(std::string("non-finite contrastive loss (mode ") + to_string(mode) + ")");
  return loss;
}

template <class T>
diff::Var<T> contrastive_loss(const RelaxedSubset<T>& s, const DenseSimilarity<T>& sim, const RegularizerConfig& cfg) {
  return contrastive_loss(s.y, sim, cfg.mode, cfg.include_self);
}

// ---------------------------------------------------------------------------
// Diagnostics

struct PairCounts {
  double positive = 0.0;
  double negative = 0.0;
};

/// Pair counts for hard top-v samples: K * C(v, 2) and v^2 * C(K, 2).
inline PairCounts hard_pair_counts(std::size_t K, std::size_t v) {
  const double k = static_cast<double>(K), n = static_cast<double>(v);
  return {k * n * (n - 1) / 2, n * n * k * (k - 1) / 2};
}

/// Effective pair counts of relaxed weights: sum over unordered within-topic
/// pairs of y_k[w] y_k[w'], and across topic pairs of y_k[w] y_l[w'].
template <class Derived>
PairCounts effective_pair_counts(const Eigen::MatrixBase<Derived>& y) {
  Eigen::MatrixXd yd = y.template cast<double>();
  Eigen::VectorXd row_sum = yd.rowwise().sum();
  const double within = (row_sum.array().square() - yd.array().square().rowwise().sum()).sum() / 2;
  const double total = row_sum.sum();
  const double across = (total * total - row_sum.squaredNorm()) / 2;
  return {within, across};
}

struct RegularizerDiagnostics {
  double within_npmi = 0.0;
  double cross_npmi = 0.0;
  PairCounts effective;

  static std::string csv_header() { return "within_npmi,cross_npmi,pos_pairs,neg_pairs"; }
};

/// Indices of the n largest entries of a row, ties broken by lower index.
template <class Derived>
std::vector<std::size_t> top_indices(const Eigen::MatrixBase<Derived>& row, std::size_t n) {
  std::vector<std::size_t> idx(static_cast<std::size_t>(row.size()));
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  n = std::min(n, idx.size());
  std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n), idx.end(), [&](std::size_t a, std::size_t b) {
    const auto va = row(static_cast<Eigen::Index>(a)), vb = row(static_cast<Eigen::Index>(b));
    return va > vb || (va == vb && a < b);
  });
  idx.resize(n);
  return idx;
}

/// Mean NPMI of word pairs within each topic's top-v words and across
/// topics, plus the effective pair counts of the relaxed weights.
template <class Derived>
RegularizerDiagnostics diagnose(const Eigen::MatrixBase<Derived>& y, const NpmiMatrix& npmi, std::size_t v) {
  RegularizerDiagnostics d;
  d.effective = effective_pair_counts(y);
  std::vector<std::vector<std::size_t>> tops;
  for (Eigen::Index k = 0; k < y.rows(); ++k) tops.push_back(top_indices(y.row(k), v));
  double within = 0, cross = 0;
  std::size_t nw = 0, nc = 0;
  for (std::size_t k = 0; k < tops.size(); ++k) {
    for (std::size_t a = 0; a < tops[k].size(); ++a)
      for (std::size_t b = a + 1; b < tops[k].size(); ++b, ++nw) within += npmi(tops[k][a], tops[k][b]);
    for (std::size_t l = k + 1; l < tops.size(); ++l)
      for (auto wa : tops[k])
        for (auto wb : tops[l]) {
          cross += npmi(wa, wb);
          ++nc;
        }
  }
  d.within_npmi = nw ? within / static_cast<double>(nw) : 0.0;
  d.cross_npmi = nc ? cross / static_cast<double>(nc) : 0.0;
  return d;
}

}  // namespace contratopic
