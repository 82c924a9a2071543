#pragma once

// Embedding-factorized neural topic model backbone: a logistic-normal
// encoder q(theta | w) and a decoder beta_k = softmax(rho t_k / tau_beta),
// with the latent per-word topic assignment marginalized so that
// p(w | theta) = theta^T beta.

#include <cmath>
#include <fstream>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <type_traits>
#include <vector>

#include "contratopic/archive.hpp"
#include "contratopic/corpus.hpp"
#include "contratopic/diffcore.hpp"
#include "contratopic/error.hpp"
#include "contratopic/rng.hpp"

namespace contratopic {

using diff::Matrix;
using diff::Parameter;
using diff::SparseMatrix;
using diff::Tape;
using diff::Var;

enum class Mode { train, eval };

struct EncoderConfig {
  std::size_t hidden = 800;
  std::size_t layers = 3;
  double dropout = 0.5;
  /// Order of the two layers after the last hidden layer.
  bool batchnorm_before_dropout = true;
  double bn_momentum = 0.1;
  double bn_eps = 1e-5;
};

struct ModelShape {
  std::size_t vocab = 0;
  std::size_t topics = 0;
  std::size_t embedding_dim = 0;
  EncoderConfig encoder;
};

template <class T>
struct ModelParams {
  ModelShape shape;
  Parameter<T> rho;     // V x e word embeddings
  Parameter<T> topics;  // K x e topic embeddings
  std::vector<Parameter<T>> enc_weight;  // in x hidden
  std::vector<Parameter<T>> enc_bias;    // 1 x hidden
  Parameter<T> bn_gamma;
  Parameter<T> bn_beta;
  Parameter<T> mu_weight, mu_bias;
  Parameter<T> log_sigma_weight, log_sigma_bias;
  diff::BatchNormState<T> bn_state;

  /// Every tensor in a fixed order (frozen ones included).
  std::vector<Parameter<T>*> parameters() {
    std::vector<Parameter<T>*> out{&rho, &topics};
    for (std::size_t i = 0; i < enc_weight.size(); ++i) {
      out.push_back(&enc_weight[i]);
      out.push_back(&enc_bias[i]);
    }
    for (auto* p : {&bn_gamma, &bn_beta, &mu_weight, &mu_bias, &log_sigma_weight, &log_sigma_bias}) out.push_back(p);
    return out;
  }

  void zero_grad() {
    for (auto* p : parameters()) p->zero_grad();
  }
};

template <class T>
struct PriorSpec {
  Matrix<T> mu0;     // 1 x K
  Matrix<T> sigma0;  // 1 x K

  static PriorSpec standard(std::size_t K) {
    auto k = static_cast<Eigen::Index>(K);
    return {Matrix<T>::Zero(1, k), Matrix<T>::Ones(1, k)};
  }

  bool is_standard() const { return (mu0.array() == T(0)).all() && (sigma0.array() == T(1)).all(); }

  void validate(std::size_t K) const {
    if (static_cast<std::size_t>(mu0.cols()) != K || static_cast<std::size_t>(sigma0.cols()) != K)
      throw ValidationError("prior must have " + std::to_string(K) + " components");
    if (!(sigma0.array() > T(0)).all()) throw ValidationError("prior sigma0 entries must be positive");
  }
};

// ---------------------------------------------------------------------------
// Initialisation and word embeddings

struct EmbeddingLoad {
  Eigen::MatrixXd rho;
  std::size_t covered = 0;
  double coverage = 0.0;
};

/// Load GloVe-format text ("word v1 ... ve"). Vocabulary words missing from
/// the file get N(0, 0.02^2) rows drawn from `seed`.
inline EmbeddingLoad load_embeddings(const std::string& path, const Vocabulary& vocab, std::uint64_t seed) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open embedding file: " + path);
  EmbeddingLoad out;
  std::vector<bool> seen(vocab.size(), false);
  std::string line;
  std::size_t dim = 0, lineno = 0;
  std::vector<std::pair<std::size_t, std::vector<double>>> rows;
  while (std::getline(in, line)) {
    ++lineno;
    std::istringstream ls(line);
    std::string word;
    if (!(ls >> word)) continue;
    auto idx = vocab.index_of(word);
    if (!idx) {
      if (dim == 0) {
        double x;
        while (ls >> x) ++dim;
      }
      continue;
    }
    std::vector<double> v;
    double x;
    while (ls >> x) v.push_back(x);
    if (dim == 0) dim = v.size();
    if (v.size() != dim || dim == 0)
      throw ValidationError(path + ":" + std::to_string(lineno) + ": expected " + std::to_string(dim) +
                            " components, found " + std::to_string(v.size()));
    if (seen[*idx]) continue;
    seen[*idx] = true;
    rows.emplace_back(*idx, std::move(v));
  }
  if (dim == 0) throw ValidationError("embedding file has no vectors: " + path);
  auto rng = make_rng(seed, Stream::embeddings);
  out.rho.resize(static_cast<Eigen::Index>(vocab.size()), static_cast<Eigen::Index>(dim));
  for (Eigen::Index i = 0; i < out.rho.rows(); ++i)
    for (Eigen::Index j = 0; j < out.rho.cols(); ++j) out.rho(i, j) = 0.02 * standard_normal(rng);
  for (auto& [i, v] : rows)
    for (std::size_t j = 0; j < dim; ++j) {
      if (!std::isfinite(v[j])) throw ValidationError(path + ": non-finite embedding component for " + vocab.words[i]);
      out.rho(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = v[j];
    }
  out.covered = rows.size();
  out.coverage = vocab.size() ? static_cast<double>(rows.size()) / static_cast<double>(vocab.size()) : 0.0;
  return out;
}

/// Randomly initialised parameters. With `pretrained_rho` the word
/// embeddings are copied and frozen; otherwise they are N(0, 0.02^2) and
/// trainable. Linear layers use U(-1/sqrt(fan_in), 1/sqrt(fan_in)).
template <class T>
ModelParams<T> init_params(const ModelShape& shape, std::uint64_t seed,
                           const std::optional<Eigen::MatrixXd>& pretrained_rho = std::nullopt) {
  if (shape.vocab == 0 || shape.topics == 0 || shape.encoder.hidden == 0 || shape.encoder.layers == 0)
    throw ValidationError("model dimensions must be positive");
  auto rng = make_rng(seed, Stream::init);
  auto idx = [](std::size_t n) { return static_cast<Eigen::Index>(n); };
  auto uniform = [&](std::size_t r, std::size_t c, double bound) {
    Matrix<T> m(idx(r), idx(c));
    for (Eigen::Index j = 0; j < m.cols(); ++j)
      for (Eigen::Index i = 0; i < m.rows(); ++i) m(i, j) = static_cast<T>(bound * (2.0 * uniform01(rng) - 1.0));
    return m;
  };
  ModelParams<T> p;
  p.shape = shape;
  if (pretrained_rho) {
    if (static_cast<std::size_t>(pretrained_rho->rows()) != shape.vocab)
      throw ValidationError("pretrained embeddings have " + std::to_string(pretrained_rho->rows()) + " rows, vocabulary has " +
                            std::to_string(shape.vocab));
    p.shape.embedding_dim = static_cast<std::size_t>(pretrained_rho->cols());
    p.rho = Parameter<T>("rho", pretrained_rho->cast<T>(), false);
  } else {
    if (shape.embedding_dim == 0) throw ValidationError("embedding_dim must be positive");
    Matrix<T> r(idx(shape.vocab), idx(shape.embedding_dim));
    for (Eigen::Index j = 0; j < r.cols(); ++j)
      for (Eigen::Index i = 0; i < r.rows(); ++i) r(i, j) = static_cast<T>(0.02 * standard_normal(rng));
    p.rho = Parameter<T>("rho", std::move(r), true);
  }
  const std::size_t e = p.shape.embedding_dim, H = shape.encoder.hidden, K = shape.topics;
  p.topics = Parameter<T>("topics", uniform(K, e, 1.0 / std::sqrt(static_cast<double>(e))));
  std::size_t fan_in = shape.vocab;
  for (std::size_t l = 0; l < shape.encoder.layers; ++l) {
    const double b = 1.0 / std::sqrt(static_cast<double>(fan_in));
    p.enc_weight.emplace_back("enc_w" + std::to_string(l), uniform(fan_in, H, b));
    p.enc_bias.emplace_back("enc_b" + std::to_string(l), uniform(1, H, b));
    fan_in = H;
  }
  p.bn_gamma = Parameter<T>("bn_gamma", Matrix<T>::Ones(1, idx(H)));
  p.bn_beta = Parameter<T>("bn_beta", Matrix<T>::Zero(1, idx(H)));
  const double bh = 1.0 / std::sqrt(static_cast<double>(H));
  p.mu_weight = Parameter<T>("mu_w", uniform(H, K, bh));
  p.mu_bias = Parameter<T>("mu_b", uniform(1, K, bh));
  p.log_sigma_weight = Parameter<T>("log_sigma_w", uniform(H, K, bh));
  p.log_sigma_bias = Parameter<T>("log_sigma_b", uniform(1, K, bh));
  p.bn_state = diff::BatchNormState<T>(idx(H));
  return p;
}

// ---------------------------------------------------------------------------
// Batches

template <class T>
struct Batch {
  SparseMatrix<T> counts;       // B x V raw counts
  SparseMatrix<T> frequencies;  // B x V counts / total_tokens
  std::vector<std::string> ids;

  Eigen::Index size() const { return counts.rows(); }
};

template <class T>
Batch<T> make_batch(std::span<const BowDocument> docs, std::span<const std::size_t> order, std::size_t V) {
  Batch<T> b;
  std::vector<Eigen::Triplet<T>> tc, tf;
  Eigen::Index row = 0;
  for (auto i : order) {
    const auto& d = docs[i];
    if (d.total_tokens == 0) throw ValidationError("document " + d.id + " has no tokens");
    for (auto [w, n] : d.counts) {
      if (w >= V) throw ValidationError("document " + d.id + " references word outside the vocabulary");
      tc.emplace_back(row, static_cast<Eigen::Index>(w), static_cast<T>(n));
      tf.emplace_back(row, static_cast<Eigen::Index>(w),
                      static_cast<T>(static_cast<double>(n) / static_cast<double>(d.total_tokens)));
    }
    b.ids.push_back(d.id);
    ++row;
  }
  b.counts.resize(row, static_cast<Eigen::Index>(V));
  b.frequencies.resize(row, static_cast<Eigen::Index>(V));
  b.counts.setFromTriplets(tc.begin(), tc.end());
  b.frequencies.setFromTriplets(tf.begin(), tf.end());
  return b;
}

template <class T>
Batch<T> make_batch(std::span<const BowDocument> docs, std::size_t V) {
  std::vector<std::size_t> order(docs.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  return make_batch<T>(docs, order, V);
}

// ---------------------------------------------------------------------------
// Encoder / decoder

template <class T>
struct EncodedBatch {
  Var<T> theta;
  Var<T> mu;
  Var<T> log_sigma;
};

/// Registers every model tensor on a tape once per forward pass.
template <class T>
struct ParamVars {
  Var<T> rho, topics;
  std::vector<Var<T>> enc_weight, enc_bias;
  Var<T> bn_gamma, bn_beta, mu_weight, mu_bias, log_sigma_weight, log_sigma_bias;

  ParamVars(Tape<T>& tape, ModelParams<T>& p)
      : rho(tape.parameter(p.rho)), topics(tape.parameter(p.topics)) {
    for (std::size_t i = 0; i < p.enc_weight.size(); ++i) {
      enc_weight.push_back(tape.parameter(p.enc_weight[i]));
      enc_bias.push_back(tape.parameter(p.enc_bias[i]));
    }
    bn_gamma = tape.parameter(p.bn_gamma);
    bn_beta = tape.parameter(p.bn_beta);
    mu_weight = tape.parameter(p.mu_weight);
    mu_bias = tape.parameter(p.mu_bias);
    log_sigma_weight = tape.parameter(p.log_sigma_weight);
    log_sigma_bias = tape.parameter(p.log_sigma_bias);
  }
};

/// q(theta | w): MLP over term frequencies (SeLU), batch norm and dropout
/// after the last hidden layer, linear heads for mu and log sigma. Train
/// mode returns softmax(mu + sigma * noise); eval mode returns softmax(mu).
template <class T>
EncodedBatch<T> encode(Tape<T>& /*tape*/, const Batch<T>& batch, ModelParams<T>& params, ParamVars<T>& vars,
                       const std::type_identity_t<Matrix<T>>& noise, Mode mode, Rng& dropout_rng) {
  const auto& enc = params.shape.encoder;
  const bool train = mode == Mode::train;
  Var<T> h = diff::selu(diff::add(diff::sparse_matmul(batch.frequencies, vars.enc_weight[0]), vars.enc_bias[0]));
  for (std::size_t l = 1; l < vars.enc_weight.size(); ++l)
    h = diff::selu(diff::add(diff::matmul(h, vars.enc_weight[l]), vars.enc_bias[l]));
  auto bn = [&](const Var<T>& x) {
    return diff::batch_norm(x, vars.bn_gamma, vars.bn_beta, params.bn_state, train, enc.bn_momentum, enc.bn_eps);
  };
  if (enc.batchnorm_before_dropout) {
    h = diff::dropout(bn(h), enc.dropout, train, dropout_rng);
  } else {
    h = bn(diff::dropout(h, enc.dropout, train, dropout_rng));
  }
  EncodedBatch<T> out;
  out.mu = diff::add(diff::matmul(h, vars.mu_weight), vars.mu_bias);
  out.log_sigma = diff::add(diff::matmul(h, vars.log_sigma_weight), vars.log_sigma_bias);
  if (train) {
    if (noise.rows() != out.mu.rows() || noise.cols() != out.mu.cols())
      throw ShapeError("encode: noise " + diff::shape_str(noise) + " does not match " + diff::shape_str(out.mu.value()));
    out.theta = diff::softmax_rows(diff::reparameterize(out.mu, out.log_sigma, noise));
  } else {
    out.theta = diff::softmax_rows(out.mu);
  }
  return out;
}

/// beta = softmax over the vocabulary of t rho^T / tau_beta, [K x V].
template <class T>
Var<T> decode(ParamVars<T>& vars, double tau_beta) {
  if (!(tau_beta > 0.0)) throw ValidationError("tau_beta must be positive, got " + std::to_string(tau_beta));
  return diff::softmax_rows(diff::scale(diff::matmul(vars.topics, diff::transpose(vars.rho)), static_cast<T>(1.0 / tau_beta)));
}

/// -sum_d sum_w count[d, w] * log((theta_d^T beta)_w + eps), evaluated only
/// at observed words.
template <class T>
Var<T> multinomial_nll(const Var<T>& theta, const Var<T>& beta, const SparseMatrix<T>& counts,
                       const std::vector<std::string>& ids) {
  auto& tape = *theta.tape();
  if (theta.cols() != beta.rows() || theta.rows() != counts.rows() || beta.cols() != counts.cols())
    throw ShapeError("multinomial_nll: theta " + diff::shape_str(theta.value()) + ", beta " +
                     diff::shape_str(beta.value()) + ", counts " + diff::shape_str(counts));
  const T eps = static_cast<T>(diff::log_epsilon);
  const Matrix<T> theta_t = theta.value().transpose();  // K x B
  const Matrix<T>& b = beta.value();
  std::vector<T> probs(static_cast<std::size_t>(counts.nonZeros()));
  double total = 0.0;
  std::size_t k = 0;
  for (Eigen::Index d = 0; d < counts.outerSize(); ++d) {
    double doc_loss = 0.0;
    for (typename SparseMatrix<T>::InnerIterator it(counts, d); it; ++it, ++k) {
      const T p = theta_t.col(d).dot(b.col(it.col()));
      probs[k] = p;
      doc_loss -= static_cast<double>(it.value()) * std::log(static_cast<double>(p + eps));
    }
    if (!std::isfinite(doc_loss))
      throw NumericalError("non-finite reconstruction loss for document " +
                           (static_cast<std::size_t>(d) < ids.size() ? ids[static_cast<std::size_t>(d)] : std::to_string(d)));
    total += doc_loss;
  }
  const SparseMatrix<T>* cp = &counts;
  return tape.record("multinomial_nll", Matrix<T>::Constant(1, 1, static_cast<T>(total)), {theta, beta},
                     [theta, beta, cp, probs = std::move(probs), eps](Tape<T>& tp, const Matrix<T>& g, const Matrix<T>&) {
                       const T up = g(0, 0);
                       const Matrix<T> th_t = theta.value().transpose();
                       const Matrix<T>& bv = beta.value();
                       Matrix<T> dtheta_t = Matrix<T>::Zero(th_t.rows(), th_t.cols());
                       Matrix<T> dbeta = Matrix<T>::Zero(bv.rows(), bv.cols());
                       std::size_t q = 0;
                       for (Eigen::Index d = 0; d < cp->outerSize(); ++d)
                         for (typename SparseMatrix<T>::InnerIterator it(*cp, d); it; ++it, ++q) {
                           const T coef = -up * it.value() / (probs[q] + eps);
                           dtheta_t.col(d) += coef * bv.col(it.col());
                           dbeta.col(it.col()) += coef * th_t.col(d);
                         }
                       if (theta.needs_grad()) tp.accumulate(theta, dtheta_t.transpose());
                       if (beta.needs_grad()) tp.accumulate(beta, dbeta);
                     });
}

template <class T>
struct ElboTerms {
  Var<T> rec;
  Var<T> kl;
};

/// Reconstruction and KL terms summed over the batch.
/// KL per document = sum_k [log(s0/s) + (s^2 + (mu - mu0)^2) / (2 s0^2) - 1/2].
template <class T>
ElboTerms<T> elbo_terms(const Batch<T>& batch, const EncodedBatch<T>& enc, const Var<T>& beta, const PriorSpec<T>& prior) {
  auto& tape = *beta.tape();
  const auto K = static_cast<std::size_t>(enc.mu.cols());
  prior.validate(K);
  if (batch.size() == 0) throw ValidationError("elbo_terms on an empty batch");
  ElboTerms<T> out;
  out.rec = multinomial_nll(enc.theta, beta, batch.counts, batch.ids);
  auto var = diff::exp(diff::scale(enc.log_sigma, T(2)));
  Var<T> quad;
  if (prior.is_standard()) {
    quad = diff::add(var, diff::square(enc.mu));
  } else {
    Matrix<T> inv_s0sq = prior.sigma0.array().square().inverse();
    auto centered = diff::sub(enc.mu, tape.constant(prior.mu0));
    quad = diff::mul(diff::add(var, diff::square(centered)), tape.constant(inv_s0sq));
    quad = diff::add(quad, tape.constant(Matrix<T>((T(2) * prior.sigma0.array().log()).matrix())));
  }
  auto per_entry = diff::sub(diff::add_scalar(quad, T(-1)), diff::scale(enc.log_sigma, T(2)));
  const Matrix<T>& pe = per_entry.value();
  for (Eigen::Index d = 0; d < pe.rows(); ++d)
    if (!pe.row(d).allFinite())
      throw NumericalError("non-finite KL term for document " + batch.ids[static_cast<std::size_t>(d)]);
  out.kl = diff::scale(diff::sum(per_entry), T(0.5));
  return out;
}

/// Eval-mode document-topic proportions for `docs`, computed in batches
/// without recording adjoints. Leaves batch-norm statistics untouched.
template <class T>
Matrix<T> infer_theta(ModelParams<T>& params, std::span<const BowDocument> docs, std::size_t batch_size = 1000) {
  const auto K = static_cast<Eigen::Index>(params.shape.topics);
  Matrix<T> out(static_cast<Eigen::Index>(docs.size()), K);
  Rng unused(0);
  for (std::size_t start = 0; start < docs.size(); start += batch_size) {
    const std::size_t n = std::min(batch_size, docs.size() - start);
    auto batch = make_batch<T>(docs.subspan(start, n), params.shape.vocab);
    Tape<T> tape;
    tape.set_grad_enabled(false);
    ParamVars<T> vars(tape, params);
    auto enc = encode(tape, batch, params, vars, Matrix<T>(), Mode::eval, unused);
    out.middleRows(static_cast<Eigen::Index>(start), static_cast<Eigen::Index>(n)) = enc.theta.value();
  }
  return out;
}

/// Topic-word distribution [K x V] for the current parameters.
template <class T>
Matrix<T> topic_word(ModelParams<T>& params, double tau_beta) {
  Tape<T> tape;
  tape.set_grad_enabled(false);
  ParamVars<T> vars(tape, params);
  return decode(vars, tau_beta).value();
}

// ---------------------------------------------------------------------------
// Serialization of parameters inside checkpoints

template <class T>
void write_params(BinaryWriter& w, ModelParams<T>& p) {
  w.str("model");
  w.u64(p.shape.vocab);
  w.u64(p.shape.topics);
  w.u64(p.shape.embedding_dim);
  w.u64(p.shape.encoder.hidden);
  w.u64(p.shape.encoder.layers);
  w.f64(p.shape.encoder.dropout);
  w.u64(p.shape.encoder.batchnorm_before_dropout ? 1 : 0);
  w.f64(p.shape.encoder.bn_momentum);
  w.f64(p.shape.encoder.bn_eps);
  auto params = p.parameters();
  w.u64(params.size());
  for (auto* q : params) {
    w.str(q->name);
    w.u64(q->requires_grad ? 1 : 0);
    w.matrix(q->value);
  }
  w.matrix(p.bn_state.running_mean);
  w.matrix(p.bn_state.running_var);
}

template <class T>
ModelParams<T> read_params(BinaryReader& r) {
  r.expect("model");
  ModelShape s;
  s.vocab = r.u64();
  s.topics = r.u64();
  s.embedding_dim = r.u64();
  s.encoder.hidden = r.u64();
  s.encoder.layers = r.u64();
  s.encoder.dropout = r.f64();
  s.encoder.batchnorm_before_dropout = r.u64() != 0;
  s.encoder.bn_momentum = r.f64();
  s.encoder.bn_eps = r.f64();
  ModelParams<T> p;
  p.shape = s;
  p.enc_weight.resize(s.encoder.layers);
  p.enc_bias.resize(s.encoder.layers);
  auto params = p.parameters();
  if (r.u64() != params.size()) throw ValidationError("checkpoint parameter count mismatch");
  for (auto* q : params) {
    q->name = r.str();
    q->requires_grad = r.u64() != 0;
    q->value = r.template matrix<T>();
    q->zero_grad();
  }
  p.bn_state.running_mean = r.template matrix<T>();
  p.bn_state.running_var = r.template matrix<T>();
  return p;
}

template <class T>
void write_prior(BinaryWriter& w, const PriorSpec<T>& prior) {
  w.str("prior");
  w.matrix(prior.mu0);
  w.matrix(prior.sigma0);
}

template <class T>
PriorSpec<T> read_prior(BinaryReader& r) {
  r.expect("prior");
  PriorSpec<T> p;
  p.mu0 = r.template matrix<T>();
  p.sigma0 = r.template matrix<T>();
  return p;
}

}  // namespace contratopic
