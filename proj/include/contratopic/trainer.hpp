#pragma once

// Training loop: per batch compute beta once, sum reconstruction and KL over
// the documents, add lambda times the contrastive term on relaxed top-v
// samples, and take one Adam step. Includes config parsing/hashing,
// checkpointing with bit-exact resume, and topic export.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "contratopic/adam.hpp"
#include "contratopic/archive.hpp"
#include "contratopic/contrareg.hpp"
#include "contratopic/cooc.hpp"
#include "contratopic/corpus.hpp"
#include "contratopic/hash.hpp"
#include "contratopic/ntm.hpp"

namespace contratopic {

enum class Precision { single, double_ };

inline const char* to_string(Precision p) { return p == Precision::single ? "single" : "double"; }

struct TrainConfig {
  std::size_t topics = 100;
  std::size_t epochs = 100;
  std::size_t batch_size = 1000;
  double lr = 0.0005;
  RegularizerConfig reg;
  double tau_beta = 0.1;
  std::uint64_t seed = 0;
  std::string embedding_path;
  /// Used only when no embedding file is given.
  std::size_t embedding_dim = 300;
  Precision precision = Precision::double_;
  /// Write a checkpoint every n epochs (0: only after the last epoch).
  std::size_t checkpoint_every = 0;
  EncoderConfig encoder;
  bool keep_partial_batch = true;
  /// Global gradient-norm clip; 0 disables.
  double grad_clip = 0.0;
  SimilarityStorage similarity_storage = SimilarityStorage::automatic;
  std::size_t dense_budget_mb = 1024;
  bool debug_checks = false;

  void validate() const {
    auto positive = [](std::size_t v, const char* name) {
      if (v == 0) throw ValidationError(std::string(name) + " must be positive");
    };
    positive(topics, "topics");
    positive(epochs, "epochs");
    positive(batch_size, "batch_size");
    positive(encoder.hidden, "hidden");
    positive(encoder.layers, "layers");
    positive(embedding_dim, "embedding_dim");
    if (!(lr > 0.0)) throw ValidationError("lr must be positive");
    if (!(tau_beta > 0.0)) throw ValidationError("tau_beta must be positive");
    if (!(encoder.dropout >= 0.0 && encoder.dropout < 1.0)) throw ValidationError("dropout must be in [0, 1)");
    if (!(grad_clip >= 0.0)) throw ValidationError("grad_clip must be >= 0");
    reg.validate();
  }
};

namespace detail {

inline std::string format_bool(bool b) { return b ? "true" : "false"; }

inline bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ValidationError("config key '" + key + "': expected true or false, got '" + v + "'");
}

inline std::uint64_t parse_uint(const std::string& key, const std::string& v) {
  std::size_t pos = 0;
  unsigned long long x = 0;
  try {
    if (!v.empty() && v[0] == '-') throw std::invalid_argument("negative");
    x = std::stoull(v, &pos);
  } catch (const std::exception&) {
    pos = std::string::npos;
  }
  if (pos != v.size()) throw ValidationError("config key '" + key + "': expected a non-negative integer, got '" + v + "'");
  return x;
}

inline double parse_real(const std::string& key, const std::string& v) {
  std::size_t pos = 0;
  double x = 0;
  try {
    x = std::stod(v, &pos);
  } catch (const std::exception&) {
    pos = std::string::npos;
  }
  if (pos != v.size() || !std::isfinite(x)) throw ValidationError("config key '" + key + "': expected a number, got '" + v + "'");
  return x;
}

inline std::string trim(const std::string& s) {
  auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline const char* to_string(SimilarityStorage s) {
  switch (s) {
    case SimilarityStorage::automatic: return "auto";
    case SimilarityStorage::dense: return "dense";
    case SimilarityStorage::sparse: return "sparse";
  }
  return "?";
}

}  // namespace detail

/// Keys that may change between a checkpoint and its resumption.
inline bool config_key_is_hashed(const std::string& key) {
  return key != "epochs" && key != "checkpoint_every" && key != "embedding_path" && key != "debug_checks";
}

/// Canonical key/value listing of every config key, in file order.
inline std::vector<std::pair<std::string, std::string>> config_entries(const TrainConfig& c) {
  auto real = [](double v) { return detail::format_double(v); };
  return {
      {"topics", std::to_string(c.topics)},
      {"epochs", std::to_string(c.epochs)},
      {"batch_size", std::to_string(c.batch_size)},
      {"lr", real(c.lr)},
      {"lambda", real(c.reg.lambda)},
      {"v", std::to_string(c.reg.v)},
      {"tau_g", real(c.reg.tau_g)},
      {"mode", to_string(c.reg.mode)},
      {"similarity", to_string(c.reg.similarity)},
      {"sampling", to_string(c.reg.sampling)},
      {"include_self", detail::format_bool(c.reg.include_self)},
      {"tau_beta", real(c.tau_beta)},
      {"seed", std::to_string(c.seed)},
      {"embedding_path", c.embedding_path},
      {"embedding_dim", std::to_string(c.embedding_dim)},
      {"precision", to_string(c.precision)},
      {"checkpoint_every", std::to_string(c.checkpoint_every)},
      {"hidden", std::to_string(c.encoder.hidden)},
      {"layers", std::to_string(c.encoder.layers)},
      {"dropout", real(c.encoder.dropout)},
      {"batchnorm_before_dropout", detail::format_bool(c.encoder.batchnorm_before_dropout)},
      {"keep_partial_batch", detail::format_bool(c.keep_partial_batch)},
      {"grad_clip", real(c.grad_clip)},
      {"similarity_storage", detail::to_string(c.similarity_storage)},
      {"dense_budget_mb", std::to_string(c.dense_budget_mb)},
      {"debug_checks", detail::format_bool(c.debug_checks)},
  };
}

inline void set_config_value(TrainConfig& c, const std::string& key, const std::string& v) {
  using namespace detail;
  if (key == "topics") c.topics = parse_uint(key, v);
  else if (key == "epochs") c.epochs = parse_uint(key, v);
  else if (key == "batch_size") c.batch_size = parse_uint(key, v);
  else if (key == "lr") c.lr = parse_real(key, v);
  else if (key == "lambda") c.reg.lambda = parse_real(key, v);
  else if (key == "v") c.reg.v = parse_uint(key, v);
  else if (key == "tau_g") c.reg.tau_g = parse_real(key, v);
  else if (key == "mode") c.reg.mode = parse_contrast_mode(v);
  else if (key == "similarity") c.reg.similarity = parse_similarity(v);
  else if (key == "sampling") c.reg.sampling = parse_sampling(v);
  else if (key == "include_self") c.reg.include_self = parse_bool(key, v);
  else if (key == "tau_beta") c.tau_beta = parse_real(key, v);
  else if (key == "seed") c.seed = parse_uint(key, v);
  else if (key == "embedding_path") c.embedding_path = v;
  else if (key == "embedding_dim") c.embedding_dim = parse_uint(key, v);
  else if (key == "precision") {
    if (v == "single") c.precision = Precision::single;
    else if (v == "double") c.precision = Precision::double_;
    else throw ValidationError("config key 'precision': expected single or double, got '" + v + "'");
  } else if (key == "checkpoint_every") c.checkpoint_every = parse_uint(key, v);
  else if (key == "hidden") c.encoder.hidden = parse_uint(key, v);
  else if (key == "layers") c.encoder.layers = parse_uint(key, v);
  else if (key == "dropout") c.encoder.dropout = parse_real(key, v);
  else if (key == "batchnorm_before_dropout") c.encoder.batchnorm_before_dropout = parse_bool(key, v);
  else if (key == "keep_partial_batch") c.keep_partial_batch = parse_bool(key, v);
  else if (key == "grad_clip") c.grad_clip = parse_real(key, v);
  else if (key == "similarity_storage") {
    if (v == "auto") c.similarity_storage = SimilarityStorage::automatic;
    else if (v == "dense") c.similarity_storage = SimilarityStorage::dense;
    else if (v == "sparse") c.similarity_storage = SimilarityStorage::sparse;
    else throw ValidationError("config key 'similarity_storage': expected auto, dense or sparse, got '" + v + "'");
  } else if (key == "dense_budget_mb") c.dense_budget_mb = parse_uint(key, v);
  else if (key == "debug_checks") c.debug_checks = parse_bool(key, v);
  else throw ValidationError("unknown config key '" + key + "'");
}

/// Parse "key = value" lines ('#' starts a comment). Unknown or repeated
/// keys are fatal. Keys not mentioned keep their defaults.
inline TrainConfig parse_train_config(std::istream& in, const std::string& name = "<config>", TrainConfig base = {}) {
  std::string line;
  std::size_t lineno = 0;
  std::map<std::string, std::size_t> seen;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    auto eq = line.find('=');
    if (eq == std::string::npos) throw ValidationError(name + ":" + std::to_string(lineno) + ": expected key = value");
    auto key = detail::trim(line.substr(0, eq)), value = detail::trim(line.substr(eq + 1));
    if (auto [it, fresh] = seen.emplace(key, lineno); !fresh)
      throw ValidationError(name + ":" + std::to_string(lineno) + ": key '" + key + "' repeated (first on line " +
                            std::to_string(it->second) + ")");
    try {
      set_config_value(base, key, value);
    } catch (const ValidationError& e) {
      throw ValidationError(name + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  base.validate();
  return base;
}

inline TrainConfig load_train_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open config " + path);
  return parse_train_config(in, path);
}

inline std::string format_train_config(const TrainConfig& c) {
  std::string out;
  for (auto& [k, v] : config_entries(c)) out += k + " = " + v + "\n";
  return out;
}

/// Digest of the keys that must match for a resume.
inline std::string config_hash(const TrainConfig& c) {
  Fnv1a h;
  for (auto& [k, v] : config_entries(c))
    if (config_key_is_hashed(k)) {
      h.update(k);
      h.update("=");
      h.update(v);
      h.update("\n");
    }
  return h.hex();
}

// ---------------------------------------------------------------------------
// Log

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  std::size_t batches = 0;
  double rec = 0.0;
  double kl = 0.0;
  double con = 0.0;
  double total = 0.0;
  RegularizerDiagnostics diag;
  /// NaN for epochs restored from a checkpoint.
  double wall_seconds = 0.0;
};

struct TrainLog {
  std::vector<EpochRecord> records;

  static std::string csv_header() { return "epoch,batches,rec,kl,con,total," + RegularizerDiagnostics::csv_header(); }

  /// Deterministic columns only; wall time goes to write_timing_csv.
  void write_csv(std::ostream& out) const {
    out << csv_header() << "\n";
    for (auto& r : records)
      out << r.epoch << "," << r.batches << "," << detail::format_double(r.rec) << "," << detail::format_double(r.kl) << ","
          << detail::format_double(r.con) << "," << detail::format_double(r.total) << ","
          << detail::format_double(r.diag.within_npmi) << "," << detail::format_double(r.diag.cross_npmi) << ","
          << detail::format_double(r.diag.effective.positive) << "," << detail::format_double(r.diag.effective.negative) << "\n";
  }

  void write_timing_csv(std::ostream& out) const {
    out << "epoch,wall_seconds\n";
    for (auto& r : records)
      if (!std::isnan(r.wall_seconds)) out << r.epoch << "," << detail::format_double(r.wall_seconds) << "\n";
  }
};

// ---------------------------------------------------------------------------
// Batching

/// Batches over `order`. A trailing batch of one document is merged into the
/// previous batch because batch norm needs two rows; without
/// keep_partial_batch the trailing partial batch is dropped.
inline std::vector<std::vector<std::size_t>> make_batches(const std::vector<std::size_t>& order, std::size_t batch_size,
                                                          bool keep_partial) {
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t s = 0; s < order.size(); s += batch_size) {
    const std::size_t n = std::min(batch_size, order.size() - s);
    if (n < batch_size && !keep_partial) break;
    std::vector<std::size_t> b(order.begin() + static_cast<std::ptrdiff_t>(s), order.begin() + static_cast<std::ptrdiff_t>(s + n));
    if (b.size() == 1 && !out.empty()) {
      out.back().push_back(b[0]);
    } else {
      out.push_back(std::move(b));
    }
  }
  return out;
}

inline std::vector<std::size_t> epoch_order(std::size_t N, std::uint64_t seed, std::size_t epoch) {
  std::vector<std::size_t> order(N);
  for (std::size_t i = 0; i < N; ++i) order[i] = i;
  auto rng = make_rng(seed, Stream::shuffle, {epoch});
  shuffle(order, rng);
  return order;
}

// ---------------------------------------------------------------------------
// Checkpoints

template <class T>
struct TrainState {
  ModelParams<T> params;
  PriorSpec<T> prior;
  Adam<T> optimizer;
  TrainLog log;
  std::size_t epochs_done = 0;
};

inline constexpr const char* checkpoint_magic = "CONTRATOPIC-CHECKPOINT";
inline constexpr std::uint64_t checkpoint_version = 1;

struct CheckpointHeader {
  std::vector<std::pair<std::string, std::string>> config;
  std::string config_hash;
  std::string vocab_hash;
  std::string precision;
  std::size_t epochs_done = 0;
};

template <class T>
void save_checkpoint(const std::string& path, const TrainConfig& cfg, const std::string& vocab_hash, TrainState<T>& st) {
  const std::string tmp = path + ".tmp";
  {
    BinaryWriter w(tmp);
    w.str(checkpoint_magic);
    w.u64(checkpoint_version);
    auto entries = config_entries(cfg);
    w.u64(entries.size());
    for (auto& [k, v] : entries) {
      w.str(k);
      w.str(v);
    }
    w.str(config_hash(cfg));
    w.str(vocab_hash);
    w.str(to_string(cfg.precision));
    w.u64(st.epochs_done);
    write_params(w, st.params);
    write_prior(w, st.prior);
    w.str("adam");
    w.u64(st.optimizer.step_count());
    w.u64(st.optimizer.moments().size());
    for (auto& m : st.optimizer.moments()) {
      w.matrix(m.m);
      w.matrix(m.v);
    }
    w.str("log");
    w.u64(st.log.records.size());
    for (auto& r : st.log.records) {
      w.u64(r.epoch);
      w.u64(r.batches);
      for (double x : {r.rec, r.kl, r.con, r.total, r.diag.within_npmi, r.diag.cross_npmi, r.diag.effective.positive,
                       r.diag.effective.negative})
        w.f64(x);
    }
    w.str("end");
    w.close();
  }
  std::filesystem::rename(tmp, path);
}

inline CheckpointHeader read_checkpoint_header(BinaryReader& r, const std::string& path) {
  std::string magic;
  try {
    magic = r.str();
  } catch (const ValidationError&) {
    throw ArtifactMismatch(path + " is not a checkpoint");
  }
  if (magic != checkpoint_magic) throw ArtifactMismatch(path + " is not a checkpoint");
  if (auto v = r.u64(); v != checkpoint_version)
    throw ArtifactMismatch(path + ": unsupported checkpoint version " + std::to_string(v));
  CheckpointHeader h;
  const auto n = r.u64();
  for (std::uint64_t i = 0; i < n; ++i) {
    auto k = r.str();
    auto v = r.str();
    h.config.emplace_back(std::move(k), std::move(v));
  }
  h.config_hash = r.str();
  h.vocab_hash = r.str();
  h.precision = r.str();
  h.epochs_done = r.u64();
  return h;
}

inline CheckpointHeader peek_checkpoint(const std::string& path) {
  BinaryReader r(path);
  return read_checkpoint_header(r, path);
}

template <class T>
TrainState<T> load_checkpoint(const std::string& path, CheckpointHeader* header_out = nullptr, const AdamConfig& adam = {}) {
  BinaryReader r(path);
  auto h = read_checkpoint_header(r, path);
  const char* want = std::is_same_v<T, float> ? "single" : "double";
  if (h.precision != want) throw ArtifactMismatch(path + ": checkpoint precision is " + h.precision + ", expected " + want);
  TrainState<T> st;
  st.epochs_done = h.epochs_done;
  st.params = read_params<T>(r);
  st.prior = read_prior<T>(r);
  r.expect("adam");
  const auto steps = r.u64();
  std::vector<AdamMoments<T>> moments(r.u64());
  for (auto& m : moments) {
    m.m = r.template matrix<T>();
    m.v = r.template matrix<T>();
  }
  st.optimizer = Adam<T>(adam);
  st.optimizer.restore(steps, std::move(moments));
  r.expect("log");
  st.log.records.resize(r.u64());
  for (auto& rec : st.log.records) {
    rec.epoch = r.u64();
    rec.batches = r.u64();
    for (double* x : {&rec.rec, &rec.kl, &rec.con, &rec.total, &rec.diag.within_npmi, &rec.diag.cross_npmi,
                      &rec.diag.effective.positive, &rec.diag.effective.negative})
      *x = r.f64();
    // Wall time is not persisted so checkpoints stay byte-reproducible.
    rec.wall_seconds = std::numeric_limits<double>::quiet_NaN();
  }
  r.expect("end");
  if (header_out) *header_out = std::move(h);
  return st;
}

/// Throws ArtifactMismatch listing every hashed key whose value differs.
inline void check_resumable(const CheckpointHeader& h, const TrainConfig& cfg, const std::string& vocab_hash) {
  if (h.vocab_hash != vocab_hash)
    throw ArtifactMismatch("checkpoint vocabulary hash " + h.vocab_hash + " does not match corpus vocabulary " + vocab_hash);
  if (h.config_hash == config_hash(cfg)) return;
  std::map<std::string, std::string> saved(h.config.begin(), h.config.end());
  std::string diffs;
  for (auto& [k, v] : config_entries(cfg)) {
    if (!config_key_is_hashed(k)) continue;
    auto it = saved.find(k);
    const std::string old = it == saved.end() ? "<missing>" : it->second;
    if (old != v) diffs += (diffs.empty() ? "" : ", ") + k + " (checkpoint " + old + ", config " + v + ")";
  }
  throw ArtifactMismatch("config does not match checkpoint: " + (diffs.empty() ? std::string("hash differs") : diffs));
}

// ---------------------------------------------------------------------------
// Training

template <class T>
struct TrainResult {
  ModelParams<T> params;
  TrainLog log;
  PriorSpec<T> prior;
};

struct TrainOptions {
  /// Written per checkpoint_every and after the final epoch when non-empty.
  std::string checkpoint_path;
  /// Continue from this checkpoint when non-empty.
  std::string resume_from;
  /// Pre-loaded word embeddings (overrides cfg.embedding_path).
  std::optional<Eigen::MatrixXd> embeddings;
  std::function<void(const EpochRecord&)> on_epoch;
  /// Stop after this many epochs in this call (0: run to cfg.epochs).
  std::size_t max_epochs_this_run = 0;
};

namespace detail {

template <class T>
double global_grad_norm(const std::vector<diff::Parameter<T>*>& params) {
  double s = 0;
  for (auto* p : params)
    if (p->requires_grad) s += static_cast<double>(p->grad.squaredNorm());
  return std::sqrt(s);
}

}  // namespace detail

/// Loss of one batch on a fresh tape; returns (rec, kl, con, total) values
/// and leaves gradients in the parameters.
template <class T>
struct BatchLoss {
  double rec = 0, kl = 0, con = 0, total = 0;
  Matrix<T> y;
};

template <class T>
BatchLoss<T> train_batch(ModelParams<T>& params, const PriorSpec<T>& prior, const Batch<T>& batch,
                         const DenseSimilarity<T>* sim, const TrainConfig& cfg, std::size_t epoch, std::size_t b) {
  const auto K = params.shape.topics, V = params.shape.vocab;
  Tape<T> tape(cfg.debug_checks);
  ParamVars<T> vars(tape, params);
  auto beta = decode(vars, cfg.tau_beta);
  Matrix<T> noise(batch.size(), static_cast<Eigen::Index>(K));
  {
    auto rng = make_rng(cfg.seed, Stream::reparam, {epoch, b});
    for (Eigen::Index i = 0; i < noise.rows(); ++i)
      for (Eigen::Index k = 0; k < noise.cols(); ++k) noise(i, k) = static_cast<T>(standard_normal(rng));
  }
  auto drop_rng = make_rng(cfg.seed, Stream::dropout, {epoch, b});
  auto enc = encode(tape, batch, params, vars, noise, Mode::train, drop_rng);
  auto terms = elbo_terms(batch, enc, beta, prior);
  auto total = diff::add(terms.rec, terms.kl);
  BatchLoss<T> out;
  if (cfg.reg.lambda > 0.0) {
    RelaxedSubset<T> s = cfg.reg.sampling == SamplingKind::expectation
                             ? expectation_weights(beta, cfg.reg.v)
                             : relaxed_topv(beta, cfg.reg.v, cfg.reg.tau_g, topic_gumbel_noise<T>(K, V, cfg.seed, epoch, b));
    auto con = contrastive_loss(s, *sim, cfg.reg);
    out.con = static_cast<double>(con.scalar());
    out.y = s.y.value();
    total = diff::add(total, diff::scale(con, static_cast<T>(cfg.reg.lambda)));
  }
  out.rec = static_cast<double>(terms.rec.scalar());
  out.kl = static_cast<double>(terms.kl.scalar());
  out.total = static_cast<double>(total.scalar());
  if (!std::isfinite(out.total)) throw NumericalError("non-finite batch loss");
  params.zero_grad();
  tape.backward(total);
  return out;
}

template <class T>
TrainResult<T> train(const BowCorpus& corpus, const NpmiMatrix& npmi_train, const TrainConfig& cfg, const TrainOptions& opt = {}) {
  cfg.validate();
  const std::size_t V = corpus.vocabulary.size(), K = cfg.topics;
  if (corpus.train_docs.empty()) throw ValidationError("corpus has no training documents");
  if (npmi_train.size() != V)
    throw ArtifactMismatch("NPMI matrix covers " + std::to_string(npmi_train.size()) + " words, vocabulary has " + std::to_string(V));
  if (npmi_train.source() == NpmiSource::test) throw ArtifactMismatch("training requires the train-split NPMI matrix, got the test one");
  if (npmi_train.doc_count() != corpus.train_docs.size())
    throw ArtifactMismatch("NPMI matrix was built from " + std::to_string(npmi_train.doc_count()) + " documents, corpus has " +
                           std::to_string(corpus.train_docs.size()) + " training documents");
  if (cfg.reg.lambda > 0.0 && cfg.reg.sampling == SamplingKind::gumbel_subset && cfg.reg.v >= V)
    throw ValidationError("v=" + std::to_string(cfg.reg.v) + " must be smaller than the vocabulary size " + std::to_string(V));
  const std::string vocab_hash = corpus.vocabulary.hash();
  const AdamConfig adam_cfg{cfg.lr, 0.9, 0.999, 1e-8};

  TrainState<T> st;
  if (!opt.resume_from.empty()) {
    CheckpointHeader h;
    st = load_checkpoint<T>(opt.resume_from, &h, adam_cfg);
    check_resumable(h, cfg, vocab_hash);
  } else {
    ModelShape shape;
    shape.vocab = V;
    shape.topics = K;
    shape.embedding_dim = cfg.embedding_dim;
    shape.encoder = cfg.encoder;
    std::optional<Eigen::MatrixXd> rho = opt.embeddings;
    if (!rho && !cfg.embedding_path.empty()) rho = load_embeddings(cfg.embedding_path, corpus.vocabulary, cfg.seed).rho;
    st.params = init_params<T>(shape, cfg.seed, rho);
    st.prior = PriorSpec<T>::standard(K);
    st.optimizer = Adam<T>(adam_cfg);
  }

  const bool need_sim = cfg.reg.lambda > 0.0;
  const SimilarityOptions sim_opt{cfg.similarity_storage, cfg.dense_budget_mb << 20};
  std::optional<DenseSimilarity<T>> sim;
  if (need_sim && cfg.reg.similarity == SimilarityKind::npmi) sim = dense_exp_view<T>(npmi_train, sim_opt);

  auto params_list = st.params.parameters();
  const std::size_t last_epoch =
      opt.max_epochs_this_run ? std::min(cfg.epochs, st.epochs_done + opt.max_epochs_this_run) : cfg.epochs;
  for (std::size_t epoch = st.epochs_done + 1; epoch <= last_epoch; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    // Embedding-dot similarity follows the current (possibly trained) rho,
    // refreshed once per epoch and held constant within it.
    if (need_sim && cfg.reg.similarity == SimilarityKind::embedding_dot && (!sim || st.params.rho.requires_grad))
      sim = embedding_similarity<T>(st.params.rho.value);
    EpochRecord rec;
    rec.epoch = epoch;
    auto batches = make_batches(epoch_order(corpus.train_docs.size(), cfg.seed, epoch), cfg.batch_size, cfg.keep_partial_batch);
    Matrix<T> last_y;
    for (std::size_t b = 0; b < batches.size(); ++b) {
      auto batch = make_batch<T>(corpus.train_docs, batches[b], V);
      BatchLoss<T> loss;
      try {
        loss = train_batch(st.params, st.prior, batch, sim ? &*sim : nullptr, cfg, epoch, b);
      } catch (const NumericalError& e) {
        std::string where = "epoch " + std::to_string(epoch) + ", batch " + std::to_string(b) + ": " + e.what();
        if (!opt.checkpoint_path.empty() && std::filesystem::exists(opt.checkpoint_path))
          where += " (last good checkpoint kept at " + opt.checkpoint_path + ")";
        throw NumericalError(where);
      }
      if (cfg.grad_clip > 0.0) {
        const double n = detail::global_grad_norm(params_list);
        if (n > cfg.grad_clip)
          for (auto* p : params_list) p->grad *= static_cast<T>(cfg.grad_clip / n);
      }
      st.optimizer.step(params_list);
      rec.rec += loss.rec;
      rec.kl += loss.kl;
      rec.con += loss.con;
      rec.total += loss.total;
      ++rec.batches;
      if (loss.y.size()) last_y = std::move(loss.y);
    }
    // NPMI masses use the top-v words of beta so runs with and without the
    // regularizer are comparable; pair counts use the last relaxed sample.
    const std::size_t v = std::min(cfg.reg.v, V);
    rec.diag = diagnose(topic_word(st.params, cfg.tau_beta), npmi_train, v);
    rec.diag.effective = last_y.size() ? effective_pair_counts(last_y) : hard_pair_counts(K, v);
    rec.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    st.log.records.push_back(rec);
    st.epochs_done = epoch;
    if (opt.on_epoch) opt.on_epoch(rec);
    const bool scheduled = cfg.checkpoint_every > 0 && epoch % cfg.checkpoint_every == 0;
    if (!opt.checkpoint_path.empty() && (scheduled || epoch == last_epoch))
      save_checkpoint(opt.checkpoint_path, cfg, vocab_hash, st);
  }
  return {std::move(st.params), std::move(st.log), std::move(st.prior)};
}

// ---------------------------------------------------------------------------
// Topic export

struct RankedWord {
  WordId id = 0;
  std::string word;
  double prob = 0.0;
};

struct TopicWords {
  std::size_t topic = 0;
  std::vector<RankedWord> words;
};

/// Top-n words of every beta row, ties broken by lower word index.
template <class Derived>
std::vector<TopicWords> export_topics(const Eigen::MatrixBase<Derived>& beta, const Vocabulary& vocab, std::size_t top_n) {
  const auto V = static_cast<std::size_t>(beta.cols());
  if (top_n > V) throw ValidationError("top_n=" + std::to_string(top_n) + " exceeds vocabulary size " + std::to_string(V));
  if (vocab.size() != V) throw ArtifactMismatch("beta has " + std::to_string(V) + " columns, vocabulary has " + std::to_string(vocab.size()));
  std::vector<TopicWords> out;
  for (Eigen::Index k = 0; k < beta.rows(); ++k) {
    TopicWords t;
    t.topic = static_cast<std::size_t>(k);
    for (auto w : top_indices(beta.row(k), top_n))
      t.words.push_back({static_cast<WordId>(w), vocab.words[w], static_cast<double>(beta(k, static_cast<Eigen::Index>(w)))});
    out.push_back(std::move(t));
  }
  return out;
}

template <class T>
std::vector<TopicWords> export_topics(ModelParams<T>& params, const Vocabulary& vocab, std::size_t top_n, double tau_beta) {
  return export_topics(topic_word(params, tau_beta), vocab, top_n);
}

/// "topic<TAB>rank<TAB>word<TAB>prob" lines.
inline void write_topics_tsv(std::ostream& out, const std::vector<TopicWords>& topics) {
  out << "topic\trank\tword\tprob\n";
  for (auto& t : topics)
    for (std::size_t r = 0; r < t.words.size(); ++r)
      out << t.topic << "\t" << r + 1 << "\t" << t.words[r].word << "\t" << detail::format_double(t.words[r].prob) << "\n";
}

}  // namespace contratopic
