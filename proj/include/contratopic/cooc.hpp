#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <span>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "contratopic/corpus.hpp"
#include "contratopic/error.hpp"

namespace contratopic {

/// Boolean document-level occurrence counts: document frequency per word
/// and joint document frequency per unordered word pair (i < j), stored as
/// a compressed upper triangle.
struct CooccurrenceCounts {
  std::size_t vocab_size = 0;
  std::uint64_t doc_count = 0;
  std::vector<std::uint64_t> doc_freq;
  std::vector<std::size_t> row_ptr;  // size vocab_size + 1
  std::vector<WordId> cols;          // sorted within each row, all > row
  std::vector<std::uint64_t> joint;

  std::uint64_t pair(WordId i, WordId j) const {
    if (i == j) return doc_freq[i];
    if (i > j) std::swap(i, j);
    auto b = cols.begin() + static_cast<std::ptrdiff_t>(row_ptr[i]);
    auto e = cols.begin() + static_cast<std::ptrdiff_t>(row_ptr[i + 1]);
    auto it = std::lower_bound(b, e, j);
    return (it != e && *it == j) ? joint[static_cast<std::size_t>(it - cols.begin())] : 0;
  }

  bool operator==(const CooccurrenceCounts&) const = default;
};

namespace detail {

inline void count_rows(std::span<const BowDocument> docs, const std::vector<std::vector<std::uint32_t>>& postings,
                       std::size_t row_begin, std::size_t row_end, std::size_t V,
                       std::vector<std::vector<std::pair<WordId, std::uint64_t>>>& rows) {
  std::vector<std::uint64_t> scratch(V, 0);
  std::vector<WordId> touched;
  for (std::size_t i = row_begin; i < row_end; ++i) {
    touched.clear();
    for (auto d : postings[i]) {
      const auto& counts = docs[d].counts;
      auto it = std::upper_bound(counts.begin(), counts.end(), std::pair<WordId, std::uint32_t>(static_cast<WordId>(i), ~0u));
      for (; it != counts.end(); ++it) {
        if (scratch[it->first]++ == 0) touched.push_back(it->first);
      }
    }
    std::sort(touched.begin(), touched.end());
    auto& row = rows[i];
    row.reserve(touched.size());
    for (auto j : touched) {
      row.emplace_back(j, scratch[j]);
      scratch[j] = 0;
    }
  }
}

}  // namespace detail

/// Count document and pair frequencies. Rows are partitioned across
/// `threads` workers; the result does not depend on the thread count.
inline CooccurrenceCounts count_cooccurrence(std::span<const BowDocument> docs, std::size_t V,
                                             unsigned threads = 1) {
  CooccurrenceCounts c;
  c.vocab_size = V;
  c.doc_count = docs.size();
  c.doc_freq.assign(V, 0);
  std::vector<std::vector<std::uint32_t>> postings(V);
  for (std::size_t d = 0; d < docs.size(); ++d) {
    WordId prev = 0;
    bool first = true;
    for (auto [w, n] : docs[d].counts) {
      if (w >= V) throw ValidationError("document " + docs[d].id + " references word index " + std::to_string(w) +
                                        " outside vocabulary of size " + std::to_string(V));
      if (!first && w <= prev) throw ValidationError("document " + docs[d].id + " counts are not sorted by word index");
      first = false;
      prev = w;
      if (n == 0) continue;
      ++c.doc_freq[w];
      postings[w].push_back(static_cast<std::uint32_t>(d));
    }
  }
  std::vector<std::vector<std::pair<WordId, std::uint64_t>>> rows(V);
  threads = std::max(1u, threads);
  if (threads == 1 || V < 2 * threads) {
    detail::count_rows(docs, postings, 0, V, V, rows);
  } else {
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < threads; ++t) {
      std::size_t b = V * t / threads, e = V * (t + 1) / threads;
      pool.emplace_back([&, b, e] { detail::count_rows(docs, postings, b, e, V, rows); });
    }
    for (auto& th : pool) th.join();
  }
  c.row_ptr.assign(V + 1, 0);
  for (std::size_t i = 0; i < V; ++i) c.row_ptr[i + 1] = c.row_ptr[i] + rows[i].size();
  c.cols.reserve(c.row_ptr[V]);
  c.joint.reserve(c.row_ptr[V]);
  for (auto& row : rows)
    for (auto [j, n] : row) {
      c.cols.push_back(j);
      c.joint.push_back(n);
    }
  return c;
}

/// Merge counts from two disjoint document shards.
inline CooccurrenceCounts merge_counts(const CooccurrenceCounts& a, const CooccurrenceCounts& b) {
  if (a.vocab_size != b.vocab_size) throw ValidationError("cannot merge counts over different vocabularies");
  CooccurrenceCounts c;
  c.vocab_size = a.vocab_size;
  c.doc_count = a.doc_count + b.doc_count;
  c.doc_freq.resize(a.vocab_size);
  for (std::size_t i = 0; i < a.vocab_size; ++i) c.doc_freq[i] = a.doc_freq[i] + b.doc_freq[i];
  c.row_ptr.assign(a.vocab_size + 1, 0);
  for (std::size_t i = 0; i < a.vocab_size; ++i) {
    std::size_t p = a.row_ptr[i], pe = a.row_ptr[i + 1], q = b.row_ptr[i], qe = b.row_ptr[i + 1];
    while (p < pe || q < qe) {
      if (q == qe || (p < pe && a.cols[p] < b.cols[q])) {
        c.cols.push_back(a.cols[p]);
        c.joint.push_back(a.joint[p++]);
      } else if (p == pe || b.cols[q] < a.cols[p]) {
        c.cols.push_back(b.cols[q]);
        c.joint.push_back(b.joint[q++]);
      } else {
        c.cols.push_back(a.cols[p]);
        c.joint.push_back(a.joint[p++] + b.joint[q++]);
      }
    }
    c.row_ptr[i + 1] = c.cols.size();
  }
  return c;
}

enum class NpmiSource { train, test, unknown };

inline const char* to_string(NpmiSource s) {
  switch (s) {
    case NpmiSource::train: return "train";
    case NpmiSource::test: return "test";
    default: return "unknown";
  }
}

/// NPMI from joint and marginal document frequencies. Pairs occurring in
/// every document (P(w,w') = 1) score 1.
inline double npmi_score(std::uint64_t joint, std::uint64_t df_i, std::uint64_t df_j, std::uint64_t D,
                         double default_value = -1.0) {
  if (joint == 0) return default_value;
  const double n = static_cast<double>(D);
  const double pij = static_cast<double>(joint) / n;
  if (joint == D) return 1.0;
  const double pi = static_cast<double>(df_i) / n;
  const double pj = static_cast<double>(df_j) / n;
  double s = std::log(pij / (pi * pj)) / (-std::log(pij));
  return std::clamp(s, -1.0, 1.0);
}

/// Symmetric NPMI matrix stored as a compressed upper triangle over pairs
/// with positive joint document frequency. The diagonal is 1 and every
/// other pair takes `default_value`.
class NpmiMatrix {
 public:
  NpmiMatrix() = default;

  NpmiMatrix(std::size_t V, std::uint64_t D, double default_value, NpmiSource source,
             std::vector<std::size_t> row_ptr, std::vector<WordId> cols, std::vector<double> values)
      : size_(V), doc_count_(D), default_(default_value), source_(source),
        row_ptr_(std::move(row_ptr)), cols_(std::move(cols)), values_(std::move(values)) {
    if (row_ptr_.size() != V + 1 || cols_.size() != values_.size() || row_ptr_.back() != cols_.size())
      throw ValidationError("inconsistent NPMI matrix storage");
  }

  std::size_t size() const { return size_; }
  std::uint64_t doc_count() const { return doc_count_; }
  double default_value() const { return default_; }
  NpmiSource source() const { return source_; }
  std::size_t stored_pairs() const { return cols_.size(); }

  double operator()(std::size_t i, std::size_t j) const {
    if (i >= size_ || j >= size_)
      throw ValidationError("NPMI lookup (" + std::to_string(i) + ", " + std::to_string(j) +
                            ") outside matrix of size " + std::to_string(size_));
    if (i == j) return 1.0;
    if (i > j) std::swap(i, j);
    auto b = cols_.begin() + static_cast<std::ptrdiff_t>(row_ptr_[i]);
    auto e = cols_.begin() + static_cast<std::ptrdiff_t>(row_ptr_[i + 1]);
    auto it = std::lower_bound(b, e, static_cast<WordId>(j));
    if (it != e && *it == j) return values_[static_cast<std::size_t>(it - cols_.begin())];
    return default_;
  }

  /// Visit every stored pair (i < j) in row-major order.
  template <class F>
  void for_each_stored(F&& f) const {
    for (std::size_t i = 0; i < size_; ++i)
      for (std::size_t p = row_ptr_[i]; p < row_ptr_[i + 1]; ++p) f(i, static_cast<std::size_t>(cols_[p]), values_[p]);
  }

 private:
  std::size_t size_ = 0;
  std::uint64_t doc_count_ = 0;
  double default_ = -1.0;
  NpmiSource source_ = NpmiSource::unknown;
  std::vector<std::size_t> row_ptr_;
  std::vector<WordId> cols_;
  std::vector<double> values_;
};

inline NpmiMatrix npmi_from_counts(const CooccurrenceCounts& c, NpmiSource source, double default_value = -1.0) {
  std::vector<double> values(c.joint.size());
  for (std::size_t i = 0; i < c.vocab_size; ++i)
    for (std::size_t p = c.row_ptr[i]; p < c.row_ptr[i + 1]; ++p)
      values[p] = npmi_score(c.joint[p], c.doc_freq[i], c.doc_freq[c.cols[p]], c.doc_count, default_value);
  return NpmiMatrix(c.vocab_size, c.doc_count, default_value, source, c.row_ptr, c.cols, std::move(values));
}

/// Build the NPMI matrix over `docs`. With `require_support`, every
/// vocabulary word must occur in at least one document.
inline NpmiMatrix build_npmi(std::span<const BowDocument> docs, const Vocabulary& vocab,
                             NpmiSource source = NpmiSource::train, bool require_support = true,
                             unsigned threads = 1) {
  if (docs.empty()) throw ValidationError("cannot build NPMI from an empty document list");
  auto counts = count_cooccurrence(docs, vocab.size(), threads);
  if (require_support) {
    for (std::size_t w = 0; w < vocab.size(); ++w)
      if (counts.doc_freq[w] == 0)
        throw ValidationError("vocabulary/corpus mismatch: word '" + vocab.words[w] +
                              "' has document frequency 0 in the NPMI corpus");
  }
  return npmi_from_counts(counts, source);
}

// ---------------------------------------------------------------------------
// On-disk format: "NPMI v1 <V> <D> <default>" then "i j score" for i < j,
// sorted by (i, j).

inline void write_npmi(std::ostream& out, const NpmiMatrix& m) {
  out << "NPMI v1 " << m.size() << " " << m.doc_count() << " " << detail::format_double(m.default_value()) << "\n";
  m.for_each_stored([&](std::size_t i, std::size_t j, double s) { out << i << " " << j << " " << detail::format_double(s) << "\n"; });
}

inline void save_npmi(const std::string& path, const NpmiMatrix& m) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write NPMI matrix: " + path);
  write_npmi(out, m);
  if (!out) throw ValidationError("failed writing NPMI matrix: " + path);
}

inline NpmiMatrix read_npmi(std::istream& in, NpmiSource source = NpmiSource::unknown, const std::string& name = "<stream>") {
  std::string line;
  std::size_t lineno = 1;
  if (!std::getline(in, line)) throw ValidationError(name + ": empty NPMI file");
  std::istringstream hs(line);
  std::string magic, version;
  std::size_t V = 0;
  std::uint64_t D = 0;
  double def = -1.0;
  if (!(hs >> magic >> version >> V >> D >> def) || magic != "NPMI" || version != "v1")
    throw ValidationError(name + ":1: expected header 'NPMI v1 <V> <D> <default>'");
  std::vector<std::size_t> row_ptr(V + 1, 0);
  std::vector<WordId> cols;
  std::vector<double> vals;
  long long pi = -1, pj = -1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ls(line);
    long long i = 0, j = 0;
    double s = 0;
    if (!(ls >> i >> j >> s)) throw ValidationError(name + ":" + std::to_string(lineno) + ": malformed triple");
    if (i < 0 || j <= i || static_cast<std::size_t>(j) >= V)
      throw ValidationError(name + ":" + std::to_string(lineno) + ": triple must satisfy 0 <= i < j < V");
    if (i < pi || (i == pi && j <= pj))
      throw ValidationError(name + ":" + std::to_string(lineno) + ": triples are not in increasing (i, j) order");
    if (!(s >= -1.0 && s <= 1.0)) throw ValidationError(name + ":" + std::to_string(lineno) + ": score outside [-1, 1]");
    pi = i;
    pj = j;
    ++row_ptr[static_cast<std::size_t>(i) + 1];
    cols.push_back(static_cast<WordId>(j));
    vals.push_back(s);
  }
  for (std::size_t i = 0; i < V; ++i) row_ptr[i + 1] += row_ptr[i];
  return NpmiMatrix(V, D, def, source, std::move(row_ptr), std::move(cols), std::move(vals));
}

inline NpmiMatrix load_npmi(const std::string& path, NpmiSource source = NpmiSource::unknown) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open NPMI matrix: " + path);
  return read_npmi(in, source, path);
}

// ---------------------------------------------------------------------------
// exp(similarity) view used by the contrastive regularizer.

enum class SimilarityStorage { automatic, dense, sparse };

struct SimilarityOptions {
  SimilarityStorage storage = SimilarityStorage::automatic;
  /// Dense storage is used only when V*V*sizeof(T) fits this budget.
  std::size_t dense_budget_bytes = std::size_t{1} << 30;
};

/// E[i][j] = exp(K(i, j)), held either densely or as a constant base value
/// plus sparse corrections.
template <class T>
class DenseSimilarity {
 public:
  using Matrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>;
  using Vector = Eigen::Matrix<T, Eigen::Dynamic, 1>;

  static DenseSimilarity from_dense(Matrix e) {
    if (e.rows() != e.cols()) throw ShapeError("similarity matrix must be square");
    DenseSimilarity s;
    s.size_ = static_cast<std::size_t>(e.rows());
    s.diag_ = e.diagonal();
    s.dense_ = std::move(e);
    s.is_dense_ = true;
    return s;
  }

  static DenseSimilarity from_sparse(std::size_t V, T base, Eigen::SparseMatrix<T> upper_corrections) {
    DenseSimilarity s;
    s.size_ = V;
    s.base_ = base;
    s.corr_ = std::move(upper_corrections);
    s.diag_ = Vector::Constant(static_cast<Eigen::Index>(V), base);
    for (int k = 0; k < s.corr_.outerSize(); ++k)
      for (typename Eigen::SparseMatrix<T>::InnerIterator it(s.corr_, k); it; ++it)
        if (it.row() == it.col()) s.diag_(it.row()) += it.value();
    s.is_dense_ = false;
    return s;
  }

  std::size_t size() const { return size_; }
  bool is_dense() const { return is_dense_; }
  const Vector& diagonal() const { return diag_; }

  T operator()(std::size_t i, std::size_t j) const {
    if (is_dense_) return dense_(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
    auto a = static_cast<Eigen::Index>(std::min(i, j)), b = static_cast<Eigen::Index>(std::max(i, j));
    return base_ + corr_.coeff(a, b);
  }

  /// Y * E for Y with V columns.
  Matrix right_multiply(const Matrix& y) const {
    if (static_cast<std::size_t>(y.cols()) != size_)
      throw ShapeError("similarity product: expected " + std::to_string(size_) + " columns, got " + std::to_string(y.cols()));
    if (is_dense_) return y * dense_;
    Matrix out = (corr_.template selfadjointView<Eigen::Upper>() * y.transpose()).transpose();
    out.colwise() += base_ * y.rowwise().sum();
    return out;
  }

 private:
  std::size_t size_ = 0;
  bool is_dense_ = true;
  Matrix dense_;
  T base_ = 0;
  Eigen::SparseMatrix<T> corr_;
  Vector diag_;
};

template <class T>
DenseSimilarity<T> dense_exp_view(const NpmiMatrix& m, const SimilarityOptions& opt = {}) {
  const std::size_t V = m.size();
  const std::size_t dense_bytes = V * V * sizeof(T);
  bool dense = false;
  switch (opt.storage) {
    case SimilarityStorage::dense:
      if (dense_bytes > opt.dense_budget_bytes)
        throw ValidationError("dense similarity needs " + std::to_string(dense_bytes) + " bytes, budget is " +
                              std::to_string(opt.dense_budget_bytes) + " bytes and sparse storage is disabled");
      dense = true;
      break;
    case SimilarityStorage::sparse: dense = false; break;
    case SimilarityStorage::automatic: dense = dense_bytes <= opt.dense_budget_bytes; break;
  }
  const T base = static_cast<T>(std::exp(m.default_value()));
  if (dense) {
    typename DenseSimilarity<T>::Matrix e =
        DenseSimilarity<T>::Matrix::Constant(static_cast<Eigen::Index>(V), static_cast<Eigen::Index>(V), base);
    for (std::size_t i = 0; i < V; ++i) e(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)) = static_cast<T>(std::exp(1.0));
    m.for_each_stored([&](std::size_t i, std::size_t j, double s) {
      auto v = static_cast<T>(std::exp(s));
      e(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = v;
      e(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = v;
    });
    return DenseSimilarity<T>::from_dense(std::move(e));
  }
  std::vector<Eigen::Triplet<T>> trip;
  trip.reserve(m.stored_pairs() + V);
  const T dcorr = static_cast<T>(std::exp(1.0)) - base;
  for (std::size_t i = 0; i < V; ++i) trip.emplace_back(static_cast<int>(i), static_cast<int>(i), dcorr);
  m.for_each_stored([&](std::size_t i, std::size_t j, double s) {
    trip.emplace_back(static_cast<int>(i), static_cast<int>(j), static_cast<T>(std::exp(s)) - base);
  });
  Eigen::SparseMatrix<T> corr(static_cast<Eigen::Index>(V), static_cast<Eigen::Index>(V));
  corr.setFromTriplets(trip.begin(), trip.end());
  return DenseSimilarity<T>::from_sparse(V, base, std::move(corr));
}

/// exp of word-embedding dot products (the embedding_dot similarity).
template <class T>
DenseSimilarity<T> embedding_similarity(const Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>& rho) {
  Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic> e = (rho * rho.transpose()).array().exp().matrix();
  if (!e.allFinite()) throw NumericalError("embedding similarity overflows: exp of a word-embedding dot product is not finite");
  return DenseSimilarity<T>::from_dense(std::move(e));
}

}  // namespace contratopic
