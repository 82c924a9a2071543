#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "contratopic/cooc.hpp"

namespace ct = contratopic;

namespace {

ct::BowDocument doc(std::string id, std::vector<ct::WordId> words) {
  ct::BowDocument d;
  d.id = std::move(id);
  std::sort(words.begin(), words.end());
  for (auto w : words) {
    if (!d.counts.empty() && d.counts.back().first == w) {
      ++d.counts.back().second;
    } else {
      d.counts.emplace_back(w, 1);
    }
    ++d.total_tokens;
  }
  return d;
}

ct::Vocabulary vocab(std::size_t V) {
  ct::Vocabulary v;
  for (std::size_t i = 0; i < V; ++i) {
    v.words.push_back("w" + std::to_string(i));
    v.doc_freq.push_back(1);
  }
  return v;
}

// D = 4, df(a) = 3, df(b) = 3, df(a, b) = 2.
std::vector<ct::BowDocument> example_docs() {
  return {doc("1", {0, 1}), doc("2", {0, 1, 1}), doc("3", {0, 2}), doc("4", {1, 2})};
}

/// O(D * V^2) recount straight from the definition.
double brute_force_npmi(const std::vector<ct::BowDocument>& docs, std::size_t i, std::size_t j) {
  if (i == j) return 1.0;
  auto has = [](const ct::BowDocument& d, std::size_t w) {
    for (auto [x, n] : d.counts)
      if (x == w && n > 0) return true;
    return false;
  };
  double D = static_cast<double>(docs.size()), ni = 0, nj = 0, nij = 0;
  for (auto& d : docs) {
    bool a = has(d, i), b = has(d, j);
    ni += a;
    nj += b;
    nij += a && b;
  }
  if (nij == 0) return -1.0;
  if (nij == D) return 1.0;
  double pij = nij / D;
  return std::log(pij / ((ni / D) * (nj / D))) / -std::log(pij);
}

std::vector<ct::BowDocument> random_docs(std::mt19937_64& rng, std::size_t D, std::size_t V) {
  std::vector<ct::BowDocument> docs;
  for (std::size_t d = 0; d < D; ++d) {
    std::vector<ct::WordId> words;
    const std::size_t len = 1 + rng() % 10;
    for (std::size_t k = 0; k < len; ++k) words.push_back(static_cast<ct::WordId>(rng() % V));
    docs.push_back(doc(std::to_string(d), words));
  }
  return docs;
}

}  // namespace

TEST(BuildNpmi, WordOnlyWithItselfHasUnitDiagonal) {
  std::vector<ct::BowDocument> docs{doc("1", {0, 0}), doc("2", {1})};
  auto m = ct::build_npmi(docs, vocab(2));
  EXPECT_EQ(m(0, 0), 1.0);
  EXPECT_EQ(m(0, 1), -1.0);
}

TEST(BuildNpmi, IndependentPairScoresZero) {
  // P(a) = P(b) = 1/2, P(a, b) = 1/4.
  std::vector<ct::BowDocument> docs{doc("1", {0, 1}), doc("2", {0}), doc("3", {1}), doc("4", {2})};
  auto m = ct::build_npmi(docs, vocab(3));
  EXPECT_NEAR(m(0, 1), 0.0, 1e-15);
}

TEST(BuildNpmi, HandCountedExample) {
  auto m = ct::build_npmi(example_docs(), vocab(3));
  const double expected = std::log(0.5 / 0.5625) / -std::log(0.5);
  EXPECT_NEAR(m(0, 1), expected, 1e-15);
  EXPECT_NEAR(m(0, 1), -0.170, 5e-4);
  EXPECT_EQ(m.doc_count(), 4u);
}

TEST(BuildNpmi, UnsupportedVocabularyWordIsFatal) {
  std::vector<ct::BowDocument> docs{doc("1", {0, 1})};
  EXPECT_THROW(ct::build_npmi(docs, vocab(3)), ct::ValidationError);
  EXPECT_NO_THROW(ct::build_npmi(docs, vocab(3), ct::NpmiSource::test, false));
}

TEST(NpmiLookup, SymmetricDefaultAndBounds) {
  auto m = ct::build_npmi(example_docs(), vocab(4), ct::NpmiSource::train, false);
  EXPECT_EQ(m(0, 1), m(1, 0));
  EXPECT_EQ(m(0, 3), -1.0);
  EXPECT_EQ(m(3, 0), -1.0);
  EXPECT_THROW(m(4, 0), ct::ValidationError);
}

TEST(DenseExpView, DefaultDiagonalAndStoredEntries) {
  auto m = ct::build_npmi(example_docs(), vocab(4), ct::NpmiSource::train, false);
  for (auto storage : {ct::SimilarityStorage::dense, ct::SimilarityStorage::sparse}) {
    auto e = ct::dense_exp_view<double>(m, {storage, std::size_t{1} << 20});
    EXPECT_NEAR(e(0, 3), std::exp(-1.0), 1e-15);
    EXPECT_NEAR(e(0, 3), 0.3679, 1e-4);
    EXPECT_NEAR(e(2, 2), std::exp(1.0), 1e-15);
    EXPECT_NEAR(e(1, 0), std::exp(m(0, 1)), 1e-15);
    EXPECT_NEAR(e(1, 0), 0.8437, 1e-4);
    EXPECT_NEAR(e.diagonal()(3), std::exp(1.0), 1e-15);
  }
}

TEST(DenseExpView, SparseAndDenseProductsAgree) {
  std::mt19937_64 rng(4);
  auto docs = random_docs(rng, 40, 25);
  auto m = ct::build_npmi(docs, vocab(25), ct::NpmiSource::train, false);
  auto dense = ct::dense_exp_view<double>(m, {ct::SimilarityStorage::dense});
  auto sparse = ct::dense_exp_view<double>(m, {ct::SimilarityStorage::sparse});
  EXPECT_TRUE(dense.is_dense());
  EXPECT_FALSE(sparse.is_dense());
  Eigen::MatrixXd y = Eigen::MatrixXd::Random(3, 25);
  EXPECT_LT((dense.right_multiply(y) - sparse.right_multiply(y)).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(DenseExpView, BudgetExceededWithoutSparseIsFatal) {
  auto m = ct::build_npmi(example_docs(), vocab(3));
  try {
    ct::dense_exp_view<double>(m, {ct::SimilarityStorage::dense, 8});
    FAIL();
  } catch (const ct::ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("72 bytes"), std::string::npos) << e.what();
  }
  auto fallback = ct::dense_exp_view<double>(m, {ct::SimilarityStorage::automatic, 8});
  EXPECT_FALSE(fallback.is_dense());
}

TEST(NpmiFormat, RoundTripAndOrderingValidation) {
  std::mt19937_64 rng(9);
  auto docs = random_docs(rng, 30, 12);
  auto m = ct::build_npmi(docs, vocab(12), ct::NpmiSource::train, false);
  std::stringstream ss;
  ct::write_npmi(ss, m);
  auto back = ct::read_npmi(ss, ct::NpmiSource::train);
  for (std::size_t i = 0; i < 12; ++i)
    for (std::size_t j = 0; j < 12; ++j) EXPECT_EQ(back(i, j), m(i, j));
  std::istringstream bad("NPMI v1 3 4 -1\n0 2 0.5\n0 1 0.1\n");
  EXPECT_THROW(ct::read_npmi(bad), ct::ValidationError);
  std::istringstream lower("NPMI v1 3 4 -1\n1 0 0.5\n");
  EXPECT_THROW(ct::read_npmi(lower), ct::ValidationError);
}

// Brute-force equivalence, symmetry, range and diagonal over random corpora.
TEST(NpmiProperties, MatchesBruteForceRecount) {
  std::mt19937_64 rng(2024);
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t D = 1 + rng() % 50, V = 1 + rng() % 30;
    auto docs = random_docs(rng, D, V);
    auto m = ct::build_npmi(docs, vocab(V), ct::NpmiSource::train, false);
    for (std::size_t i = 0; i < V; ++i) {
      EXPECT_EQ(m(i, i), 1.0);
      for (std::size_t j = 0; j < V; ++j) {
        EXPECT_NEAR(m(i, j), brute_force_npmi(docs, i, j), 1e-12);
        EXPECT_EQ(m(i, j), m(j, i));
        EXPECT_GE(m(i, j), -1.0);
        EXPECT_LE(m(i, j), 1.0);
      }
    }
  }
}

TEST(CooccurrenceCounts, ShardMergeAndThreadCountInvariance) {
  std::mt19937_64 rng(77);
  auto docs = random_docs(rng, 120, 40);
  auto full = ct::count_cooccurrence(docs, 40);
  std::span<const ct::BowDocument> all(docs);
  auto a = ct::count_cooccurrence(all.subspan(0, 50), 40);
  auto b = ct::count_cooccurrence(all.subspan(50, 30), 40);
  auto c = ct::count_cooccurrence(all.subspan(80), 40);
  EXPECT_EQ(ct::merge_counts(ct::merge_counts(a, b), c), full);
  EXPECT_EQ(ct::count_cooccurrence(docs, 40, 4), full);
  EXPECT_EQ(full.pair(3, 7), full.pair(7, 3));
}
