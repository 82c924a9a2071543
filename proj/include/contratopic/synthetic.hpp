#pragma once

// Planted-topic toy corpora for tests, the CLI `synth` command and desk-scale
// experiments. Each planted topic owns a contiguous block of the vocabulary;
// documents draw a dominant topic (their label), an optional second topic,
// and a few background words shared by all topics.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "contratopic/corpus.hpp"
#include "contratopic/rng.hpp"

namespace contratopic {

struct SyntheticConfig {
  std::size_t docs = 50;
  std::size_t vocab = 30;
  std::size_t topics = 4;
  std::size_t min_length = 20;
  std::size_t max_length = 40;
  /// Share of tokens from the document's dominant topic.
  double dominant_share = 0.7;
  /// Share of tokens drawn uniformly from the whole vocabulary.
  double background_share = 0.1;
  double train_fraction = 0.6;
  std::uint64_t seed = 0;

  void validate() const {
    if (topics == 0 || vocab < topics || docs < 2) throw ValidationError("synthetic corpus needs docs >= 2 and vocab >= topics >= 1");
    if (min_length < 2 || max_length < min_length) throw ValidationError("synthetic lengths need 2 <= min_length <= max_length");
    if (!(dominant_share >= 0 && background_share >= 0 && dominant_share + background_share <= 1))
      throw ValidationError("synthetic shares must be non-negative and sum to at most 1");
    if (!(train_fraction > 0 && train_fraction < 1)) throw ValidationError("train_fraction must be in (0, 1)");
  }
};

/// Vocabulary block [begin, end) owned by planted topic k.
inline std::pair<std::size_t, std::size_t> planted_block(const SyntheticConfig& c, std::size_t k) {
  return {k * c.vocab / c.topics, (k + 1) * c.vocab / c.topics};
}

inline BowCorpus make_synthetic_corpus(const SyntheticConfig& c) {
  c.validate();
  auto rng = make_rng(c.seed, Stream::synthetic);
  std::vector<std::string> words(c.vocab);
  for (std::size_t k = 0; k < c.topics; ++k)
    for (auto [w, e] = planted_block(c, k); w < e; ++w) words[w] = "t" + std::to_string(k) + "w" + std::to_string(w);
  std::vector<std::vector<std::uint32_t>> counts(c.docs, std::vector<std::uint32_t>(c.vocab, 0));
  std::vector<std::string> labels(c.docs);
  auto draw_from = [&](std::size_t k) {
    auto [b, e] = planted_block(c, k);
    return b + uniform_index(rng, e - b);
  };
  for (std::size_t d = 0; d < c.docs; ++d) {
    const std::size_t main = uniform_index(rng, c.topics);
    const std::size_t other = c.topics > 1 ? (main + 1 + uniform_index(rng, c.topics - 1)) % c.topics : main;
    const std::size_t len = c.min_length + uniform_index(rng, c.max_length - c.min_length + 1);
    labels[d] = "topic" + std::to_string(main);
    for (std::size_t i = 0; i < len; ++i) {
      const double u = uniform01(rng);
      std::size_t w;
      if (u < c.background_share) {
        w = uniform_index(rng, c.vocab);
      } else if (u < c.background_share + c.dominant_share) {
        w = draw_from(main);
      } else {
        w = draw_from(other);
      }
      ++counts[d][w];
    }
  }
  BowCorpus corpus;
  corpus.config.min_df_docs = 1;
  corpus.config.max_df_fraction = 1.0;
  corpus.config.train_fraction = c.train_fraction;
  corpus.config.split_seed = c.seed;
  corpus.vocabulary.words = words;
  corpus.vocabulary.doc_freq.assign(c.vocab, 0);
  corpus.vocabulary.corpus_doc_count = c.docs;
  std::vector<std::size_t> order(c.docs);
  for (std::size_t i = 0; i < c.docs; ++i) order[i] = i;
  auto split_rng = make_rng(c.seed, Stream::split);
  shuffle(order, split_rng);
  const auto n_train = static_cast<std::size_t>(std::llround(c.train_fraction * static_cast<double>(c.docs)));
  std::vector<bool> is_train(c.docs, false);
  for (std::size_t i = 0; i < n_train; ++i) is_train[order[i]] = true;
  for (std::size_t d = 0; d < c.docs; ++d) {
    BowDocument doc;
    doc.id = "doc" + std::to_string(d);
    for (std::size_t w = 0; w < c.vocab; ++w)
      if (counts[d][w] > 0) {
        doc.counts.emplace_back(static_cast<WordId>(w), counts[d][w]);
        doc.total_tokens += counts[d][w];
        ++corpus.vocabulary.doc_freq[w];
      }
    if (is_train[d]) {
      corpus.train_docs.push_back(std::move(doc));
      corpus.train_labels.push_back(labels[d]);
    } else {
      corpus.test_docs.push_back(std::move(doc));
      corpus.test_labels.push_back(labels[d]);
    }
  }
  return corpus;
}

}  // namespace contratopic
