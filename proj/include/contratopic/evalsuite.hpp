#pragma once

// Evaluation: topic coherence and diversity curves over coherence-sorted
// topic selections, k-means clustering of test document-topic vectors
// (purity, NMI), and the word-intrusion questionnaire with its scorer.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "contratopic/contrareg.hpp"
#include "contratopic/cooc.hpp"
#include "contratopic/corpus.hpp"
#include "contratopic/error.hpp"
#include "contratopic/ntm.hpp"
#include "contratopic/rng.hpp"

namespace contratopic {

enum class NmiNormalization { arithmetic, geometric, max, min };

inline const char* to_string(NmiNormalization n) {
  switch (n) {
    case NmiNormalization::arithmetic: return "arithmetic";
    case NmiNormalization::geometric: return "geometric";
    case NmiNormalization::max: return "max";
    case NmiNormalization::min: return "min";
  }
  return "?";
}

inline NmiNormalization parse_nmi_normalization(const std::string& s) {
  if (s == "arithmetic") return NmiNormalization::arithmetic;
  if (s == "geometric") return NmiNormalization::geometric;
  if (s == "max") return NmiNormalization::max;
  if (s == "min") return NmiNormalization::min;
  throw ValidationError("unknown NMI normalization '" + s + "' (arithmetic, geometric, max, min)");
}

struct KMeansConfig {
  std::size_t restarts = 10;
  std::size_t max_iter = 300;
  /// Convergence when the summed squared centre shift drops to tol or below.
  double tol = 1e-6;
  std::uint64_t seed = 0;
};

struct IntrusionConfig {
  std::size_t topics_per_decile = 3;
  /// Words shown from the topic itself.
  std::size_t shown_words = 5;
  /// Intruders come from the top `other_top` words of unselected topics...
  std::size_t other_top = 10;
  /// ...and must not be among the topic's own top `own_exclusion` words.
  std::size_t own_exclusion = 50;
};

struct EvalConfig {
  std::size_t k_tc = 10;
  std::size_t k_td = 25;
  std::vector<double> percentages = {10, 20, 30, 40, 50, 60, 70, 80, 90, 100};
  std::vector<std::size_t> cluster_counts = {20, 40, 60, 80, 100};
  KMeansConfig kmeans;
  NmiNormalization nmi = NmiNormalization::arithmetic;
  IntrusionConfig intrusion;

  void validate() const {
    if (k_tc < 2) throw ValidationError("k_tc must be at least 2");
    if (k_td < 1) throw ValidationError("k_td must be at least 1");
    if (percentages.empty()) throw ValidationError("at least one percentage is required");
    for (double p : percentages)
      if (!(p > 0 && p <= 100)) throw ValidationError("percentage " + detail::format_double(p) + " outside (0, 100]");
    for (auto c : cluster_counts)
      if (c == 0) throw ValidationError("cluster counts must be positive");
    if (kmeans.restarts == 0 || kmeans.max_iter == 0) throw ValidationError("kmeans restarts and max_iter must be positive");
    if (!(kmeans.tol >= 0)) throw ValidationError("kmeans tol must be non-negative");
  }
};

/// Number of topics selected at p percent: ceil(p% * K), at least one.
inline std::size_t selected_count(double percentage, std::size_t K) {
  const double raw = percentage * static_cast<double>(K) / 100.0;
  // Guard against 0.1 * 30 style rounding pushing an exact value up.
  auto n = static_cast<std::size_t>(std::ceil(raw - 1e-9));
  return std::clamp<std::size_t>(n, 1, K);
}

struct CurvePoint {
  double percentage = 0;
  std::size_t topics = 0;
  double value = 0;
};

struct CoherenceResult {
  std::vector<double> per_topic;
  /// Topic ids sorted by descending coherence (ties to the lower id).
  std::vector<std::size_t> order;
  std::vector<CurvePoint> curve;
};

inline std::vector<std::vector<std::size_t>> top_words(const Eigen::MatrixXd& beta, std::size_t n) {
  std::vector<std::vector<std::size_t>> out;
  out.reserve(static_cast<std::size_t>(beta.rows()));
  for (Eigen::Index k = 0; k < beta.rows(); ++k) out.push_back(top_indices(beta.row(k), n));
  return out;
}

/// Mean NPMI over all unordered pairs of the given words.
inline double mean_pair_npmi(const std::vector<std::size_t>& words, const NpmiMatrix& npmi) {
  double s = 0;
  std::size_t n = 0;
  for (std::size_t a = 0; a < words.size(); ++a)
    for (std::size_t b = a + 1; b < words.size(); ++b, ++n) s += npmi(words[a], words[b]);
  return n ? s / static_cast<double>(n) : 0.0;
}

inline std::vector<std::size_t> sort_by_score(const std::vector<double>& scores) {
  std::vector<std::size_t> order(scores.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  return order;
}

inline CoherenceResult topic_coherence(const Eigen::MatrixXd& beta, const NpmiMatrix& npmi_test, const EvalConfig& cfg) {
  cfg.validate();
  const auto V = static_cast<std::size_t>(beta.cols());
  const auto K = static_cast<std::size_t>(beta.rows());
  if (K == 0) throw ValidationError("topic coherence needs at least one topic");
  if (cfg.k_tc > V) throw ValidationError("k_tc=" + std::to_string(cfg.k_tc) + " exceeds vocabulary size " + std::to_string(V));
  if (npmi_test.size() != V)
    throw ArtifactMismatch("NPMI matrix covers " + std::to_string(npmi_test.size()) + " words, beta has " + std::to_string(V));
  if (npmi_test.source() == NpmiSource::train)
    throw ArtifactMismatch("topic coherence must be computed on NPMI from test documents, got a train-split matrix");
  CoherenceResult r;
  for (const auto& words : top_words(beta, cfg.k_tc)) r.per_topic.push_back(mean_pair_npmi(words, npmi_test));
  r.order = sort_by_score(r.per_topic);
  for (double p : cfg.percentages) {
    const std::size_t n = selected_count(p, K);
    double s = 0;
    for (std::size_t i = 0; i < n; ++i) s += r.per_topic[r.order[i]];
    r.curve.push_back({p, n, s / static_cast<double>(n)});
  }
  return r;
}

/// Unique fraction of the union of the selected topics' top-k_td words.
inline double topic_diversity(const Eigen::MatrixXd& beta, std::span<const std::size_t> selected, std::size_t k_td) {
  if (selected.empty()) throw ValidationError("topic diversity needs a nonempty topic selection");
  std::set<std::size_t> unique;
  for (auto k : selected) {
    if (k >= static_cast<std::size_t>(beta.rows())) throw ValidationError("topic " + std::to_string(k) + " out of range");
    for (auto w : top_indices(beta.row(static_cast<Eigen::Index>(k)), k_td)) unique.insert(w);
  }
  const std::size_t per = std::min<std::size_t>(k_td, static_cast<std::size_t>(beta.cols()));
  return static_cast<double>(unique.size()) / static_cast<double>(per * selected.size());
}

inline std::vector<CurvePoint> diversity_curve(const Eigen::MatrixXd& beta, const CoherenceResult& coh, const EvalConfig& cfg) {
  std::vector<CurvePoint> out;
  for (const auto& pt : coh.curve) {
    std::span<const std::size_t> sel(coh.order.data(), pt.topics);
    out.push_back({pt.percentage, pt.topics, topic_diversity(beta, sel, cfg.k_td)});
  }
  return out;
}

// ---------------------------------------------------------------- k-means

struct KMeansResult {
  std::vector<std::size_t> assignment;
  Eigen::MatrixXd centers;
  double inertia = std::numeric_limits<double>::infinity();
  std::size_t iterations = 0;
  std::size_t restart = 0;
};

namespace detail {

inline std::size_t nearest_center(const Eigen::MatrixXd& x, Eigen::Index i, const Eigen::MatrixXd& centers, double& dist) {
  std::size_t best = 0;
  dist = std::numeric_limits<double>::infinity();
  for (Eigen::Index c = 0; c < centers.rows(); ++c) {
    const double d = (x.row(i) - centers.row(c)).squaredNorm();
    if (d < dist) {
      dist = d;
      best = static_cast<std::size_t>(c);
    }
  }
  return best;
}

inline Eigen::MatrixXd kmeans_pp_init(const Eigen::MatrixXd& x, std::size_t k, Rng& rng) {
  const Eigen::Index n = x.rows();
  Eigen::MatrixXd centers(static_cast<Eigen::Index>(k), x.cols());
  centers.row(0) = x.row(static_cast<Eigen::Index>(uniform_index(rng, static_cast<std::size_t>(n))));
  Eigen::VectorXd d2(n);
  for (Eigen::Index i = 0; i < n; ++i) d2(i) = (x.row(i) - centers.row(0)).squaredNorm();
  for (std::size_t c = 1; c < k; ++c) {
    const double total = d2.sum();
    Eigen::Index pick = 0;
    if (total > 0) {
      const double u = uniform01(rng) * total;
      double acc = 0;
      pick = n - 1;
      for (Eigen::Index i = 0; i < n; ++i) {
        acc += d2(i);
        if (u < acc && d2(i) > 0) {
          pick = i;
          break;
        }
      }
    } else {
      pick = static_cast<Eigen::Index>(uniform_index(rng, static_cast<std::size_t>(n)));
    }
    centers.row(static_cast<Eigen::Index>(c)) = x.row(pick);
    for (Eigen::Index i = 0; i < n; ++i) d2(i) = std::min(d2(i), (x.row(i) - x.row(pick)).squaredNorm());
  }
  return centers;
}

}  // namespace detail

/// One Lloyd run from a k-means++ start. Empty clusters take the point
/// farthest from its current centre.
inline KMeansResult kmeans_single(const Eigen::MatrixXd& x, std::size_t k, const KMeansConfig& cfg, Rng& rng) {
  const Eigen::Index n = x.rows();
  if (k == 0) throw ValidationError("cluster count must be positive");
  if (k > static_cast<std::size_t>(n))
    throw ValidationError("cluster count " + std::to_string(k) + " exceeds the number of documents " + std::to_string(n));
  KMeansResult r;
  r.centers = detail::kmeans_pp_init(x, k, rng);
  r.assignment.assign(static_cast<std::size_t>(n), 0);
  std::vector<double> dist(static_cast<std::size_t>(n));
  for (std::size_t it = 0; it < cfg.max_iter; ++it) {
    for (Eigen::Index i = 0; i < n; ++i) r.assignment[i] = detail::nearest_center(x, i, r.centers, dist[i]);
    Eigen::MatrixXd next = Eigen::MatrixXd::Zero(r.centers.rows(), x.cols());
    std::vector<std::size_t> sizes(k, 0);
    for (Eigen::Index i = 0; i < n; ++i) {
      next.row(static_cast<Eigen::Index>(r.assignment[i])) += x.row(i);
      ++sizes[r.assignment[i]];
    }
    for (std::size_t c = 0; c < k; ++c) {
      if (sizes[c] > 0) {
        next.row(static_cast<Eigen::Index>(c)) /= static_cast<double>(sizes[c]);
        continue;
      }
      const auto far = static_cast<std::size_t>(std::max_element(dist.begin(), dist.end()) - dist.begin());
      next.row(static_cast<Eigen::Index>(c)) = x.row(static_cast<Eigen::Index>(far));
      dist[far] = 0;
    }
    const double shift = (next - r.centers).squaredNorm();
    r.centers = std::move(next);
    r.iterations = it + 1;
    if (shift <= cfg.tol) break;
  }
  r.inertia = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    double d;
    r.assignment[i] = detail::nearest_center(x, i, r.centers, d);
    r.inertia += d;
  }
  return r;
}

/// Rng for restart `r` of a k-cluster run.
inline Rng kmeans_rng(const KMeansConfig& cfg, std::size_t k, std::size_t r) {
  return make_rng(cfg.seed, Stream::kmeans, {k, r});
}

/// Best-inertia result over cfg.restarts runs (ties to the earliest restart).
inline KMeansResult kmeans(const Eigen::MatrixXd& x, std::size_t k, const KMeansConfig& cfg) {
  KMeansResult best;
  for (std::size_t r = 0; r < cfg.restarts; ++r) {
    auto rng = kmeans_rng(cfg, k, r);
    auto run = kmeans_single(x, k, cfg, rng);
    run.restart = r;
    if (run.inertia < best.inertia) best = std::move(run);
  }
  return best;
}

// ------------------------------------------------------- purity and NMI

namespace detail {

struct Contingency {
  std::vector<std::vector<std::size_t>> table;  // cluster x label
  std::vector<std::size_t> cluster_sizes, label_sizes;
  std::size_t n = 0;
};

inline Contingency contingency(std::span<const std::size_t> clusters, std::span<const std::string> labels) {
  if (clusters.size() != labels.size())
    throw ValidationError(std::to_string(clusters.size()) + " cluster assignments for " + std::to_string(labels.size()) + " labels");
  if (clusters.empty()) throw ValidationError("clustering metrics need at least one document");
  std::map<std::size_t, std::size_t> cid;
  std::map<std::string, std::size_t> lid;
  for (auto c : clusters) cid.emplace(c, cid.size());
  for (const auto& l : labels) lid.emplace(l, lid.size());
  Contingency t;
  t.n = clusters.size();
  t.table.assign(cid.size(), std::vector<std::size_t>(lid.size(), 0));
  t.cluster_sizes.assign(cid.size(), 0);
  t.label_sizes.assign(lid.size(), 0);
  for (std::size_t i = 0; i < clusters.size(); ++i) {
    const auto c = cid.at(clusters[i]), l = lid.at(labels[i]);
    ++t.table[c][l];
    ++t.cluster_sizes[c];
    ++t.label_sizes[l];
  }
  return t;
}

inline double entropy(const std::vector<std::size_t>& sizes, std::size_t n) {
  double h = 0;
  for (auto s : sizes)
    if (s > 0) {
      const double p = static_cast<double>(s) / static_cast<double>(n);
      h -= p * std::log(p);
    }
  return h;
}

}  // namespace detail

inline double purity(std::span<const std::size_t> clusters, std::span<const std::string> labels) {
  const auto t = detail::contingency(clusters, labels);
  std::size_t s = 0;
  for (const auto& row : t.table) s += *std::max_element(row.begin(), row.end());
  return static_cast<double>(s) / static_cast<double>(t.n);
}

/// Mutual information normalised by the chosen mean of the two entropies.
/// A single cluster or a single label gives 0; two trivial partitions
/// (both one block) are identical and give 1.
inline double nmi(std::span<const std::size_t> clusters, std::span<const std::string> labels,
                  NmiNormalization norm = NmiNormalization::arithmetic) {
  const auto t = detail::contingency(clusters, labels);
  const double hc = detail::entropy(t.cluster_sizes, t.n), hl = detail::entropy(t.label_sizes, t.n);
  if (t.cluster_sizes.size() == 1 && t.label_sizes.size() == 1) return 1.0;
  if (hc == 0 || hl == 0) return 0.0;
  const double n = static_cast<double>(t.n);
  double mi = 0;
  for (std::size_t c = 0; c < t.table.size(); ++c)
    for (std::size_t l = 0; l < t.table[c].size(); ++l) {
      const auto nij = static_cast<double>(t.table[c][l]);
      if (nij == 0) continue;
      mi += nij / n * std::log(n * nij / (static_cast<double>(t.cluster_sizes[c]) * static_cast<double>(t.label_sizes[l])));
    }
  double denom = 0;
  switch (norm) {
    case NmiNormalization::arithmetic: denom = 0.5 * (hc + hl); break;
    case NmiNormalization::geometric: denom = std::sqrt(hc * hl); break;
    case NmiNormalization::max: denom = std::max(hc, hl); break;
    case NmiNormalization::min: denom = std::min(hc, hl); break;
  }
  return std::clamp(mi / denom, 0.0, 1.0);
}

struct ClusterScore {
  std::size_t clusters = 0;
  double purity = 0;
  double nmi = 0;
  double inertia = 0;
};

/// k-means on eval-mode document-topic vectors for every configured cluster
/// count. Returns nothing when labels are absent.
inline std::optional<std::vector<ClusterScore>> cluster_eval(const Eigen::MatrixXd& thetas, std::span<const std::string> labels,
                                                             const EvalConfig& cfg) {
  if (labels.empty()) return std::nullopt;
  if (labels.size() != static_cast<std::size_t>(thetas.rows()))
    throw ArtifactMismatch(std::to_string(thetas.rows()) + " document-topic rows for " + std::to_string(labels.size()) + " labels");
  std::vector<ClusterScore> out;
  for (auto k : cfg.cluster_counts) {
    if (k > labels.size())
      throw ValidationError("cluster count " + std::to_string(k) + " exceeds the number of test documents " + std::to_string(labels.size()));
    auto km = kmeans(thetas, k, cfg.kmeans);
    out.push_back({k, purity(km.assignment, labels), nmi(km.assignment, labels, cfg.nmi), km.inertia});
  }
  return out;
}

// ------------------------------------------------------- word intrusion

struct IntrusionQuestion {
  std::size_t topic = 0;
  std::size_t decile = 0;
  std::vector<WordId> words;
  std::size_t intruder_position = 0;

  WordId intruder() const { return words.at(intruder_position); }
};

struct Questionnaire {
  std::uint64_t seed = 0;
  std::vector<IntrusionQuestion> questions;
};

/// Topic ids per decile of the coherence ranking (decile 0 = most coherent).
inline std::vector<std::vector<std::size_t>> coherence_deciles(const std::vector<double>& scores) {
  const auto order = sort_by_score(scores);
  const std::size_t K = order.size();
  std::vector<std::vector<std::size_t>> out(10);
  for (std::size_t d = 0; d < 10; ++d)
    for (std::size_t i = d * K / 10; i < (d + 1) * K / 10; ++i) out[d].push_back(order[i]);
  return out;
}

/// Candidate intruders for `topic`: top-other_top words of every unselected
/// topic, minus the topic's own top-own_exclusion words, ascending by id.
inline std::vector<WordId> intruder_pool(const std::vector<std::vector<std::size_t>>& other_top,
                                         const std::vector<std::vector<std::size_t>>& own_top, std::size_t topic,
                                         const std::vector<bool>& selected) {
  std::set<std::size_t> own(own_top[topic].begin(), own_top[topic].end());
  std::set<WordId> pool;
  for (std::size_t k = 0; k < other_top.size(); ++k) {
    if (selected[k]) continue;
    for (auto w : other_top[k])
      if (!own.count(w)) pool.insert(static_cast<WordId>(w));
  }
  return {pool.begin(), pool.end()};
}

inline Questionnaire intrusion_questionnaire(const Eigen::MatrixXd& beta, const std::vector<double>& coherence, std::uint64_t seed,
                                             const IntrusionConfig& cfg = {}) {
  const auto K = static_cast<std::size_t>(beta.rows());
  const auto V = static_cast<std::size_t>(beta.cols());
  if (K < 10) throw ValidationError("word intrusion needs at least 10 topics, got " + std::to_string(K));
  if (coherence.size() != K) throw ArtifactMismatch(std::to_string(coherence.size()) + " coherence scores for " + std::to_string(K) + " topics");
  if (cfg.shown_words == 0 || cfg.shown_words > V) throw ValidationError("shown_words must be in [1, V]");
  if (cfg.topics_per_decile * 10 >= K)
    throw ValidationError(std::to_string(cfg.topics_per_decile * 10) + " questions leave no unselected topic to draw intruders from; K=" +
                          std::to_string(K) + " is too small");
  const auto deciles = coherence_deciles(coherence);
  for (std::size_t d = 0; d < deciles.size(); ++d)
    if (deciles[d].size() < cfg.topics_per_decile)
      throw ValidationError("decile " + std::to_string(d) + " holds " + std::to_string(deciles[d].size()) + " topics, fewer than " +
                            std::to_string(cfg.topics_per_decile));
  const auto other_top = top_words(beta, cfg.other_top);
  const auto own_top = top_words(beta, std::max(cfg.own_exclusion, cfg.shown_words));
  auto rng = make_rng(seed, Stream::questionnaire);

  // Draw topics per decile; a repeated draw is discarded and redrawn.
  std::vector<std::pair<std::size_t, std::size_t>> picks;  // (decile, topic)
  std::vector<bool> selected(K, false);
  for (std::size_t d = 0; d < deciles.size(); ++d)
    for (std::size_t i = 0; i < cfg.topics_per_decile; ++i) {
      std::size_t t;
      do t = deciles[d][uniform_index(rng, deciles[d].size())];
      while (selected[t]);
      selected[t] = true;
      picks.emplace_back(d, t);
    }

  // Replace topics that have no eligible intruder by another topic of the
  // same decile; repeat until every selected topic has a nonempty pool.
  std::vector<bool> rejected(K, false);
  for (bool changed = true; changed;) {
    changed = false;
    for (auto& [d, t] : picks) {
      if (!intruder_pool(other_top, own_top, t, selected).empty()) continue;
      rejected[t] = true;
      std::vector<std::size_t> candidates;
      for (auto c : deciles[d])
        if (!selected[c] && !rejected[c]) candidates.push_back(c);
      if (candidates.empty()) throw ValidationError("no eligible intruder word for topic " + std::to_string(t) + " or any replacement in its decile");
      selected[t] = false;
      t = candidates[uniform_index(rng, candidates.size())];
      selected[t] = true;
      changed = true;
    }
  }

  Questionnaire q;
  q.seed = seed;
  for (const auto& [d, t] : picks) {
    const auto pool = intruder_pool(other_top, own_top, t, selected);
    IntrusionQuestion question;
    question.topic = t;
    question.decile = d;
    for (std::size_t i = 0; i < cfg.shown_words; ++i) question.words.push_back(static_cast<WordId>(own_top[t][i]));
    const WordId intruder = pool[uniform_index(rng, pool.size())];
    question.words.push_back(intruder);
    shuffle(question.words, rng);
    question.intruder_position = static_cast<std::size_t>(std::find(question.words.begin(), question.words.end(), intruder) - question.words.begin());
    q.questions.push_back(std::move(question));
  }
  return q;
}

/// Answer key entry; kept apart from the questionnaire shown to annotators.
struct IntrusionAnswer {
  std::size_t question = 0;
  std::size_t topic = 0;
  std::size_t decile = 0;
  std::size_t position = 0;
  std::string intruder;
};

inline std::vector<IntrusionAnswer> answer_key(const Questionnaire& q, const Vocabulary& vocab) {
  std::vector<IntrusionAnswer> out;
  for (std::size_t i = 0; i < q.questions.size(); ++i) {
    const auto& qu = q.questions[i];
    out.push_back({i, qu.topic, qu.decile, qu.intruder_position, vocab.words.at(qu.intruder())});
  }
  return out;
}

/// Fraction of responses naming the intruder word.
inline double wis_score(std::span<const IntrusionAnswer> key, std::span<const std::string> responses) {
  if (key.size() != responses.size())
    throw ValidationError(std::to_string(responses.size()) + " responses for " + std::to_string(key.size()) + " questions");
  if (key.empty()) throw ValidationError("no questions to score");
  std::size_t hit = 0;
  for (std::size_t i = 0; i < key.size(); ++i) hit += responses[i] == key[i].intruder;
  return static_cast<double>(hit) / static_cast<double>(key.size());
}

inline nlohmann::json questionnaire_json(const Questionnaire& q, const Vocabulary& vocab) {
  nlohmann::json qs = nlohmann::json::array();
  for (std::size_t i = 0; i < q.questions.size(); ++i) {
    nlohmann::json words = nlohmann::json::array();
    for (auto w : q.questions[i].words) words.push_back(vocab.words.at(w));
    qs.push_back({{"id", i}, {"words", words}});
  }
  return {{"seed", q.seed}, {"questions", qs}};
}

inline nlohmann::json answer_key_json(std::span<const IntrusionAnswer> key) {
  nlohmann::json a = nlohmann::json::array();
  for (const auto& k : key)
    a.push_back({{"id", k.question}, {"topic", k.topic}, {"decile", k.decile}, {"position", k.position}, {"intruder", k.intruder}});
  return {{"answers", a}};
}

inline std::vector<IntrusionAnswer> answer_key_from_json(const nlohmann::json& j) {
  std::vector<IntrusionAnswer> out;
  try {
    for (const auto& a : j.at("answers"))
      out.push_back({a.at("id").get<std::size_t>(), a.at("topic").get<std::size_t>(), a.at("decile").get<std::size_t>(),
                     a.at("position").get<std::size_t>(), a.at("intruder").get<std::string>()});
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed answer key: ") + e.what());
  }
  return out;
}

/// Plain-text questionnaire: one question per line, "id<TAB>w1 w2 ... w6".
inline void write_questionnaire_text(std::ostream& out, const Questionnaire& q, const Vocabulary& vocab) {
  for (std::size_t i = 0; i < q.questions.size(); ++i) {
    out << i << '\t';
    for (std::size_t j = 0; j < q.questions[i].words.size(); ++j) out << (j ? " " : "") << vocab.words.at(q.questions[i].words[j]);
    out << '\n';
  }
}

// ---------------------------------------------------------------- report

struct TopicSummary {
  std::size_t topic = 0;
  double coherence = 0;
  std::vector<std::string> words;
};

struct EvalReport {
  EvalConfig config;
  std::vector<CurvePoint> coherence_curve;
  std::vector<CurvePoint> diversity_curve;
  std::optional<std::vector<ClusterScore>> clustering;
  /// Sorted by descending coherence.
  std::vector<TopicSummary> per_topic;
};

inline const char* clustering_caveat() {
  return "Clustering purity and NMI only reflect how well the document-topic vectors separate the label classes; they say "
         "nothing about topic quality and should be read alongside coherence and diversity.";
}

inline EvalReport build_report(const Eigen::MatrixXd& beta, const Vocabulary& vocab, const NpmiMatrix& npmi_test,
                               const std::optional<Eigen::MatrixXd>& test_theta, std::span<const std::string> test_labels,
                               const EvalConfig& cfg) {
  if (vocab.size() != static_cast<std::size_t>(beta.cols()))
    throw ArtifactMismatch("beta has " + std::to_string(beta.cols()) + " columns, vocabulary has " + std::to_string(vocab.size()));
  EvalReport r;
  r.config = cfg;
  const auto coh = topic_coherence(beta, npmi_test, cfg);
  r.coherence_curve = coh.curve;
  r.diversity_curve = diversity_curve(beta, coh, cfg);
  if (test_theta) r.clustering = cluster_eval(*test_theta, test_labels, cfg);
  const auto tops = top_words(beta, cfg.k_tc);
  for (auto k : coh.order) {
    TopicSummary s{k, coh.per_topic[k], {}};
    for (auto w : tops[k]) s.words.push_back(vocab.words[w]);
    r.per_topic.push_back(std::move(s));
  }
  return r;
}

/// Full evaluation of a trained model on the test split of `corpus`.
template <class T>
EvalReport evaluate(ModelParams<T>& params, const BowCorpus& corpus, const NpmiMatrix& npmi_test, double tau_beta, const EvalConfig& cfg) {
  const Eigen::MatrixXd beta = topic_word(params, tau_beta).template cast<double>();
  std::optional<Eigen::MatrixXd> theta;
  if (!corpus.test_labels.empty() && !cfg.cluster_counts.empty())
    theta = infer_theta(params, std::span<const BowDocument>(corpus.test_docs)).template cast<double>();
  return build_report(beta, corpus.vocabulary, npmi_test, theta, corpus.test_labels, cfg);
}

inline nlohmann::json report_json(const EvalReport& r) {
  auto curve = [](const std::vector<CurvePoint>& c) {
    nlohmann::json a = nlohmann::json::array();
    for (const auto& p : c) a.push_back({{"percentage", p.percentage}, {"topics", p.topics}, {"value", p.value}});
    return a;
  };
  nlohmann::json j;
  j["config"] = {{"k_tc", r.config.k_tc},
                 {"k_td", r.config.k_td},
                 {"nmi_normalization", to_string(r.config.nmi)},
                 {"kmeans", {{"restarts", r.config.kmeans.restarts}, {"max_iter", r.config.kmeans.max_iter}, {"tol", r.config.kmeans.tol}, {"seed", r.config.kmeans.seed}}}};
  j["coherence_curve"] = curve(r.coherence_curve);
  j["diversity_curve"] = curve(r.diversity_curve);
  if (r.clustering) {
    nlohmann::json c = nlohmann::json::array();
    for (const auto& s : *r.clustering) c.push_back({{"clusters", s.clusters}, {"purity", s.purity}, {"nmi", s.nmi}, {"inertia", s.inertia}});
    j["clustering"] = c;
    j["clustering_note"] = clustering_caveat();
  } else {
    j["clustering"] = nullptr;
    j["clustering_note"] = "skipped: no labels";
  }
  nlohmann::json topics = nlohmann::json::array();
  for (const auto& t : r.per_topic) topics.push_back({{"topic", t.topic}, {"coherence", t.coherence}, {"words", t.words}});
  j["per_topic"] = topics;
  return j;
}

/// "metric,percentage,topics,value" rows for both curves.
inline void write_curves_csv(std::ostream& out, const EvalReport& r) {
  out << "metric,percentage,topics,value\n";
  for (const auto& p : r.coherence_curve) out << "coherence," << detail::format_double(p.percentage) << ',' << p.topics << ',' << detail::format_double(p.value) << '\n';
  for (const auto& p : r.diversity_curve) out << "diversity," << detail::format_double(p.percentage) << ',' << p.topics << ',' << detail::format_double(p.value) << '\n';
}

inline void write_clustering_csv(std::ostream& out, const EvalReport& r) {
  out << "clusters,purity,nmi,inertia\n";
  if (!r.clustering) return;
  for (const auto& s : *r.clustering)
    out << s.clusters << ',' << detail::format_double(s.purity) << ',' << detail::format_double(s.nmi) << ',' << detail::format_double(s.inertia) << '\n';
}

inline void write_report_markdown(std::ostream& out, const EvalReport& r, std::size_t max_topics = 20) {
  auto fmt = [](double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4f", v);
    return std::string(buf);
  };
  out << "# Evaluation report\n\n";
  out << "Coherence: mean NPMI of the top " << r.config.k_tc << " words on test documents. Diversity: unique fraction of the top "
      << r.config.k_td << " words. Topics are selected in descending coherence order.\n\n";
  out << "| topics (%) | topics | coherence | diversity |\n|---|---|---|---|\n";
  for (std::size_t i = 0; i < r.coherence_curve.size(); ++i)
    out << "| " << detail::format_double(r.coherence_curve[i].percentage) << " | " << r.coherence_curve[i].topics << " | " << fmt(r.coherence_curve[i].value)
        << " | " << fmt(r.diversity_curve[i].value) << " |\n";
  out << "\n## Document clustering\n\n";
  if (!r.clustering) {
    out << "skipped: no labels\n";
  } else {
    out << "| clusters | purity | NMI (" << to_string(r.config.nmi) << ") |\n|---|---|---|\n";
    for (const auto& s : *r.clustering) out << "| " << s.clusters << " | " << fmt(s.purity) << " | " << fmt(s.nmi) << " |\n";
    out << "\n" << clustering_caveat() << "\n";
  }
  out << "\n## Topics by coherence\n\n| rank | topic | NPMI | top words |\n|---|---|---|---|\n";
  for (std::size_t i = 0; i < r.per_topic.size() && i < max_topics; ++i) {
    const auto& t = r.per_topic[i];
    out << "| " << i + 1 << " | " << t.topic << " | " << fmt(t.coherence) << " |";
    for (const auto& w : t.words) out << ' ' << w;
    out << " |\n";
  }
}

}  // namespace contratopic
