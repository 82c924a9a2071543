#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "contratopic/evalsuite.hpp"

namespace ct = contratopic;

namespace {

// NPMI over V words where every stored pair (i < j) gets value(i, j). Pairs
// for which value returns NaN are left unstored (default -1).
template <class F>
ct::NpmiMatrix npmi_from(std::size_t V, F value, ct::NpmiSource source = ct::NpmiSource::test) {
  std::vector<std::size_t> row_ptr{0};
  std::vector<ct::WordId> cols;
  std::vector<double> vals;
  for (std::size_t i = 0; i < V; ++i) {
    for (std::size_t j = i + 1; j < V; ++j) {
      const double v = value(i, j);
      if (std::isnan(v)) continue;
      cols.push_back(static_cast<ct::WordId>(j));
      vals.push_back(v);
    }
    row_ptr.push_back(cols.size());
  }
  return ct::NpmiMatrix(V, 100, -1.0, source, row_ptr, cols, vals);
}

// beta rows with the listed words ranked first (earlier = higher), the rest tiny.
Eigen::MatrixXd ranked_beta(std::size_t V, const std::vector<std::vector<std::size_t>>& tops) {
  Eigen::MatrixXd b = Eigen::MatrixXd::Constant(static_cast<Eigen::Index>(tops.size()), static_cast<Eigen::Index>(V), 1e-6);
  for (std::size_t k = 0; k < tops.size(); ++k)
    for (std::size_t r = 0; r < tops[k].size(); ++r) b(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(tops[k][r])) = 1.0 - 0.01 * static_cast<double>(r);
  for (Eigen::Index k = 0; k < b.rows(); ++k) b.row(k) /= b.row(k).sum();
  return b;
}

ct::Vocabulary vocab_of(std::size_t V) {
  ct::Vocabulary v;
  for (std::size_t i = 0; i < V; ++i) v.words.push_back("w" + std::to_string(i));
  v.doc_freq.assign(V, 1);
  return v;
}

}  // namespace

TEST(EvalConfig, DefaultsAndValidation) {
  ct::EvalConfig c;
  EXPECT_EQ(c.k_tc, 10u);
  EXPECT_EQ(c.k_td, 25u);
  EXPECT_EQ(c.percentages.size(), 10u);
  EXPECT_EQ(c.cluster_counts, (std::vector<std::size_t>{20, 40, 60, 80, 100}));
  EXPECT_EQ(c.kmeans.restarts, 10u);
  EXPECT_EQ(c.kmeans.max_iter, 300u);
  EXPECT_DOUBLE_EQ(c.kmeans.tol, 1e-6);
  EXPECT_NO_THROW(c.validate());
  c.k_tc = 1;
  EXPECT_THROW(c.validate(), ct::ValidationError);
  c = {};
  c.percentages = {0};
  EXPECT_THROW(c.validate(), ct::ValidationError);
  c.percentages = {100.5};
  EXPECT_THROW(c.validate(), ct::ValidationError);
}

TEST(Coherence, UniformPairScoreIsTheTopicScore) {
  std::vector<std::size_t> top(10);
  for (std::size_t i = 0; i < 10; ++i) top[i] = i;
  auto beta = ranked_beta(12, {top});
  ct::EvalConfig cfg;
  auto r = ct::topic_coherence(beta, npmi_from(12, [](auto, auto) { return 0.5; }), cfg);
  EXPECT_NEAR(r.per_topic[0], 0.5, 1e-15);
  auto never = ct::topic_coherence(beta, npmi_from(12, [](auto, auto) { return std::nan(""); }), cfg);
  EXPECT_DOUBLE_EQ(never.per_topic[0], -1.0);
}

TEST(Coherence, PairsAreUnorderedOverTopWordsOnly) {
  // Topic top-3 is {4, 1, 7}; only pairs among these count.
  auto beta = ranked_beta(8, {{4, 1, 7}});
  auto npmi = npmi_from(8, [](std::size_t i, std::size_t j) { return 0.01 * static_cast<double>(i * 8 + j); });
  ct::EvalConfig cfg;
  cfg.k_tc = 3;
  auto r = ct::topic_coherence(beta, npmi, cfg);
  EXPECT_NEAR(r.per_topic[0], (0.01 * (1 * 8 + 4) + 0.01 * (4 * 8 + 7) + 0.01 * (1 * 8 + 7)) / 3.0, 1e-15);
}

TEST(Coherence, CurveUsesCeilingOfTopSlice) {
  const std::size_t K = 7, V = 14;
  std::vector<std::vector<std::size_t>> tops;
  for (std::size_t k = 0; k < K; ++k) tops.push_back({2 * k, 2 * k + 1});
  auto beta = ranked_beta(V, tops);
  // pair (2k, 2k+1) has score s_k; everything else unstored.
  const std::vector<double> s{0.1, -0.4, 0.7, 0.3, 0.3, -0.9, 0.2};
  auto npmi = npmi_from(V, [&](std::size_t i, std::size_t j) { return (i % 2 == 0 && j == i + 1) ? s[i / 2] : std::nan(""); });
  ct::EvalConfig cfg;
  cfg.k_tc = 2;
  auto r = ct::topic_coherence(beta, npmi, cfg);
  auto sorted = s;
  std::sort(sorted.begin(), sorted.end(), std::greater<>());
  ASSERT_EQ(r.curve.size(), cfg.percentages.size());
  for (const auto& pt : r.curve) {
    const auto n = static_cast<std::size_t>(std::ceil(pt.percentage * K / 100.0 - 1e-12));
    double mean = 0;
    for (std::size_t i = 0; i < n; ++i) mean += sorted[i];
    EXPECT_EQ(pt.topics, n) << pt.percentage;
    EXPECT_NEAR(pt.value, mean / static_cast<double>(n), 1e-15);
  }
  EXPECT_EQ(r.curve[2].topics, 3u);  // 30% of 7 -> 2.1 -> 3
  EXPECT_EQ(r.order[0], 2u);
  EXPECT_EQ(r.order[1], 3u);  // tie between topics 3 and 4 goes to 3
  EXPECT_EQ(r.order[2], 4u);
  for (std::size_t i = 1; i < r.curve.size(); ++i) EXPECT_LE(r.curve[i].value, r.curve[i - 1].value + 1e-15);
  EXPECT_GE(r.curve.front().value, r.curve.back().value);
}

TEST(Coherence, ErrorsOnOversizedKAndTrainNpmi) {
  auto beta = ranked_beta(5, {{0, 1}});
  ct::EvalConfig cfg;
  EXPECT_THROW(ct::topic_coherence(beta, npmi_from(5, [](auto, auto) { return 0.0; }), cfg), ct::ValidationError);
  cfg.k_tc = 3;
  EXPECT_THROW(ct::topic_coherence(beta, npmi_from(5, [](auto, auto) { return 0.0; }, ct::NpmiSource::train), cfg), ct::ArtifactMismatch);
  EXPECT_THROW(ct::topic_coherence(beta, npmi_from(6, [](auto, auto) { return 0.0; }), cfg), ct::ArtifactMismatch);
}

TEST(Diversity, DisjointIdenticalAndPartialOverlap) {
  const std::size_t V = 100;
  std::vector<std::vector<std::size_t>> disjoint, same;
  for (std::size_t k = 0; k < 4; ++k) {
    std::vector<std::size_t> t, u;
    for (std::size_t i = 0; i < 25; ++i) {
      t.push_back(25 * k + i);
      u.push_back(i);
    }
    disjoint.push_back(t);
    same.push_back(u);
  }
  const std::vector<std::size_t> all{0, 1, 2, 3};
  EXPECT_DOUBLE_EQ(ct::topic_diversity(ranked_beta(V, disjoint), all, 25), 1.0);
  EXPECT_DOUBLE_EQ(ct::topic_diversity(ranked_beta(V, same), all, 25), 0.25);

  const std::vector<std::vector<std::size_t>> tops{{0, 1, 2}, {2, 3, 4}, {4, 5, 0}};
  std::set<std::size_t> uni;
  for (const auto& t : tops) uni.insert(t.begin(), t.end());
  const std::vector<std::size_t> three{0, 1, 2}, two{0, 1};
  EXPECT_DOUBLE_EQ(ct::topic_diversity(ranked_beta(8, tops), three, 3), static_cast<double>(uni.size()) / 9.0);
  EXPECT_DOUBLE_EQ(ct::topic_diversity(ranked_beta(8, tops), two, 3), 5.0 / 6.0);
  EXPECT_THROW(ct::topic_diversity(ranked_beta(8, tops), std::vector<std::size_t>{}, 3), ct::ValidationError);
}

TEST(Clustering, PurityByArgmaxLabel) {
  const std::vector<std::size_t> c{0, 0, 0, 0, 1, 1};
  const std::vector<std::string> l{"x", "x", "x", "y", "y", "y"};
  EXPECT_NEAR(ct::purity(c, l), 5.0 / 6.0, 1e-15);
  const std::vector<std::size_t> same{4, 4, 4, 9, 9, 9};
  EXPECT_DOUBLE_EQ(ct::purity(same, l), 1.0);
  EXPECT_NEAR(ct::nmi(same, l), 1.0, 1e-12);
}

TEST(Clustering, NmiConventionsAndReferenceValues) {
  const std::vector<std::size_t> one(6, 0);
  const std::vector<std::string> mixed{"a", "a", "b", "b", "c", "c"};
  EXPECT_DOUBLE_EQ(ct::nmi(one, mixed), 0.0);
  const std::vector<std::size_t> c{0, 0, 1, 1, 2, 2};
  const std::vector<std::string> l{"a", "a", "a", "b", "b", "c"};
  // Reference values from scikit-learn's normalized_mutual_info_score.
  EXPECT_NEAR(ct::nmi(c, l), 0.5206652463984818, 1e-12);
  EXPECT_NEAR(ct::nmi(c, l, ct::NmiNormalization::geometric), 0.5211105196400003, 1e-12);
  // Symmetric under swapping roles.
  const std::vector<std::size_t> l_ids{0, 0, 0, 1, 1, 2};
  const std::vector<std::string> c_names{"0", "0", "1", "1", "2", "2"};
  EXPECT_NEAR(ct::nmi(l_ids, c_names), ct::nmi(c, l), 1e-15);
  EXPECT_THROW(ct::nmi(c, std::vector<std::string>{"a"}), ct::ValidationError);
}

TEST(KMeans, RecoversSeparatedBlobsAndRestartsNeverWorsen) {
  ct::Rng rng(5);
  Eigen::MatrixXd x(60, 3);
  std::vector<std::string> labels;
  for (Eigen::Index i = 0; i < 60; ++i) {
    const auto g = i % 3;
    for (Eigen::Index j = 0; j < 3; ++j) x(i, j) = (j == g ? 10.0 : 0.0) + 0.1 * ct::standard_normal(rng);
    labels.push_back("g" + std::to_string(g));
  }
  ct::KMeansConfig cfg;
  cfg.seed = 11;
  auto best = ct::kmeans(x, 3, cfg);
  EXPECT_DOUBLE_EQ(ct::purity(best.assignment, labels), 1.0);
  EXPECT_NEAR(ct::nmi(best.assignment, labels), 1.0, 1e-12);
  for (std::size_t r = 0; r < cfg.restarts; ++r) {
    auto rr = ct::kmeans_rng(cfg, 3, r);
    EXPECT_LE(best.inertia, ct::kmeans_single(x, 3, cfg, rr).inertia);
  }
  auto again = ct::kmeans(x, 3, cfg);
  EXPECT_EQ(again.assignment, best.assignment);
  EXPECT_EQ(again.inertia, best.inertia);
  EXPECT_THROW(ct::kmeans(x, 61, cfg), ct::ValidationError);
}

TEST(KMeans, ClusterEvalSkipsWithoutLabelsAndRejectsTooManyClusters) {
  Eigen::MatrixXd theta = Eigen::MatrixXd::Random(8, 3).cwiseAbs();
  ct::EvalConfig cfg;
  EXPECT_FALSE(ct::cluster_eval(theta, {}, cfg).has_value());
  std::vector<std::string> labels(8, "a");
  EXPECT_THROW(ct::cluster_eval(theta, labels, cfg), ct::ValidationError);
  cfg.cluster_counts = {2, 4};
  auto r = ct::cluster_eval(theta, labels, cfg);
  ASSERT_TRUE(r.has_value());
  ASSERT_EQ(r->size(), 2u);
  for (const auto& s : *r) {
    EXPECT_GE(s.purity, 0.0);
    EXPECT_LE(s.purity, 1.0);
    EXPECT_GE(s.nmi, 0.0);
    EXPECT_LE(s.nmi, 1.0);
  }
}

namespace {

// K topics over V = 60K words; topic k owns words [60k, 60k+60) ranked in order.
Eigen::MatrixXd block_beta(std::size_t K) {
  std::vector<std::vector<std::size_t>> tops;
  for (std::size_t k = 0; k < K; ++k) {
    std::vector<std::size_t> t;
    for (std::size_t i = 0; i < 60; ++i) t.push_back(60 * k + i);
    tops.push_back(t);
  }
  return ranked_beta(60 * K, tops);
}

std::vector<double> scores(std::size_t K) {
  std::vector<double> s(K);
  for (std::size_t k = 0; k < K; ++k) s[k] = std::sin(static_cast<double>(k) * 1.7);
  return s;
}

}  // namespace

TEST(Intrusion, ThirtyQuestionsOfSixWordsWithEligibleIntruders) {
  const std::size_t K = 100;
  const auto beta = block_beta(K);
  const auto coh = scores(K);
  auto q = ct::intrusion_questionnaire(beta, coh, 42);
  ASSERT_EQ(q.questions.size(), 30u);
  const auto deciles = ct::coherence_deciles(coh);
  std::set<std::size_t> topics;
  std::vector<std::size_t> per_decile(10, 0);
  for (const auto& qu : q.questions) {
    EXPECT_EQ(qu.words.size(), 6u);
    topics.insert(qu.topic);
    ++per_decile[qu.decile];
    EXPECT_NE(std::find(deciles[qu.decile].begin(), deciles[qu.decile].end(), qu.topic), deciles[qu.decile].end());
  }
  EXPECT_EQ(topics.size(), 30u);
  for (auto n : per_decile) EXPECT_EQ(n, 3u);
  for (const auto& qu : q.questions) {
    const auto own = ct::top_indices(beta.row(static_cast<Eigen::Index>(qu.topic)), 50);
    const auto w = qu.intruder();
    EXPECT_EQ(std::find(own.begin(), own.end(), w), own.end());
    bool in_other_top10 = false;
    for (std::size_t k = 0; k < K; ++k) {
      if (topics.count(k)) continue;
      const auto t10 = ct::top_indices(beta.row(static_cast<Eigen::Index>(k)), 10);
      in_other_top10 = in_other_top10 || std::find(t10.begin(), t10.end(), w) != t10.end();
    }
    EXPECT_TRUE(in_other_top10);
    const auto own5 = ct::top_indices(beta.row(static_cast<Eigen::Index>(qu.topic)), 5);
    for (std::size_t i = 0; i < 6; ++i)
      if (i != qu.intruder_position) {
        EXPECT_NE(std::find(own5.begin(), own5.end(), qu.words[i]), own5.end());
      }
  }
  auto again = ct::intrusion_questionnaire(beta, coh, 42);
  for (std::size_t i = 0; i < 30; ++i) {
    EXPECT_EQ(again.questions[i].words, q.questions[i].words);
    EXPECT_EQ(again.questions[i].intruder_position, q.questions[i].intruder_position);
  }
  auto other = ct::intrusion_questionnaire(beta, coh, 43);
  bool differs = false;
  for (std::size_t i = 0; i < 30; ++i) differs = differs || other.questions[i].topic != q.questions[i].topic;
  EXPECT_TRUE(differs);
}

TEST(Intrusion, ForeignDominantWordEligibleOwnTopWordsNever) {
  // Topic 0 and topic 1 share their top words except word 999, which tops
  // topic 1 and sits at rank 40 in topic 0.
  const std::size_t K = 20, V = 2000;
  std::vector<std::vector<std::size_t>> tops(K);
  for (std::size_t k = 0; k < K; ++k)
    for (std::size_t i = 0; i < 60; ++i) tops[k].push_back(60 * k + i);
  tops[1][0] = 999;
  tops[0][40] = 999;
  tops[2][0] = 1500;
  const auto beta = ranked_beta(V, tops);
  const auto own_top = ct::top_words(beta, 50);
  const auto other_top = ct::top_words(beta, 10);
  std::vector<bool> selected(K, false);
  selected[0] = true;
  auto pool0 = ct::intruder_pool(other_top, own_top, 0, selected);
  EXPECT_EQ(std::count(pool0.begin(), pool0.end(), ct::WordId{999}), 0);  // own top-50
  EXPECT_EQ(std::count(pool0.begin(), pool0.end(), ct::WordId{1500}), 1);
  selected[3] = true;
  auto pool3 = ct::intruder_pool(other_top, own_top, 3, selected);
  EXPECT_EQ(std::count(pool3.begin(), pool3.end(), ct::WordId{999}), 1);
  selected[1] = true;
  pool3 = ct::intruder_pool(other_top, own_top, 3, selected);
  EXPECT_EQ(std::count(pool3.begin(), pool3.end(), ct::WordId{999}), 0);  // its topic is selected
}

TEST(Intrusion, TooFewTopicsIsFatal) {
  ct::IntrusionConfig cfg;
  cfg.topics_per_decile = 1;  // every topic selected, nothing left to draw intruders from
  EXPECT_THROW(ct::intrusion_questionnaire(block_beta(10), scores(10), 1, cfg), ct::ValidationError);
  EXPECT_THROW(ct::intrusion_questionnaire(block_beta(9), scores(9), 1), ct::ValidationError);
  EXPECT_THROW(ct::intrusion_questionnaire(block_beta(30), scores(30), 1), ct::ValidationError);
}

TEST(Intrusion, EmptyPoolWithoutReplacementIsFatalWithTopic) {
  // Both topics of one decile hold every other topic's top-5 words within
  // their own top 200, so neither can be given an intruder.
  const std::size_t K = 20;
  const auto coh = scores(K);
  const auto deciles = ct::coherence_deciles(coh);
  const std::size_t a = deciles[4][0], b = deciles[4][1];
  std::vector<std::vector<std::size_t>> tops(K);
  for (std::size_t k = 0; k < K; ++k)
    if (k != a && k != b)
      for (std::size_t i = 0; i < 60; ++i) tops[k].push_back(60 * k + i);
  for (auto t : {a, b}) {
    for (std::size_t k = 0; k < K; ++k)
      if (k != a && k != b)
        for (std::size_t i = 0; i < 5; ++i) tops[t].push_back(60 * k + i);
    for (std::size_t i = 0; i < 60; ++i) tops[t].push_back(60 * t + i);
  }
  ct::IntrusionConfig cfg;
  cfg.topics_per_decile = 1;
  cfg.other_top = 5;
  cfg.own_exclusion = 200;
  try {
    ct::intrusion_questionnaire(ranked_beta(60 * K, tops), coh, 1, cfg);
    FAIL();
  } catch (const ct::ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("no eligible intruder word for topic"), std::string::npos) << e.what();
  }
}

TEST(Intrusion, TopicWithoutEligibleIntruderIsReplacedWithinDecile) {
  // Topic 0 ranks the top-5 words of every other topic within its own top
  // 200, so it never has an intruder and must be swapped for its decile mate.
  const std::size_t K = 20;
  std::vector<std::vector<std::size_t>> tops(K);
  for (std::size_t k = 1; k < K; ++k)
    for (std::size_t i = 0; i < 60; ++i) tops[k].push_back(60 * k + i);
  for (std::size_t k = 1; k < K; ++k)
    for (std::size_t i = 0; i < 5; ++i) tops[0].push_back(60 * k + i);
  for (std::size_t i = 0; i < 60; ++i) tops[0].push_back(i);
  const auto beta = ranked_beta(60 * K, tops);
  ct::IntrusionConfig cfg;
  cfg.topics_per_decile = 1;
  cfg.other_top = 5;
  cfg.own_exclusion = 200;
  const auto coh = scores(K);
  const auto deciles = ct::coherence_deciles(coh);
  std::size_t d0 = 0;
  for (std::size_t d = 0; d < 10; ++d)
    if (std::count(deciles[d].begin(), deciles[d].end(), 0u)) d0 = d;
  const std::size_t mate = deciles[d0][0] == 0 ? deciles[d0][1] : deciles[d0][0];
  for (std::uint64_t seed = 0; seed < 8; ++seed) {
    auto q = ct::intrusion_questionnaire(beta, coh, seed, cfg);
    ASSERT_EQ(q.questions.size(), 10u);
    for (const auto& qu : q.questions) {
      EXPECT_NE(qu.topic, 0u);
      if (qu.decile == d0) {
        EXPECT_EQ(qu.topic, mate);
      }
    }
  }
}

TEST(Wis, ScoresFractionMatchingIntruder) {
  const auto beta = block_beta(100);
  auto q = ct::intrusion_questionnaire(beta, scores(100), 7);
  const auto vocab = vocab_of(6000);
  const auto key = ct::answer_key(q, vocab);
  std::vector<std::string> right, wrong, mixed;
  for (std::size_t i = 0; i < key.size(); ++i) {
    right.push_back(key[i].intruder);
    wrong.push_back(vocab.words[q.questions[i].words[(key[i].position + 1) % 6]]);
    mixed.push_back(i < 24 ? right.back() : wrong.back());
  }
  EXPECT_DOUBLE_EQ(ct::wis_score(key, right), 1.0);
  EXPECT_DOUBLE_EQ(ct::wis_score(key, wrong), 0.0);
  EXPECT_NEAR(ct::wis_score(key, mixed), 0.8, 1e-15);
  right.pop_back();
  EXPECT_THROW(ct::wis_score(key, right), ct::ValidationError);
  auto parsed = ct::answer_key_from_json(nlohmann::json::parse(ct::answer_key_json(key).dump()));
  ASSERT_EQ(parsed.size(), key.size());
  EXPECT_EQ(parsed[5].intruder, key[5].intruder);
  EXPECT_EQ(parsed[5].position, key[5].position);
  // The questionnaire itself never reveals the answer.
  const auto qj = ct::questionnaire_json(q, vocab).dump();
  EXPECT_EQ(qj.find("intruder"), std::string::npos);
}

TEST(Report, SortedTopicsCurvesAndCaveat) {
  const std::size_t V = 40;
  std::vector<std::vector<std::size_t>> tops;
  for (std::size_t k = 0; k < 4; ++k) tops.push_back({10 * k, 10 * k + 1, 10 * k + 2});
  const auto beta = ranked_beta(V, tops);
  auto npmi = npmi_from(V, [](std::size_t i, std::size_t j) { return i / 10 == j / 10 ? 0.1 * static_cast<double>(i / 10) : std::nan(""); });
  ct::EvalConfig cfg;
  cfg.k_tc = 3;
  cfg.k_td = 3;
  cfg.cluster_counts = {2};
  Eigen::MatrixXd theta(4, 2);
  theta << 1, 0, 0.9, 0.1, 0, 1, 0.1, 0.9;
  const std::vector<std::string> labels{"a", "a", "b", "b"};
  auto r = ct::build_report(beta, vocab_of(V), npmi, theta, labels, cfg);
  ASSERT_EQ(r.per_topic.size(), 4u);
  for (std::size_t i = 1; i < 4; ++i) EXPECT_GE(r.per_topic[i - 1].coherence, r.per_topic[i].coherence);
  EXPECT_EQ(r.per_topic[0].topic, 3u);
  EXPECT_EQ(r.per_topic[0].words, (std::vector<std::string>{"w30", "w31", "w32"}));
  EXPECT_EQ(r.coherence_curve.size(), cfg.percentages.size());
  EXPECT_EQ(r.diversity_curve.size(), cfg.percentages.size());
  for (const auto& p : r.diversity_curve) EXPECT_DOUBLE_EQ(p.value, 1.0);
  ASSERT_TRUE(r.clustering.has_value());
  EXPECT_DOUBLE_EQ((*r.clustering)[0].purity, 1.0);
  const auto j = ct::report_json(r);
  EXPECT_EQ(j["per_topic"].size(), 4u);
  EXPECT_TRUE(j.contains("clustering_note"));
  std::ostringstream md, csv, ccsv;
  ct::write_report_markdown(md, r);
  ct::write_curves_csv(csv, r);
  ct::write_clustering_csv(ccsv, r);
  EXPECT_NE(md.str().find(ct::clustering_caveat()), std::string::npos);
  const auto csv_text = csv.str();
  EXPECT_EQ(std::count(csv_text.begin(), csv_text.end(), '\n'), 21);
  EXPECT_EQ(ccsv.str().rfind("clusters,purity,nmi,inertia\n", 0), 0u);

  auto unlabeled = ct::build_report(beta, vocab_of(V), npmi, std::nullopt, {}, cfg);
  EXPECT_FALSE(unlabeled.clustering.has_value());
  EXPECT_TRUE(ct::report_json(unlabeled)["clustering"].is_null());
}
