#include <gtest/gtest.h>

#include <map>
#include <random>
#include <set>
#include <sstream>

#include "contratopic/corpus.hpp"
#include "test_util.hpp"

namespace ct = contratopic;
using ct::testing::TempDir;
using ct::testing::write_file;

namespace {

ct::PreprocessConfig loose() {
  ct::PreprocessConfig cfg;
  cfg.max_df_fraction = 1.0;
  cfg.min_df_docs = 1;
  cfg.train_fraction = 0.5;
  cfg.split_seed = 3;
  return cfg;
}

std::string to_archive(const ct::BowCorpus& c) {
  std::ostringstream out;
  ct::write_corpus(out, c);
  return out.str();
}

}  // namespace

TEST(Tokenizer, LowercasesAndSplitsOnNonAlphabetic) {
  auto toks = ct::tokenize("Hello, World! it's 42nd-street");
  std::vector<std::string> expect{"hello", "world", "it", "s", "nd", "street"};
  EXPECT_EQ(toks, expect);
  EXPECT_TRUE(ct::tokenize("  123 ... ").empty());
}

TEST(IngestRaw, SixDocsMinDfTwoKeepsWordsInAtLeastTwoDocs) {
  TempDir dir;
  const std::vector<std::string> texts{"alpha beta", "alpha gamma", "beta beta", "delta alpha", "alpha beta", "gamma alpha"};
  std::string jsonl;
  for (std::size_t i = 0; i < texts.size(); ++i)
    jsonl += R"({"id": "d)" + std::to_string(i) + R"(", "text": ")" + texts[i] + "\"}\n";
  write_file(dir.file("in.jsonl"), jsonl);

  // Oracle: hand count of document frequencies.
  std::map<std::string, int> df;
  for (auto& t : texts) {
    std::set<std::string> uniq;
    for (auto& w : ct::tokenize(t)) uniq.insert(w);
    for (auto& w : uniq) ++df[w];
  }
  std::vector<std::string> expected;
  for (auto& [w, n] : df)
    if (n >= 2) expected.push_back(w);

  auto cfg = loose();
  cfg.min_df_docs = 2;
  auto c = ct::ingest_raw({dir.file("in.jsonl")}, {}, cfg);
  EXPECT_EQ(c.vocabulary.words, expected);
  for (std::size_t i = 0; i < expected.size(); ++i)
    EXPECT_EQ(c.vocabulary.doc_freq[i], static_cast<std::uint64_t>(df[expected[i]]));
  EXPECT_EQ(c.vocabulary.corpus_doc_count, 6u);
  // "delta alpha" keeps one token and is dropped; the rest survive.
  EXPECT_EQ(c.train_docs.size() + c.test_docs.size(), 5u);
}

TEST(IngestRaw, StopwordOnlyCorpusIsFatalAndNamesFilter) {
  TempDir dir;
  write_file(dir.file("in.jsonl"), R"({"id": "a", "text": "the the the"})" "\n");
  try {
    ct::ingest_raw({dir.file("in.jsonl")}, {"the"}, loose());
    FAIL();
  } catch (const ct::ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("stopword"), std::string::npos);
  }
}

TEST(IngestRaw, MinDfFilterNamedWhenItEmptiesCorpus) {
  TempDir dir;
  write_file(dir.file("in.jsonl"), R"({"id": "a", "text": "one two"})" "\n" R"({"id": "b", "text": "three four"})" "\n");
  auto cfg = loose();
  cfg.min_df_docs = 2;
  try {
    ct::ingest_raw({dir.file("in.jsonl")}, {}, cfg);
    FAIL();
  } catch (const ct::ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("min_df"), std::string::npos);
  }
}

TEST(IngestRaw, MalformedJsonlReportsLineNumber) {
  TempDir dir;
  write_file(dir.file("in.jsonl"), R"({"id": "a", "text": "x y"})" "\n" "{not json\n");
  try {
    ct::ingest_raw({dir.file("in.jsonl")}, {}, loose());
    FAIL();
  } catch (const ct::ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("in.jsonl:2"), std::string::npos) << e.what();
  }
}

TEST(IngestRaw, HonoursPresetSplitAndLabels) {
  TempDir dir;
  write_file(dir.file("in.jsonl"),
             R"({"id": "a", "text": "cat dog", "label": "pets", "split": "train"})" "\n"
             R"({"id": "b", "text": "cat dog cat", "label": "pets", "split": "test"})" "\n"
             R"({"id": "c", "text": "dog cat", "label": "farm", "split": "train"})" "\n");
  auto c = ct::ingest_raw({dir.file("in.jsonl")}, {}, loose());
  ASSERT_EQ(c.train_docs.size(), 2u);
  ASSERT_EQ(c.test_docs.size(), 1u);
  EXPECT_EQ(c.train_docs[1].id, "c");
  EXPECT_EQ(c.train_labels, (std::vector<std::string>{"pets", "farm"}));
  EXPECT_EQ(c.test_labels, (std::vector<std::string>{"pets"}));
}

TEST(IngestUci, DirectLoadConvertsToZeroIndexed) {
  TempDir dir;
  write_file(dir.file("docword.txt"), "2\n3\n3\n1 1 2\n1 2 1\n2 3 5\n");
  write_file(dir.file("vocab.txt"), "apple\nbanana\ncherry\n");
  auto raw = ct::load_uci(dir.file("docword.txt"), dir.file("vocab.txt"));
  ASSERT_EQ(raw.docs.size(), 2u);
  std::uint64_t t0 = 0, t1 = 0;
  for (auto [w, n] : raw.docs[0].counts) t0 += n;
  for (auto [w, n] : raw.docs[1].counts) t1 += n;
  EXPECT_EQ(t0, 3u);
  EXPECT_EQ(t1, 5u);
  EXPECT_EQ(raw.docs[1].counts[0].first, 2u);

  auto c = ct::ingest_uci(dir.file("docword.txt"), dir.file("vocab.txt"), std::nullopt, loose());
  auto s = ct::corpus_stats(c);
  EXPECT_EQ(s.train_docs + s.test_docs, 2u);
  EXPECT_EQ(s.total_tokens, 8u);
}

TEST(IngestUci, SingleLineHeaderAccepted) {
  TempDir dir;
  write_file(dir.file("docword.txt"), "2 3 3\n1 1 2\n1 2 1\n2 3 5\n");
  write_file(dir.file("vocab.txt"), "apple\nbanana\ncherry\n");
  EXPECT_EQ(ct::load_uci(dir.file("docword.txt"), dir.file("vocab.txt")).docs.size(), 2u);
}

TEST(IngestUci, OutOfRangeWordIdIsFatalWithLine) {
  TempDir dir;
  write_file(dir.file("docword.txt"), "2\n3\n2\n1 1 2\n2 4 1\n");
  write_file(dir.file("vocab.txt"), "apple\nbanana\ncherry\n");
  try {
    ct::load_uci(dir.file("docword.txt"), dir.file("vocab.txt"));
    FAIL();
  } catch (const ct::ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("2 4 1"), std::string::npos) << e.what();
  }
}

TEST(IngestUci, TripleCountMismatchIsFatal) {
  TempDir dir;
  write_file(dir.file("docword.txt"), "2\n3\n5\n1 1 2\n2 3 1\n");
  write_file(dir.file("vocab.txt"), "apple\nbanana\ncherry\n");
  EXPECT_THROW(ct::load_uci(dir.file("docword.txt"), dir.file("vocab.txt")), ct::ValidationError);
}

TEST(CorpusStats, AverageLengthOfThreeAndFiveIsFour) {
  ct::BowCorpus c;
  c.vocabulary.words = {"a", "b"};
  c.vocabulary.doc_freq = {2, 1};
  c.vocabulary.corpus_doc_count = 2;
  c.train_docs.push_back({"x", {{0, 3}}, 3});
  c.test_docs.push_back({"y", {{0, 2}, {1, 3}}, 5});
  auto s = ct::corpus_stats(c);
  EXPECT_DOUBLE_EQ(s.mean_length, 4.0);
  EXPECT_EQ(s.total_tokens, 8u);
  EXPECT_EQ(s.vocab_size, 2u);
}

TEST(CorpusArchive, RoundTripIsIdempotentAndEscapesFields) {
  TempDir dir;
  write_file(dir.file("in.jsonl"),
             R"({"id": "doc one", "text": "red blue red", "label": "-"})" "\n"
             R"({"id": "doc%two", "text": "blue green", "label": "b c"})" "\n"
             R"({"id": "3", "text": "green red blue", "label": "x"})" "\n");
  auto c = ct::ingest_raw({dir.file("in.jsonl")}, {}, loose());
  auto bytes = to_archive(c);
  std::istringstream in(bytes);
  auto back = ct::read_corpus(in);
  EXPECT_EQ(to_archive(back), bytes);
  EXPECT_EQ(back.vocabulary.words, c.vocabulary.words);
  ASSERT_EQ(back.train_docs.size(), c.train_docs.size());
  for (std::size_t i = 0; i < c.train_docs.size(); ++i) {
    EXPECT_EQ(back.train_docs[i].id, c.train_docs[i].id);
    EXPECT_EQ(back.train_docs[i].counts, c.train_docs[i].counts);
    EXPECT_EQ(back.train_docs[i].total_tokens, c.train_docs[i].total_tokens);
  }
  EXPECT_EQ(back.train_labels, c.train_labels);
  EXPECT_EQ(back.test_labels, c.test_labels);
}

TEST(CorpusArchive, RejectsUnsortedTriples) {
  std::istringstream in(
      "CONTRATOPIC-CORPUS 1\nconfig min_df_docs=1\nvocab 2 1\na 1\nb 1\ndocs 1 0\ntrain d -\ncounts 2\n0 1 1\n0 0 1\nend\n");
  EXPECT_THROW(ct::read_corpus(in), ct::ValidationError);
}

// Property: for random corpora every retained word satisfies
// min_df <= df <= max_df * D under a brute-force recount, and identical
// inputs with the same seed serialize byte-identically.
TEST(CorpusProperties, FilterSoundnessAndDeterminism) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    TempDir dir;
    const int n_docs = 30 + static_cast<int>(rng() % 30);
    const int n_words = 5 + static_cast<int>(rng() % 20);
    std::string jsonl;
    std::vector<std::set<std::string>> doc_words;
    for (int d = 0; d < n_docs; ++d) {
      std::string text;
      std::set<std::string> uniq;
      const int len = static_cast<int>(rng() % 8);
      for (int k = 0; k < len; ++k) {
        std::string w = "w" + std::string(1, static_cast<char>('a' + rng() % static_cast<unsigned>(n_words)));
        text += w + " ";
        uniq.insert(w);
      }
      doc_words.push_back(uniq);
      jsonl += R"({"id": ")" + std::to_string(d) + R"(", "text": ")" + text + "\"}\n";
    }
    write_file(dir.file("in.jsonl"), jsonl);
    ct::PreprocessConfig cfg;
    cfg.max_df_fraction = 0.3 + 0.1 * static_cast<double>(rng() % 5);
    cfg.min_df_docs = 1 + rng() % 4;
    cfg.split_seed = rng();
    try {
      auto c = ct::ingest_raw({dir.file("in.jsonl")}, {"wa"}, cfg);
      const double D = static_cast<double>(n_docs);
      for (std::size_t w = 0; w < c.vocabulary.size(); ++w) {
        std::uint64_t df = 0;
        for (auto& s : doc_words) df += s.count(c.vocabulary.words[w]);
        EXPECT_EQ(df, c.vocabulary.doc_freq[w]);
        EXPECT_GE(df, cfg.min_df_docs);
        EXPECT_LE(static_cast<double>(df), cfg.max_df_fraction * D);
        EXPECT_NE(c.vocabulary.words[w], "wa");
      }
      for (const auto* docs : {&c.train_docs, &c.test_docs})
        for (auto& d : *docs) EXPECT_GE(d.total_tokens, 2u);
      std::set<std::string> train_ids, test_ids;
      for (auto& d : c.train_docs) train_ids.insert(d.id);
      for (auto& d : c.test_docs) EXPECT_EQ(train_ids.count(d.id), 0u);
      auto again = ct::ingest_raw({dir.file("in.jsonl")}, {"wa"}, cfg);
      EXPECT_EQ(to_archive(c), to_archive(again));
    } catch (const ct::ValidationError&) {
      // Aggressive random filters may legitimately empty the corpus.
    }
  }
}
