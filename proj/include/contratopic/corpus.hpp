#pragma once

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "contratopic/error.hpp"
#include "contratopic/hash.hpp"
#include "contratopic/rng.hpp"

namespace contratopic {

using WordId = std::uint32_t;

struct PreprocessConfig {
  double max_df_fraction = 0.70;
  std::uint64_t min_df_docs = 100;
  /// Fraction of documents assigned to the training split when the input
  /// does not carry its own split.
  double train_fraction = 0.6;
  std::uint64_t split_seed = 0;

  void validate() const {
    if (!(max_df_fraction > 0.0 && max_df_fraction <= 1.0))
      throw ValidationError("max_df_fraction must be in (0, 1], got " + std::to_string(max_df_fraction));
    if (!(train_fraction > 0.0 && train_fraction < 1.0))
      throw ValidationError("train_fraction must be in (0, 1), got " + std::to_string(train_fraction));
  }
};

struct Vocabulary {
  std::vector<std::string> words;
  std::vector<std::uint64_t> doc_freq;
  std::uint64_t corpus_doc_count = 0;

  std::size_t size() const { return words.size(); }

  std::optional<WordId> index_of(std::string_view w) const {
    if (index_.size() != words.size()) rebuild_index();
    auto it = index_.find(std::string(w));
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  /// Digest over word order and document frequencies.
  std::string hash() const {
    Fnv1a h;
    for (std::size_t i = 0; i < words.size(); ++i) {
      h.update(words[i]);
      h.update("\t");
      h.update(std::to_string(doc_freq[i]));
      h.update("\n");
    }
    h.update(std::to_string(corpus_doc_count));
    return h.hex();
  }

 private:
  void rebuild_index() const {
    index_.clear();
    for (std::size_t i = 0; i < words.size(); ++i) index_.emplace(words[i], static_cast<WordId>(i));
  }
  mutable std::unordered_map<std::string, WordId> index_;
};

struct BowDocument {
  std::string id;
  /// Sorted by word index, counts strictly positive.
  std::vector<std::pair<WordId, std::uint32_t>> counts;
  std::uint64_t total_tokens = 0;
};

struct BowCorpus {
  PreprocessConfig config;
  Vocabulary vocabulary;
  std::vector<BowDocument> train_docs;
  std::vector<BowDocument> test_docs;
  /// Empty when the corpus is unlabelled, otherwise parallel to the doc lists.
  std::vector<std::string> train_labels;
  std::vector<std::string> test_labels;

  bool has_labels() const { return !train_labels.empty() || !test_labels.empty(); }
};

struct StatsSummary {
  std::size_t train_docs = 0;
  std::size_t test_docs = 0;
  std::size_t vocab_size = 0;
  std::uint64_t total_tokens = 0;
  double mean_length = 0.0;
};

enum class Split { train, test };

/// A document after tokenization but before vocabulary filtering. Word ids
/// index into the caller's staging word list.
struct StagedDocument {
  std::string id;
  std::vector<std::pair<WordId, std::uint32_t>> counts;
  std::optional<std::string> label;
  std::optional<Split> split;
};

// ---------------------------------------------------------------------------
// Tokenization

/// Lowercase and split on runs of non-alphabetic ASCII characters.
inline std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  for (unsigned char c : text) {
    if (std::isalpha(c) && c < 128) {
      cur.push_back(static_cast<char>(std::tolower(c)));
    } else if (!cur.empty()) {
      out.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

inline std::unordered_set<std::string> load_stopwords(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open stopword list: " + path);
  std::unordered_set<std::string> out;
  std::string line;
  while (std::getline(in, line)) {
    for (auto& tok : tokenize(line)) out.insert(tok);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Filtering pipeline shared by every ingestion route.

namespace detail {

inline void sort_counts(std::vector<std::pair<WordId, std::uint32_t>>& c) {
  std::sort(c.begin(), c.end());
  std::size_t w = 0;
  for (std::size_t r = 0; r < c.size(); ++r) {
    if (w > 0 && c[w - 1].first == c[r].first) {
      c[w - 1].second += c[r].second;
    } else {
      c[w++] = c[r];
    }
  }
  c.resize(w);
}

}  // namespace detail

/// Apply stopword removal, max-df, min-df and the short-document filter to
/// staged documents, then split into train and test.
///
/// Document frequencies are computed once, after stopword removal, over all
/// staged documents (D = number of staged documents). The retained
/// vocabulary is ordered lexicographically.
inline BowCorpus build_corpus(const std::vector<std::string>& staging_words,
                              std::vector<StagedDocument> docs,
                              const std::unordered_set<std::string>& stopwords,
                              const PreprocessConfig& cfg) {
  cfg.validate();
  const std::size_t n_staged = staging_words.size();
  if (docs.empty()) throw ValidationError("empty corpus: no input documents");

  std::vector<bool> is_stop(n_staged, false);
  for (std::size_t w = 0; w < n_staged; ++w) is_stop[w] = stopwords.count(staging_words[w]) > 0;

  std::vector<std::uint64_t> df(n_staged, 0);
  bool any_token = false;
  for (auto& d : docs) {
    detail::sort_counts(d.counts);
    for (auto [w, c] : d.counts) {
      if (w >= n_staged) throw ValidationError("internal: staged word id out of range");
      if (is_stop[w] || c == 0) continue;
      ++df[w];
      any_token = true;
    }
  }
  if (!any_token) throw ValidationError("empty corpus after filtering: stopword filter removed every token");

  const double D = static_cast<double>(docs.size());
  const double max_df = cfg.max_df_fraction * D;
  bool any_after_max = false;
  std::vector<std::size_t> kept;
  for (std::size_t w = 0; w < n_staged; ++w) {
    if (is_stop[w] || df[w] == 0) continue;
    if (static_cast<double>(df[w]) > max_df) continue;
    any_after_max = true;
    if (df[w] < cfg.min_df_docs) continue;
    kept.push_back(w);
  }
  if (!any_after_max) throw ValidationError("empty corpus after filtering: max_df filter removed every word");
  if (kept.empty()) throw ValidationError("empty corpus after filtering: min_df filter removed every word");

  std::sort(kept.begin(), kept.end(),
            [&](std::size_t a, std::size_t b) { return staging_words[a] < staging_words[b]; });
  constexpr WordId none = ~WordId{0};
  std::vector<WordId> remap(n_staged, none);
  BowCorpus corpus;
  corpus.config = cfg;
  corpus.vocabulary.corpus_doc_count = docs.size();
  for (std::size_t i = 0; i < kept.size(); ++i) {
    if (i > 0 && staging_words[kept[i]] == staging_words[kept[i - 1]])
      throw ValidationError("duplicate vocabulary word: " + staging_words[kept[i]]);
    remap[kept[i]] = static_cast<WordId>(i);
    corpus.vocabulary.words.push_back(staging_words[kept[i]]);
    corpus.vocabulary.doc_freq.push_back(df[kept[i]]);
  }

  struct Kept {
    BowDocument doc;
    std::optional<std::string> label;
    std::optional<Split> split;
  };
  std::vector<Kept> survivors;
  std::unordered_set<std::string> ids;
  for (auto& d : docs) {
    if (!ids.insert(d.id).second) throw ValidationError("duplicate document id: " + d.id);
    BowDocument bd;
    bd.id = d.id;
    for (auto [w, c] : d.counts) {
      if (remap[w] == none || c == 0) continue;
      bd.counts.emplace_back(remap[w], c);
      bd.total_tokens += c;
    }
    if (bd.total_tokens < 2) continue;
    std::sort(bd.counts.begin(), bd.counts.end());
    survivors.push_back({std::move(bd), std::move(d.label), d.split});
  }
  if (survivors.empty())
    throw ValidationError("empty corpus after filtering: every document is shorter than two tokens");

  const bool labelled = std::any_of(survivors.begin(), survivors.end(), [](const Kept& k) { return k.label.has_value(); });
  if (labelled && !std::all_of(survivors.begin(), survivors.end(), [](const Kept& k) { return k.label.has_value(); }))
    throw ValidationError("labels must be present for every document or for none");
  const bool presplit = std::any_of(survivors.begin(), survivors.end(), [](const Kept& k) { return k.split.has_value(); });
  if (presplit && !std::all_of(survivors.begin(), survivors.end(), [](const Kept& k) { return k.split.has_value(); }))
    throw ValidationError("split field must be present for every document or for none");

  std::vector<Split> assignment(survivors.size(), Split::test);
  if (presplit) {
    for (std::size_t i = 0; i < survivors.size(); ++i) assignment[i] = *survivors[i].split;
  } else {
    std::vector<std::size_t> order(survivors.size());
    std::iota(order.begin(), order.end(), 0);
    auto rng = make_rng(cfg.split_seed, Stream::split);
    shuffle(order, rng);
    auto n_train = static_cast<std::size_t>(std::llround(cfg.train_fraction * static_cast<double>(survivors.size())));
    n_train = std::clamp<std::size_t>(n_train, 1, survivors.size() > 1 ? survivors.size() - 1 : 1);
    for (std::size_t i = 0; i < n_train; ++i) assignment[order[i]] = Split::train;
  }
  for (std::size_t i = 0; i < survivors.size(); ++i) {
    auto& k = survivors[i];
    if (assignment[i] == Split::train) {
      corpus.train_docs.push_back(std::move(k.doc));
      if (labelled) corpus.train_labels.push_back(*k.label);
    } else {
      corpus.test_docs.push_back(std::move(k.doc));
      if (labelled) corpus.test_labels.push_back(*k.label);
    }
  }
  return corpus;
}

// ---------------------------------------------------------------------------
// Raw text ingestion

/// Builds a staging vocabulary while tokenizing documents.
class StagingVocabulary {
 public:
  WordId intern(const std::string& w) {
    auto [it, inserted] = index_.emplace(w, static_cast<WordId>(words_.size()));
    if (inserted) words_.push_back(w);
    return it->second;
  }
  const std::vector<std::string>& words() const { return words_; }

 private:
  std::unordered_map<std::string, WordId> index_;
  std::vector<std::string> words_;
};

inline StagedDocument stage_text(StagingVocabulary& staging, std::string id, std::string_view text) {
  StagedDocument d;
  d.id = std::move(id);
  std::map<WordId, std::uint32_t> counts;
  for (auto& tok : tokenize(text)) ++counts[staging.intern(tok)];
  d.counts.assign(counts.begin(), counts.end());
  return d;
}

/// Read a JSONL file with one {"id": ..., "text": ...} object per line.
/// Optional string fields "label" and "split" ("train"/"test") are honoured.
inline void read_jsonl(const std::string& path, StagingVocabulary& staging, std::vector<StagedDocument>& out) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open input file: " + path);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw ValidationError(path + ":" + std::to_string(lineno) + ": malformed JSONL line: " + e.what());
    }
    auto where = [&] { return path + ":" + std::to_string(lineno) + ": "; };
    if (!j.is_object() || !j.contains("id") || !j.contains("text") || !j["text"].is_string())
      throw ValidationError(where() + "malformed JSONL line: expected object with string fields \"id\" and \"text\"");
    std::string id = j["id"].is_string() ? j["id"].get<std::string>() : j["id"].dump();
    if (id.empty()) throw ValidationError(where() + "empty document id");
    auto doc = stage_text(staging, std::move(id), j["text"].get<std::string>());
    if (j.contains("label")) {
      doc.label = j["label"].is_string() ? j["label"].get<std::string>() : j["label"].dump();
      if (doc.label->empty()) throw ValidationError(where() + "empty label");
    }
    if (j.contains("split")) {
      auto s = j["split"].get<std::string>();
      if (s == "train") doc.split = Split::train;
      else if (s == "test") doc.split = Split::test;
      else throw ValidationError(where() + "split must be \"train\" or \"test\", got \"" + s + "\"");
    }
    out.push_back(std::move(doc));
  }
}

/// Tokenize, filter and split raw documents. Paths ending in ".jsonl" are
/// read as JSONL; any other path is one plain-text document whose id is
/// the path.
inline BowCorpus ingest_raw(const std::vector<std::string>& paths,
                            const std::unordered_set<std::string>& stopwords,
                            const PreprocessConfig& cfg) {
  StagingVocabulary staging;
  std::vector<StagedDocument> docs;
  for (const auto& p : paths) {
    if (p.size() >= 6 && p.compare(p.size() - 6, 6, ".jsonl") == 0) {
      read_jsonl(p, staging, docs);
    } else {
      std::ifstream in(p, std::ios::binary);
      if (!in) throw ValidationError("cannot open input file: " + p);
      std::stringstream ss;
      ss << in.rdbuf();
      docs.push_back(stage_text(staging, p, ss.str()));
    }
  }
  return build_corpus(staging.words(), std::move(docs), stopwords, cfg);
}

// ---------------------------------------------------------------------------
// UCI bag-of-words ingestion

struct UciCounts {
  std::vector<std::string> words;
  std::vector<StagedDocument> docs;
};

/// Load a UCI docword/vocab pair without filtering. Ids in the file are
/// 1-indexed and converted to 0-indexed.
inline UciCounts load_uci(const std::string& docword_path, const std::string& vocab_path,
                          const std::optional<std::string>& labels_path = std::nullopt) {
  UciCounts out;
  {
    std::ifstream in(vocab_path);
    if (!in) throw ValidationError("cannot open vocab file: " + vocab_path);
    std::string line;
    while (std::getline(in, line)) {
      while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
      out.words.push_back(line);
    }
  }
  std::ifstream in(docword_path);
  if (!in) throw ValidationError("cannot open docword file: " + docword_path);
  std::uint64_t D = 0, V = 0, NNZ = 0;
  std::string line;
  std::size_t lineno = 0;
  std::vector<std::uint64_t> header;
  while (header.size() < 3 && std::getline(in, line)) {
    ++lineno;
    std::istringstream ls(line);
    std::uint64_t v;
    while (ls >> v) header.push_back(v);
  }
  if (header.size() != 3) throw ValidationError(docword_path + ": header must contain D, V and NNZ");
  D = header[0], V = header[1], NNZ = header[2];
  if (V != out.words.size())
    throw ValidationError(docword_path + ": header V=" + std::to_string(V) + " but vocab file has " +
                          std::to_string(out.words.size()) + " words");
  out.docs.resize(D);
  for (std::uint64_t d = 0; d < D; ++d) out.docs[d].id = std::to_string(d + 1);
  std::uint64_t seen = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::istringstream ls(line);
    long long doc = 0, word = 0, count = 0;
    if (!(ls >> doc >> word >> count))
      throw ValidationError(docword_path + ":" + std::to_string(lineno) + ": malformed triple: " + line);
    if (word < 1 || static_cast<std::uint64_t>(word) > V)
      throw ValidationError(docword_path + ":" + std::to_string(lineno) + ": word id " + std::to_string(word) +
                            " out of range [1, " + std::to_string(V) + "]: " + line);
    if (doc < 1 || static_cast<std::uint64_t>(doc) > D)
      throw ValidationError(docword_path + ":" + std::to_string(lineno) + ": doc id " + std::to_string(doc) +
                            " out of range [1, " + std::to_string(D) + "]: " + line);
    if (count < 0)
      throw ValidationError(docword_path + ":" + std::to_string(lineno) + ": negative count: " + line);
    out.docs[static_cast<std::size_t>(doc - 1)].counts.emplace_back(static_cast<WordId>(word - 1),
                                                                    static_cast<std::uint32_t>(count));
    ++seen;
  }
  if (seen != NNZ)
    throw ValidationError(docword_path + ": header declares " + std::to_string(NNZ) + " triples but file has " +
                          std::to_string(seen));
  for (auto& d : out.docs) detail::sort_counts(d.counts);
  if (labels_path) {
    std::ifstream lin(*labels_path);
    if (!lin) throw ValidationError("cannot open labels file: " + *labels_path);
    std::size_t i = 0;
    while (std::getline(lin, line)) {
      while (!line.empty() && line.back() == '\r') line.pop_back();
      if (i >= out.docs.size()) throw ValidationError(*labels_path + ": more labels than documents");
      out.docs[i++].label = line;
    }
    if (i != out.docs.size()) throw ValidationError(*labels_path + ": fewer labels than documents");
  }
  return out;
}

inline BowCorpus ingest_uci(const std::string& docword_path, const std::string& vocab_path,
                            const std::optional<std::string>& labels_path, const PreprocessConfig& cfg,
                            const std::unordered_set<std::string>& stopwords = {}) {
  auto raw = load_uci(docword_path, vocab_path, labels_path);
  return build_corpus(raw.words, std::move(raw.docs), stopwords, cfg);
}

// ---------------------------------------------------------------------------
// Statistics

inline StatsSummary corpus_stats(const BowCorpus& c) {
  StatsSummary s;
  s.train_docs = c.train_docs.size();
  s.test_docs = c.test_docs.size();
  s.vocab_size = c.vocabulary.size();
  for (const auto* docs : {&c.train_docs, &c.test_docs})
    for (const auto& d : *docs) s.total_tokens += d.total_tokens;
  const auto n = s.train_docs + s.test_docs;
  s.mean_length = n ? static_cast<double>(s.total_tokens) / static_cast<double>(n) : 0.0;
  return s;
}

// ---------------------------------------------------------------------------
// Archive format (see docs/formats.md)

namespace detail {

inline std::string escape_field(std::string_view s) {
  if (s.empty()) throw ValidationError("cannot serialize empty field");
  std::string out;
  for (unsigned char c : s) {
    if (c <= 0x20 || c == '%' || c == 0x7f || (s.size() == 1 && c == '-')) {
      char buf[4];
      std::snprintf(buf, sizeof(buf), "%%%02X", c);
      out += buf;
    } else {
      out.push_back(static_cast<char>(c));
    }
  }
  return out;
}

inline std::string unescape_field(std::string_view s) {
  std::string out;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '%' && i + 2 < s.size()) {
      out.push_back(static_cast<char>(std::stoi(std::string(s.substr(i + 1, 2)), nullptr, 16)));
      i += 2;
    } else {
      out.push_back(s[i]);
    }
  }
  return out;
}

inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace detail

inline void write_corpus(std::ostream& out, const BowCorpus& c) {
  const auto& v = c.vocabulary;
  out << "CONTRATOPIC-CORPUS 1\n";
  out << "config max_df_fraction=" << detail::format_double(c.config.max_df_fraction)
      << " min_df_docs=" << c.config.min_df_docs
      << " train_fraction=" << detail::format_double(c.config.train_fraction)
      << " split_seed=" << c.config.split_seed << "\n";
  out << "vocab " << v.size() << " " << v.corpus_doc_count << "\n";
  for (std::size_t i = 0; i < v.size(); ++i) out << detail::escape_field(v.words[i]) << " " << v.doc_freq[i] << "\n";
  const bool labelled = c.has_labels();
  out << "docs " << c.train_docs.size() + c.test_docs.size() << " " << (labelled ? 1 : 0) << "\n";
  std::uint64_t nnz = 0;
  auto emit_docs = [&](const std::vector<BowDocument>& docs, const std::vector<std::string>& labels, const char* split) {
    for (std::size_t i = 0; i < docs.size(); ++i) {
      out << split << " " << detail::escape_field(docs[i].id) << " "
          << (labelled ? detail::escape_field(labels[i]) : std::string("-")) << "\n";
      nnz += docs[i].counts.size();
    }
  };
  emit_docs(c.train_docs, c.train_labels, "train");
  emit_docs(c.test_docs, c.test_labels, "test");
  out << "counts " << nnz << "\n";
  std::size_t di = 0;
  for (const auto* docs : {&c.train_docs, &c.test_docs}) {
    for (const auto& d : *docs) {
      for (auto [w, n] : d.counts) out << di << " " << w << " " << n << "\n";
      ++di;
    }
  }
  out << "end\n";
}

inline void save_corpus(const std::string& path, const BowCorpus& c) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write corpus archive: " + path);
  write_corpus(out, c);
  if (!out) throw ValidationError("failed writing corpus archive: " + path);
}

inline BowCorpus read_corpus(std::istream& in, const std::string& name = "<stream>") {
  std::string line;
  std::size_t lineno = 0;
  auto fail = [&](const std::string& msg) -> ValidationError {
    return ValidationError(name + ":" + std::to_string(lineno) + ": " + msg);
  };
  auto next = [&]() -> std::istringstream {
    if (!std::getline(in, line)) throw fail("unexpected end of archive");
    ++lineno;
    return std::istringstream(line);
  };
  BowCorpus c;
  {
    auto ls = next();
    std::string magic;
    int version = 0;
    ls >> magic >> version;
    if (magic != "CONTRATOPIC-CORPUS") throw fail("not a corpus archive");
    if (version != 1) throw fail("unsupported corpus archive version " + std::to_string(version));
  }
  {
    auto ls = next();
    std::string tag, kv;
    ls >> tag;
    if (tag != "config") throw fail("expected config line");
    while (ls >> kv) {
      auto eq = kv.find('=');
      if (eq == std::string::npos) throw fail("malformed config entry " + kv);
      auto key = kv.substr(0, eq), val = kv.substr(eq + 1);
      if (key == "max_df_fraction") c.config.max_df_fraction = std::stod(val);
      else if (key == "min_df_docs") c.config.min_df_docs = std::stoull(val);
      else if (key == "train_fraction") c.config.train_fraction = std::stod(val);
      else if (key == "split_seed") c.config.split_seed = std::stoull(val);
      else throw fail("unknown config key " + key);
    }
  }
  std::size_t V = 0;
  {
    auto ls = next();
    std::string tag;
    if (!(ls >> tag >> V >> c.vocabulary.corpus_doc_count) || tag != "vocab") throw fail("expected vocab line");
    for (std::size_t i = 0; i < V; ++i) {
      auto ws = next();
      std::string w;
      std::uint64_t df = 0;
      if (!(ws >> w >> df)) throw fail("malformed vocabulary line");
      c.vocabulary.words.push_back(detail::unescape_field(w));
      c.vocabulary.doc_freq.push_back(df);
    }
  }
  std::size_t N = 0;
  int labelled = 0;
  std::vector<std::pair<Split, std::size_t>> where;
  {
    auto ls = next();
    std::string tag;
    if (!(ls >> tag >> N >> labelled) || tag != "docs") throw fail("expected docs line");
    for (std::size_t i = 0; i < N; ++i) {
      auto ds = next();
      std::string split, id, label;
      if (!(ds >> split >> id >> label)) throw fail("malformed document line");
      BowDocument d;
      d.id = detail::unescape_field(id);
      if (split == "train") {
        where.emplace_back(Split::train, c.train_docs.size());
        c.train_docs.push_back(std::move(d));
        if (labelled) c.train_labels.push_back(detail::unescape_field(label));
      } else if (split == "test") {
        where.emplace_back(Split::test, c.test_docs.size());
        c.test_docs.push_back(std::move(d));
        if (labelled) c.test_labels.push_back(detail::unescape_field(label));
      } else {
        throw fail("unknown split " + split);
      }
    }
  }
  {
    auto ls = next();
    std::string tag;
    std::uint64_t nnz = 0;
    if (!(ls >> tag >> nnz) || tag != "counts") throw fail("expected counts line");
    std::size_t prev_doc = 0;
    long long prev_word = -1;
    for (std::uint64_t i = 0; i < nnz; ++i) {
      auto cs = next();
      std::size_t di = 0, w = 0;
      std::uint32_t n = 0;
      if (!(cs >> di >> w >> n)) throw fail("malformed count triple");
      if (di >= N || w >= V || n == 0) throw fail("count triple out of range");
      if (di < prev_doc || (di == prev_doc && static_cast<long long>(w) <= prev_word))
        throw fail("count triples not sorted");
      if (di != prev_doc) prev_word = -1;
      prev_doc = di;
      prev_word = static_cast<long long>(w);
      auto [split, idx] = where[di];
      auto& d = split == Split::train ? c.train_docs[idx] : c.test_docs[idx];
      d.counts.emplace_back(static_cast<WordId>(w), n);
      d.total_tokens += n;
    }
  }
  {
    auto ls = next();
    std::string tag;
    ls >> tag;
    if (tag != "end") throw fail("expected end marker");
  }
  return c;
}

inline BowCorpus load_corpus(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open corpus archive: " + path);
  return read_corpus(in, path);
}

}  // namespace contratopic
