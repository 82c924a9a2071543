// contratopic: command line pipeline
//   preprocess -> npmi -> train -> eval -> topics / intrusion -> report
// Every command reads upstream artifacts by path, checks them against the
// manifests written next to them, and writes its own outputs plus a manifest.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "contratopic/contratopic.hpp"

namespace ct = contratopic;
namespace fs = std::filesystem;

namespace {

unsigned g_threads = 1;

void log(const std::string& msg) { std::cerr << msg << "\n"; }

std::string short_num(double v) {
  std::ostringstream s;
  s << v;
  return s.str();
}

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw ct::ValidationError("cannot create output directory " + dir + ": " + ec.message());
}

std::string join(const std::string& dir, const std::string& name) { return (fs::path(dir) / name).string(); }

void ensure_parent(const std::string& file) {
  const auto parent = fs::path(file).parent_path();
  if (!parent.empty()) ensure_dir(parent.string());
}

template <class F>
void write_text(const std::string& path, F&& fill) {
  ensure_parent(path);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ct::ValidationError("cannot write " + path);
  fill(out);
  if (!out) throw ct::ValidationError("failed writing " + path);
}

ct::RunManifest begin_manifest(const std::string& command) {
  ct::RunManifest m;
  m.command = command;
  m.started = ct::utc_timestamp();
  return m;
}

void finish_manifest(ct::RunManifest& m, const std::string& primary) {
  m.finished = ct::utc_timestamp();
  ct::write_manifest(ct::manifest_path_for(primary), m);
}

/// Load the corpus archive after checking it against its manifest.
ct::BowCorpus load_checked_corpus(const std::string& path) {
  ct::verified_manifest(path);
  return ct::load_corpus(path);
}

/// Role recorded for `path` in its producer's manifest ("" when unknown).
std::string recorded_role(const std::optional<ct::RunManifest>& m, const std::string& path) {
  if (!m) return "";
  const auto name = fs::path(path).filename().string();
  for (const auto& o : m->outputs)
    if (fs::path(o.path).filename().string() == name) return o.role;
  return "";
}

/// NPMI matrix for `split` ("train" or "test") checked against the corpus.
ct::NpmiMatrix load_checked_npmi(const std::string& path, const std::string& split, const ct::BowCorpus& corpus,
                                 const std::string& corpus_path) {
  const auto m = ct::verified_manifest(path);
  if (m && !m->vocab_hash.empty() && m->vocab_hash != corpus.vocabulary.hash())
    throw ct::ArtifactMismatch(path + " was built for vocabulary " + m->vocab_hash + " but " + corpus_path + " has vocabulary " +
                               corpus.vocabulary.hash());
  const auto role = recorded_role(m, path);
  if (!role.empty() && role != "npmi_" + split)
    throw ct::ArtifactMismatch(path + " is the " + role + " matrix; this command needs the " + split + "-split matrix of " + corpus_path);
  auto npmi = ct::load_npmi(path, split == "train" ? ct::NpmiSource::train : ct::NpmiSource::test);
  const auto docs = split == "train" ? corpus.train_docs.size() : corpus.test_docs.size();
  if (npmi.size() != corpus.vocabulary.size() || npmi.doc_count() != docs)
    throw ct::ArtifactMismatch(path + " covers " + std::to_string(npmi.size()) + " words over " + std::to_string(npmi.doc_count()) +
                               " documents, but " + corpus_path + " has " + std::to_string(corpus.vocabulary.size()) + " words and " +
                               std::to_string(docs) + " " + split + " documents");
  return npmi;
}

ct::TrainConfig config_from_header(const ct::CheckpointHeader& h) {
  ct::TrainConfig c;
  for (const auto& [k, v] : h.config) ct::set_config_value(c, k, v);
  return c;
}

void check_checkpoint_vocab(const ct::CheckpointHeader& h, const std::string& ckpt, const ct::BowCorpus& corpus, const std::string& corpus_path) {
  if (h.vocab_hash != corpus.vocabulary.hash())
    throw ct::ArtifactMismatch(ckpt + " has vocabulary " + h.vocab_hash + " but " + corpus_path + " has vocabulary " + corpus.vocabulary.hash());
}

/// Run `f.template operator()<T>()` with T matching the checkpoint precision.
template <class F>
void with_precision(const std::string& precision, F&& f) {
  if (precision == "single") {
    f.template operator()<float>();
  } else {
    f.template operator()<double>();
  }
}

// ---------------------------------------------------------------- preprocess

struct PreprocessArgs {
  std::vector<std::string> inputs;
  std::string format = "jsonl";
  std::string vocab_file;
  std::string labels_file;
  std::string stopwords;
  double max_df = 0.70;
  std::uint64_t min_df = 100;
  double split = 0.6;
  std::uint64_t seed = 0;
  std::string out;
};

void cmd_preprocess(const PreprocessArgs& a) {
  ct::PreprocessConfig cfg;
  cfg.max_df_fraction = a.max_df;
  cfg.min_df_docs = a.min_df;
  cfg.train_fraction = a.split;
  cfg.split_seed = a.seed;
  cfg.validate();
  auto m = begin_manifest("preprocess");
  std::unordered_set<std::string> stop;
  if (!a.stopwords.empty()) {
    stop = ct::load_stopwords(a.stopwords);
    m.add_input("stopwords", a.stopwords);
  }
  ct::BowCorpus corpus;
  if (a.format == "uci") {
    if (a.inputs.size() != 1 || a.vocab_file.empty()) throw ct::ValidationError("--format uci needs one --input docword file and --vocab-file");
    std::optional<std::string> labels;
    if (!a.labels_file.empty()) labels = a.labels_file;
    corpus = ct::ingest_uci(a.inputs[0], a.vocab_file, labels, cfg, stop);
    m.add_input("docword", a.inputs[0]);
    m.add_input("vocab", a.vocab_file);
    if (labels) m.add_input("labels", *labels);
  } else {
    corpus = ct::ingest_raw(a.inputs, stop, cfg);
    for (const auto& p : a.inputs) m.add_input("input", p);
  }
  ensure_parent(a.out);
  ct::save_corpus(a.out, corpus);
  const auto s = ct::corpus_stats(corpus);
  log("corpus: " + std::to_string(s.train_docs) + " train / " + std::to_string(s.test_docs) + " test documents, vocabulary " +
      std::to_string(s.vocab_size) + ", mean length " + short_num(s.mean_length));
  m.vocab_hash = corpus.vocabulary.hash();
  m.add_output("corpus", a.out);
  finish_manifest(m, a.out);
}

// ---------------------------------------------------------------------- npmi

void cmd_npmi(const std::string& corpus_path, const std::string& out_train, const std::string& out_test) {
  auto corpus = load_checked_corpus(corpus_path);
  auto m = begin_manifest("npmi");
  m.add_input("corpus", corpus_path);
  m.vocab_hash = corpus.vocabulary.hash();
  // The train matrix drives the regularizer and must cover every word; the
  // test matrix only scores top words and may leave some unseen.
  auto train = ct::build_npmi(corpus.train_docs, corpus.vocabulary, ct::NpmiSource::train, true, g_threads);
  ensure_parent(out_train);
  ct::save_npmi(out_train, train);
  m.add_output("npmi_train", out_train);
  if (!out_test.empty()) {
    if (corpus.test_docs.empty()) throw ct::ValidationError(corpus_path + " has no test documents for --out-test");
    auto test = ct::build_npmi(corpus.test_docs, corpus.vocabulary, ct::NpmiSource::test, false, g_threads);
    ensure_parent(out_test);
    ct::save_npmi(out_test, test);
    m.add_output("npmi_test", out_test);
  }
  log("npmi: " + std::to_string(train.stored_pairs()) + " co-occurring train pairs");
  finish_manifest(m, out_train);
  if (!out_test.empty()) finish_manifest(m, out_test);
}

// --------------------------------------------------------------------- train

struct TrainArgs {
  std::string corpus, npmi, config, out;
  std::vector<std::string> set;
  bool resume = false;
  bool quiet = false;
};

void cmd_train(const TrainArgs& a) {
  ct::TrainConfig cfg;
  if (!a.config.empty()) cfg = ct::load_train_config(a.config);
  for (const auto& kv : a.set) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw ct::ValidationError("--set expects key=value, got '" + kv + "'");
    ct::set_config_value(cfg, ct::detail::trim(kv.substr(0, eq)), ct::detail::trim(kv.substr(eq + 1)));
  }
  cfg.validate();
  auto corpus = load_checked_corpus(a.corpus);
  auto npmi = load_checked_npmi(a.npmi, "train", corpus, a.corpus);
  ensure_dir(a.out);
  const auto ckpt = join(a.out, "checkpoint.bin");
  ct::TrainOptions opt;
  opt.checkpoint_path = ckpt;
  if (a.resume) {
    if (!fs::exists(ckpt)) throw ct::ValidationError("--resume given but " + ckpt + " does not exist");
    ct::verified_manifest(ckpt);
    opt.resume_from = ckpt;
  }
  if (!a.quiet)
    opt.on_epoch = [&](const ct::EpochRecord& r) {
      std::ostringstream s;
      s << "epoch " << r.epoch << "/" << cfg.epochs << " rec " << r.rec << " kl " << r.kl << " con " << r.con << " total " << r.total
        << " within_npmi " << r.diag.within_npmi << " (" << r.wall_seconds << " s)";
      log(s.str());
    };
  auto m = begin_manifest("train");
  m.add_input("corpus", a.corpus);
  m.add_input("npmi_train", a.npmi);
  if (!cfg.embedding_path.empty()) m.add_input("embeddings", cfg.embedding_path);
  if (a.resume) m.add_input("resume_checkpoint", ckpt);
  m.config_hashes.emplace_back("train", ct::config_hash(cfg));
  m.vocab_hash = corpus.vocabulary.hash();

  ct::TrainLog log_out;
  std::vector<ct::TopicWords> topics;
  auto run = [&]<class T>() {
    auto res = ct::train<T>(corpus, npmi, cfg, opt);
    log_out = res.log;
    topics = ct::export_topics(res.params, corpus.vocabulary, std::min<std::size_t>(10, corpus.vocabulary.size()), cfg.tau_beta);
  };
  with_precision(ct::to_string(cfg.precision), run);

  const auto log_path = join(a.out, "train_log.csv"), timing = join(a.out, "timing.csv");
  const auto cfg_path = join(a.out, "config.txt"), topics_path = join(a.out, "topics.tsv");
  write_text(log_path, [&](std::ostream& o) { log_out.write_csv(o); });
  write_text(timing, [&](std::ostream& o) { log_out.write_timing_csv(o); });
  write_text(cfg_path, [&](std::ostream& o) { o << ct::format_train_config(cfg); });
  write_text(topics_path, [&](std::ostream& o) { ct::write_topics_tsv(o, topics); });
  m.add_output("checkpoint", ckpt);
  m.add_output("train_log", log_path);
  m.add_output("config", cfg_path);
  m.add_output("topics", topics_path);
  finish_manifest(m, ckpt);
}

// ---------------------------------------------------------------------- eval

struct EvalArgs {
  std::string corpus, checkpoint, npmi, out;
  std::size_t k_tc = 10, k_td = 25, restarts = 10;
  std::vector<double> percentages;
  std::vector<std::size_t> clusters;
  std::uint64_t seed = 0;
  std::string nmi = "arithmetic";
};

void cmd_eval(const EvalArgs& a) {
  ct::EvalConfig ecfg;
  ecfg.k_tc = a.k_tc;
  ecfg.k_td = a.k_td;
  if (!a.percentages.empty()) ecfg.percentages = a.percentages;
  if (!a.clusters.empty()) ecfg.cluster_counts = a.clusters;
  ecfg.kmeans.restarts = a.restarts;
  ecfg.kmeans.seed = a.seed;
  ecfg.nmi = ct::parse_nmi_normalization(a.nmi);
  ecfg.validate();
  auto corpus = load_checked_corpus(a.corpus);
  ct::verified_manifest(a.checkpoint);
  const auto header = ct::peek_checkpoint(a.checkpoint);
  check_checkpoint_vocab(header, a.checkpoint, corpus, a.corpus);
  const auto tcfg = config_from_header(header);
  auto npmi = load_checked_npmi(a.npmi, "test", corpus, a.corpus);
  if (!corpus.has_labels()) {
    log("clustering skipped: no labels in " + a.corpus);
    ecfg.cluster_counts.clear();
  }
  ct::EvalReport report;
  with_precision(header.precision, [&]<class T>() {
    auto st = ct::load_checkpoint<T>(a.checkpoint);
    report = ct::evaluate(st.params, corpus, npmi, tcfg.tau_beta, ecfg);
  });
  ensure_dir(a.out);
  const auto json_path = join(a.out, "report.json"), curves = join(a.out, "curves.csv");
  const auto clustering = join(a.out, "clustering.csv"), md = join(a.out, "report.md");
  write_text(json_path, [&](std::ostream& o) { o << ct::report_json(report).dump(2) << "\n"; });
  write_text(curves, [&](std::ostream& o) { ct::write_curves_csv(o, report); });
  write_text(clustering, [&](std::ostream& o) { ct::write_clustering_csv(o, report); });
  write_text(md, [&](std::ostream& o) { ct::write_report_markdown(o, report); });
  auto m = begin_manifest("eval");
  m.add_input("corpus", a.corpus);
  m.add_input("checkpoint", a.checkpoint);
  m.add_input("npmi_test", a.npmi);
  m.config_hashes.emplace_back("train", header.config_hash);
  m.vocab_hash = header.vocab_hash;
  m.add_output("report", json_path);
  m.add_output("curves", curves);
  m.add_output("clustering", clustering);
  m.add_output("markdown", md);
  finish_manifest(m, json_path);
  const auto& c = report.coherence_curve;
  log("coherence at " + short_num(c.front().percentage) + "%: " + short_num(c.front().value) + ", at " + short_num(c.back().percentage) +
      "%: " + short_num(c.back().value));
}

// -------------------------------------------------------------------- topics

void cmd_topics(const std::string& corpus_path, const std::string& checkpoint, std::size_t top, const std::string& out) {
  auto corpus = load_checked_corpus(corpus_path);
  ct::verified_manifest(checkpoint);
  const auto header = ct::peek_checkpoint(checkpoint);
  check_checkpoint_vocab(header, checkpoint, corpus, corpus_path);
  const auto tcfg = config_from_header(header);
  std::vector<ct::TopicWords> topics;
  with_precision(header.precision, [&]<class T>() {
    auto st = ct::load_checkpoint<T>(checkpoint);
    topics = ct::export_topics(st.params, corpus.vocabulary, top, tcfg.tau_beta);
  });
  if (out.empty() || out == "-") {
    ct::write_topics_tsv(std::cout, topics);
    return;
  }
  write_text(out, [&](std::ostream& o) { ct::write_topics_tsv(o, topics); });
  auto m = begin_manifest("topics");
  m.add_input("corpus", corpus_path);
  m.add_input("checkpoint", checkpoint);
  m.vocab_hash = header.vocab_hash;
  m.add_output("topics", out);
  finish_manifest(m, out);
}

// ----------------------------------------------------------------- intrusion

struct IntrusionArgs {
  std::string corpus, checkpoint, npmi, out, key, text;
  std::uint64_t seed = 0;
  std::size_t per_decile = 3, other_top = 10, own_exclusion = 50, k_tc = 10;
};

void cmd_intrusion(const IntrusionArgs& a) {
  auto corpus = load_checked_corpus(a.corpus);
  ct::verified_manifest(a.checkpoint);
  const auto header = ct::peek_checkpoint(a.checkpoint);
  check_checkpoint_vocab(header, a.checkpoint, corpus, a.corpus);
  const auto tcfg = config_from_header(header);
  auto npmi = load_checked_npmi(a.npmi, "test", corpus, a.corpus);
  Eigen::MatrixXd beta;
  with_precision(header.precision, [&]<class T>() {
    auto st = ct::load_checkpoint<T>(a.checkpoint);
    beta = ct::topic_word(st.params, tcfg.tau_beta).template cast<double>();
  });
  ct::EvalConfig ecfg;
  ecfg.k_tc = a.k_tc;
  const auto coh = ct::topic_coherence(beta, npmi, ecfg);
  ct::IntrusionConfig icfg;
  icfg.topics_per_decile = a.per_decile;
  icfg.other_top = a.other_top;
  icfg.own_exclusion = a.own_exclusion;
  const auto q = ct::intrusion_questionnaire(beta, coh.per_topic, a.seed, icfg);
  const auto key = ct::answer_key(q, corpus.vocabulary);
  write_text(a.out, [&](std::ostream& o) { o << ct::questionnaire_json(q, corpus.vocabulary).dump(2) << "\n"; });
  write_text(a.key, [&](std::ostream& o) { o << ct::answer_key_json(key).dump(2) << "\n"; });
  auto m = begin_manifest("intrusion");
  m.add_input("corpus", a.corpus);
  m.add_input("checkpoint", a.checkpoint);
  m.add_input("npmi_test", a.npmi);
  m.vocab_hash = header.vocab_hash;
  m.add_output("questionnaire", a.out);
  m.add_output("answer_key", a.key);
  if (!a.text.empty()) {
    write_text(a.text, [&](std::ostream& o) { ct::write_questionnaire_text(o, q, corpus.vocabulary); });
    m.add_output("questionnaire_text", a.text);
  }
  finish_manifest(m, a.out);
  log("intrusion: " + std::to_string(q.questions.size()) + " questions");
}

void cmd_wis(const std::string& key_path, const std::string& responses_path) {
  std::ifstream kin(key_path, std::ios::binary);
  if (!kin) throw ct::ValidationError("cannot open answer key: " + key_path);
  nlohmann::json kj;
  try {
    kin >> kj;
  } catch (const nlohmann::json::exception& e) {
    throw ct::ValidationError(key_path + ": " + e.what());
  }
  const auto key = ct::answer_key_from_json(kj);
  std::ifstream rin(responses_path, std::ios::binary);
  if (!rin) throw ct::ValidationError("cannot open responses: " + responses_path);
  std::vector<std::string> responses;
  for (std::string line; std::getline(rin, line);) {
    line = ct::detail::trim(line);
    if (!line.empty()) responses.push_back(line);
  }
  std::cout << "wis " << ct::detail::format_double(ct::wis_score(key, responses)) << "\n";
}

// -------------------------------------------------------------------- report

void cmd_report(const std::vector<std::string>& runs, const std::string& out) {
  if (runs.empty()) throw ct::ValidationError("report needs at least one --run NAME=DIR");
  std::vector<std::pair<std::string, nlohmann::json>> reports;
  for (const auto& r : runs) {
    const auto eq = r.find('=');
    const std::string name = eq == std::string::npos ? fs::path(r).filename().string() : r.substr(0, eq);
    const std::string dir = eq == std::string::npos ? r : r.substr(eq + 1);
    const auto path = join(dir, "report.json");
    ct::verified_manifest(path);
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ct::ValidationError("cannot open evaluation report: " + path);
    nlohmann::json j;
    try {
      in >> j;
    } catch (const nlohmann::json::exception& e) {
      throw ct::ValidationError(path + ": " + e.what());
    }
    reports.emplace_back(name, std::move(j));
  }
  const auto& first = reports.front().second;
  for (const auto& [name, j] : reports)
    if (j["coherence_curve"].size() != first["coherence_curve"].size())
      throw ct::ArtifactMismatch("run " + name + " was evaluated at different percentages than run " + reports.front().first);
  ensure_dir(out);
  auto side_by_side = [&](const std::string& curve, std::ostream& o) {
    o << "percentage";
    for (const auto& [name, j] : reports) o << ',' << name;
    o << '\n';
    for (std::size_t i = 0; i < first[curve].size(); ++i) {
      o << ct::detail::format_double(first[curve][i]["percentage"].get<double>());
      for (const auto& [name, j] : reports) o << ',' << ct::detail::format_double(j[curve][i]["value"].get<double>());
      o << '\n';
    }
  };
  const auto coh = join(out, "coherence_curves.csv"), div = join(out, "diversity_curves.csv"), md = join(out, "summary.md");
  write_text(coh, [&](std::ostream& o) { side_by_side("coherence_curve", o); });
  write_text(div, [&](std::ostream& o) { side_by_side("diversity_curve", o); });
  write_text(md, [&](std::ostream& o) {
    auto fmt = [](double v) {
      char buf[32];
      std::snprintf(buf, sizeof buf, "%.4f", v);
      return std::string(buf);
    };
    o << "# Run comparison\n";
    for (const auto* curve : {"coherence_curve", "diversity_curve"}) {
      o << "\n## " << (std::string(curve) == "coherence_curve" ? "Topic coherence (test NPMI)" : "Topic diversity") << "\n\n| topics (%) |";
      for (const auto& [name, j] : reports) o << ' ' << name << " |";
      o << "\n|---|";
      for (std::size_t i = 0; i < reports.size(); ++i) o << "---|";
      o << '\n';
      for (std::size_t i = 0; i < first[curve].size(); ++i) {
        o << "| " << ct::detail::format_double(first[curve][i]["percentage"].get<double>()) << " |";
        for (const auto& [name, j] : reports) o << ' ' << fmt(j[curve][i]["value"].get<double>()) << " |";
        o << '\n';
      }
    }
    o << "\n## Document clustering\n\n";
    bool any = false;
    for (const auto& [name, j] : reports) {
      if (j["clustering"].is_null()) {
        o << "- " << name << ": skipped: no labels\n";
        continue;
      }
      any = true;
      o << "- " << name << ":";
      for (const auto& c : j["clustering"])
        o << " k=" << c["clusters"].get<std::size_t>() << " purity " << fmt(c["purity"].get<double>()) << " NMI " << fmt(c["nmi"].get<double>()) << ";";
      o << '\n';
    }
    if (any) o << '\n' << ct::clustering_caveat() << '\n';
  });
  log("report written to " + out);
}

// --------------------------------------------------------------------- synth

void cmd_synth(const ct::SyntheticConfig& c, const std::string& out) {
  auto corpus = ct::make_synthetic_corpus(c);
  ensure_parent(out);
  ct::save_corpus(out, corpus);
  auto m = begin_manifest("synth");
  m.vocab_hash = corpus.vocabulary.hash();
  m.add_output("corpus", out);
  finish_manifest(m, out);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Neural topic model with a topic-wise contrastive regularizer"};
  app.option_defaults()->always_capture_default();
  app.require_subcommand(1);
  app.set_version_flag("--version", ct::tool_version);
  app.add_option("--threads", g_threads, "Worker cap; 1 gives bit-reproducible results")->check(CLI::PositiveNumber);

  PreprocessArgs pre;
  auto* sp = app.add_subcommand("preprocess", "Tokenize, filter and split raw documents into a corpus archive");
  sp->add_option("--input", pre.inputs, "Input file (repeatable): .jsonl, plain text, or a UCI docword file")->default_str("")->required();
  sp->add_option("--format", pre.format, "Input format")->check(CLI::IsMember({"jsonl", "uci"}));
  sp->add_option("--vocab-file", pre.vocab_file, "UCI vocabulary file (one word per line)");
  sp->add_option("--labels", pre.labels_file, "UCI labels file (one label per document)");
  sp->add_option("--stopwords", pre.stopwords, "Stopword list, one word per line");
  sp->add_option("--max-df", pre.max_df, "Drop words in more than this fraction of documents");
  sp->add_option("--min-df", pre.min_df, "Drop words in fewer than this many documents");
  sp->add_option("--split", pre.split, "Training fraction when the input carries no split");
  sp->add_option("--seed", pre.seed, "Split seed");
  sp->add_option("--out", pre.out, "Corpus archive to write")->required();

  std::string np_corpus, np_train, np_test;
  auto* sn = app.add_subcommand("npmi", "Precompute train and test NPMI matrices");
  sn->add_option("--corpus", np_corpus, "Corpus archive")->required();
  sn->add_option("--out-train", np_train, "Train-split NPMI matrix")->required();
  sn->add_option("--out-test", np_test, "Test-split NPMI matrix");

  TrainArgs tr;
  auto* st = app.add_subcommand("train", "Train a model; writes checkpoint, training log and top words");
  {
    std::string keys = "Config keys and defaults (--config file or --set):";
    for (const auto& [k, v] : ct::config_entries(ct::TrainConfig{})) keys += "\n  " + k + " = " + v;
    st->footer(keys);
  }
  st->add_option("--corpus", tr.corpus, "Corpus archive")->required();
  st->add_option("--npmi", tr.npmi, "Train-split NPMI matrix")->required();
  st->add_option("--config", tr.config, "Config file of key = value lines");
  st->add_option("--set", tr.set, "Override one config key (key=value, repeatable)")->default_str("");
  st->add_option("--out", tr.out, "Output directory")->required();
  st->add_flag("--resume", tr.resume, "Continue from <out>/checkpoint.bin");
  st->add_flag("--quiet", tr.quiet, "No per-epoch progress");

  EvalArgs ev;
  auto* se = app.add_subcommand("eval", "Coherence, diversity and clustering evaluation");
  se->add_option("--corpus", ev.corpus, "Corpus archive")->required();
  se->add_option("--checkpoint", ev.checkpoint, "Trained checkpoint")->required();
  se->add_option("--npmi", ev.npmi, "Test-split NPMI matrix")->required();
  se->add_option("--out", ev.out, "Output directory")->required();
  se->add_option("--k-tc", ev.k_tc, "Top words per topic for coherence");
  se->add_option("--k-td", ev.k_td, "Top words per topic for diversity");
  se->add_option("--percentages", ev.percentages, "Topic percentages (default 10..100)")->default_str("");
  se->add_option("--clusters", ev.clusters, "k-means cluster counts (default 20 40 60 80 100)")->default_str("");
  se->add_option("--restarts", ev.restarts, "k-means restarts");
  se->add_option("--seed", ev.seed, "k-means seed");
  se->add_option("--nmi", ev.nmi, "NMI normalization")->check(CLI::IsMember({"arithmetic", "geometric", "max", "min"}));

  std::string tp_corpus, tp_ckpt, tp_out;
  std::size_t tp_top = 10;
  auto* stp = app.add_subcommand("topics", "Export top words per topic as TSV");
  stp->add_option("--corpus", tp_corpus, "Corpus archive")->required();
  stp->add_option("--checkpoint", tp_ckpt, "Trained checkpoint")->required();
  stp->add_option("--top", tp_top, "Words per topic");
  stp->add_option("--out", tp_out, "Output TSV ('-' or omitted: standard output)");

  IntrusionArgs in;
  auto* si = app.add_subcommand("intrusion", "Generate a word-intrusion questionnaire and answer key");
  si->add_option("--corpus", in.corpus, "Corpus archive")->required();
  si->add_option("--checkpoint", in.checkpoint, "Trained checkpoint")->required();
  si->add_option("--npmi", in.npmi, "Test-split NPMI matrix (ranks topics by coherence)")->required();
  si->add_option("--out", in.out, "Questionnaire JSON")->required();
  si->add_option("--key", in.key, "Answer key JSON")->required();
  si->add_option("--text", in.text, "Also write a plain-text questionnaire");
  si->add_option("--seed", in.seed, "Sampling seed");
  si->add_option("--per-decile", in.per_decile, "Topics sampled per coherence decile");
  si->add_option("--other-top", in.other_top, "Intruders come from this many top words of unselected topics");
  si->add_option("--own-exclusion", in.own_exclusion, "Intruders are never among this many top words of the topic");

  std::string wk, wr;
  auto* sw = app.add_subcommand("wis", "Score intrusion responses against an answer key");
  sw->add_option("--key", wk, "Answer key JSON")->required();
  sw->add_option("--responses", wr, "One chosen word per line, in question order")->required();

  std::vector<std::string> rp_runs;
  std::string rp_out;
  auto* sr = app.add_subcommand("report", "Side-by-side curves and summary over evaluated runs");
  sr->add_option("--run", rp_runs, "NAME=EVAL_DIR (repeatable)")->default_str("")->required();
  sr->add_option("--out", rp_out, "Output directory")->required();

  ct::SyntheticConfig sy;
  std::string sy_out;
  auto* ss = app.add_subcommand("synth", "Write a planted-topic toy corpus archive");
  ss->add_option("--docs", sy.docs, "Documents");
  ss->add_option("--vocab", sy.vocab, "Vocabulary size");
  ss->add_option("--topics", sy.topics, "Planted topics");
  ss->add_option("--seed", sy.seed, "Seed");
  ss->add_option("--out", sy_out, "Corpus archive to write")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : static_cast<int>(ct::ExitCode::usage);
  }

  try {
    Eigen::setNbThreads(static_cast<int>(g_threads));
    if (*sp) cmd_preprocess(pre);
    else if (*sn) cmd_npmi(np_corpus, np_train, np_test);
    else if (*st) cmd_train(tr);
    else if (*se) cmd_eval(ev);
    else if (*stp) cmd_topics(tp_corpus, tp_ckpt, tp_top, tp_out);
    else if (*si) cmd_intrusion(in);
    else if (*sw) cmd_wis(wk, wr);
    else if (*sr) cmd_report(rp_runs, rp_out);
    else if (*ss) cmd_synth(sy, sy_out);
  } catch (const ct::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return static_cast<int>(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return static_cast<int>(ct::ExitCode::failure);
  }
  return 0;
}
