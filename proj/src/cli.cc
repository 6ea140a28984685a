// Copyright 2026 The XSumForge Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "xsumforge/cli.h"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "xsumforge/evalsuite.h"
#include "xsumforge/inference.h"

namespace xsf {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void require_file(const std::string& path, const char* what) {
  if (path.empty()) {
    throw Error(ErrorCode::kInvalidArgument, std::string("missing ") + what + " path");
  }
  if (!fs::exists(path)) {
    throw Error(ErrorCode::kIoError, std::string(what) + " not found: " + path);
  }
}

std::string resolve(const fs::path& base, const std::string& p) {
  if (p.empty()) return p;
  const fs::path path(p);
  return path.is_absolute() ? p : (base / path).lexically_normal().string();
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorCode::kIoError, "cannot write " + path);
  f << text;
}

json read_json_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorCode::kIoError, "cannot read " + path);
  try {
    return json::parse(f);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kFormatError, path + ": " + e.what());
  }
}

std::vector<std::string> list_html(const fs::path& dir) {
  std::vector<std::string> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    const auto ext = entry.path().extension().string();
    if (entry.is_regular_file() && (ext == ".html" || ext == ".htm")) {
      files.push_back(entry.path().string());
    }
  }
  std::sort(files.begin(), files.end());
  return files;
}

Document document_from_html(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorCode::kIoError, "cannot read " + path);
  std::stringstream buf;
  buf << f.rdbuf();
  HtmlExtraction ex;
  try {
    ex = extract_summary(buf.str());
  } catch (const Error& e) {
    throw Error(e.code(), path + ": " + e.what());
  }
  Document doc;
  doc.id = fs::path(path).stem().string();
  doc.sentences = tokenize_sentences(ex.body_text);
  doc.summary = tokenize(ex.summary_text);
  doc.raw_text = ex.body_text;
  return doc;
}

// HTML pages without a summary element are skipped with a warning.
std::vector<Document> load_inputs(const std::string& path, std::ostream& err) {
  if (fs::is_directory(path)) {
    std::vector<Document> docs;
    for (const auto& f : list_html(path)) {
      try {
        docs.push_back(document_from_html(f));
      } catch (const Error& e) {
        if (e.code() != ErrorCode::kMissingSummaryClass) throw;
        err << "warning: skipping " << e.what() << '\n';
      }
    }
    return docs;
  }
  const auto ext = fs::path(path).extension().string();
  if (ext == ".html" || ext == ".htm") return {document_from_html(path)};
  return load_jsonl(path);
}

// {"train": [ids], "validation": [ids], "test": [ids]}
CorpusSplit split_by_file(std::span<const Document> docs, const std::string& path) {
  const json j = read_json_file(path);
  std::map<std::string, int> bucket;
  const char* keys[] = {"train", "validation", "test"};
  for (int b = 0; b < 3; ++b) {
    if (!j.contains(keys[b])) continue;
    for (const auto& id : j.at(keys[b])) {
      bucket[id.is_string() ? id.get<std::string>() : id.dump()] = b;
    }
  }
  CorpusSplit split;
  for (const auto& d : docs) {
    auto it = bucket.find(d.id);
    if (it == bucket.end()) continue;
    (it->second == 0 ? split.train : it->second == 1 ? split.validation : split.test)
        .push_back(d);
  }
  return split;
}

TopicModel train_topics(std::span<const Document> docs, const Vocabulary& vocab,
                        const LdaOptions& options, std::ostream& err) {
  std::vector<TokenBag> bags;
  bags.reserve(docs.size());
  for (const auto& d : docs) bags.push_back(topic_bag(d, vocab));
  err << "training topic model: " << options.num_topics << " topics, "
      << options.iters << " sweeps over " << bags.size() << " documents\n";
  return train_lda(bags, vocab.size(), options);
}

std::map<std::string, Tokens> summaries_from_jsonl(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorCode::kIoError, "cannot read " + path);
  std::map<std::string, Tokens> out;
  std::string line;
  size_t lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const json j = json::parse(line);
      const std::string id = j.at("id").is_string() ? j.at("id").get<std::string>()
                                                     : j.at("id").dump();
      out[id] = tokenize(j.at("summary").get<std::string>());
    } catch (const json::exception& e) {
      throw Error(ErrorCode::kFormatError,
                  path + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

// --- subcommands ---------------------------------------------------------

struct PreprocessArgs {
  std::string input;
  std::string out_dir;
  std::string split_file;
  int vocab_size = kDefaultVocabCap;
  uint64_t seed = 1;
};

int cmd_preprocess(const PreprocessArgs& a, std::ostream& out, std::ostream& err) {
  require_file(a.input, "input");
  if (!a.split_file.empty()) require_file(a.split_file, "split file");
  const std::vector<Document> docs = load_inputs(a.input, err);
  if (docs.empty()) throw Error(ErrorCode::kEmptyCorpus, "no documents in " + a.input);
  const CorpusSplit split = a.split_file.empty()
                                ? split_corpus(docs, SplitRatios{}, a.seed)
                                : split_by_file(docs, a.split_file);
  if (split.train.empty()) throw Error(ErrorCode::kEmptyCorpus, "empty training split");
  fs::create_directories(a.out_dir);
  const fs::path dir(a.out_dir);
  save_jsonl((dir / "train.jsonl").string(), split.train);
  save_jsonl((dir / "validation.jsonl").string(), split.validation);
  save_jsonl((dir / "test.jsonl").string(), split.test);
  const Vocabulary vocab = build_vocab(split.train, a.vocab_size);
  vocab.save((dir / "vocab.txt").string());
  out << "train " << split.train.size() << ", validation " << split.validation.size()
      << ", test " << split.test.size() << ", vocabulary " << vocab.size() << '\n';
  return kExitOk;
}

struct TrainLdaArgs {
  std::string config;
  std::string corpus;
  std::string vocab;
  std::string out;
  std::optional<int> num_topics;
  std::optional<int> iters;
  std::optional<uint64_t> seed;
};

int cmd_train_lda(const TrainLdaArgs& a, std::ostream& out, std::ostream& err) {
  PipelineConfig cfg;
  if (!a.config.empty()) {
    require_file(a.config, "config");
    cfg = load_pipeline_config(a.config);
  }
  if (a.seed) cfg.seed = *a.seed;
  cfg.propagate_seed();
  if (a.num_topics) cfg.lda.num_topics = *a.num_topics;
  if (a.iters) cfg.lda.iters = *a.iters;
  const std::string corpus = a.corpus.empty() ? cfg.train_path : a.corpus;
  const std::string vocab_path = a.vocab.empty() ? cfg.vocab_path : a.vocab;
  const std::string out_path = a.out.empty() ? cfg.topics_path : a.out;
  require_file(corpus, "corpus");
  require_file(vocab_path, "vocabulary");
  if (out_path.empty()) throw Error(ErrorCode::kInvalidArgument, "missing --out");
  const auto docs = load_jsonl(corpus);
  const Vocabulary vocab = Vocabulary::load(vocab_path);
  const TopicModel model = train_topics(docs, vocab, cfg.lda, err);
  model.save(out_path);
  out << "wrote " << out_path << " (" << model.num_topics() << " topics, vocabulary "
      << model.vocab_size() << ")\n";
  return kExitOk;
}

struct TrainArgs {
  std::string config;
  std::optional<uint64_t> seed;
  std::string variant;
  std::string topics;
};

int cmd_train(const TrainArgs& a, std::ostream& out, std::ostream& err) {
  require_file(a.config, "config");
  PipelineConfig cfg = load_pipeline_config(a.config);
  if (a.seed) cfg.seed = *a.seed;
  cfg.propagate_seed();
  if (!a.variant.empty()) cfg.model.variant = parse_variant(a.variant);
  if (!a.topics.empty()) cfg.topics_path = a.topics;
  require_file(cfg.train_path, "training corpus");
  require_file(cfg.validation_path, "validation corpus");
  if (!cfg.vocab_path.empty()) require_file(cfg.vocab_path, "vocabulary");
  const bool topic_aware = cfg.model.variant != Variant::kPlain;
  if (topic_aware && !cfg.topics_path.empty()) require_file(cfg.topics_path, "topic model");

  const auto train_docs = load_jsonl(cfg.train_path);
  const auto val_docs = load_jsonl(cfg.validation_path);
  fs::create_directories(cfg.checkpoint_dir);
  const fs::path ckpt(cfg.checkpoint_dir);

  Vocabulary vocab;
  if (cfg.vocab_path.empty()) {
    vocab = build_vocab(train_docs, cfg.vocab_cap);
    vocab.save((ckpt / "vocab.txt").string());
  } else {
    vocab = Vocabulary::load(cfg.vocab_path);
  }

  std::optional<TopicModel> topic_model;
  if (topic_aware) {
    if (cfg.topics_path.empty()) {
      topic_model = train_topics(train_docs, vocab, cfg.lda, err);
      topic_model->save((ckpt / "topics.bin").string());
    } else {
      topic_model = TopicModel::load(cfg.topics_path);
    }
    if (topic_model->vocab_size() != vocab.size()) {
      throw Error(ErrorCode::kShapeMismatch, "topic model vocabulary differs from vocab");
    }
    cfg.model.f_prime = topic_model->num_topics();
  }
  cfg.model.vocab_size = vocab.size();
  cfg.model.validate();

  const TopicModel* tm = topic_model ? &*topic_model : nullptr;
  size_t skipped = 0;
  const auto train_set = build_examples(train_docs, vocab, tm, cfg.topic_inference_iters,
                                        cfg.seed, &skipped);
  const auto val_set = build_examples(val_docs, vocab, tm, cfg.topic_inference_iters,
                                      cfg.seed, &skipped);
  if (skipped) err << "skipped " << skipped << " documents without source tokens\n";

  TrainerConfig tc = cfg.trainer;
  tc.checkpoint_dir = cfg.checkpoint_dir;
  if (tc.log_path.empty()) {
    tc.log_path = cfg.log_path.empty() ? (ckpt / "train_log.csv").string() : cfg.log_path;
  }
  ModelParams params = ModelParams::init(cfg.model, cfg.seed);
  err << "training " << variant_name(cfg.model.variant) << ": "
      << params.num_values() << " parameters, " << train_set.size()
      << " training pairs, " << val_set.size() << " validation pairs\n";
  const TrainState state = train(std::move(params), train_set, val_set, tc,
                                 [&err](const TrainState& s) {
                                   const auto& h = s.history.back();
                                   err << "epoch " << h.epoch << " loss " << h.train_loss
                                       << " val_ppl " << h.val_ppl << " lr " << h.lr
                                       << '\n';
                                 });
  const std::string final_path = (ckpt / "final.ckpt").string();
  state.params.save(final_path);
  out << "wrote " << final_path << " after " << state.epoch << " epochs; best val ppl "
      << state.best_val_ppl << " in " << (ckpt / "best.ckpt").string() << '\n';
  return kExitOk;
}

struct SummarizeArgs {
  std::string config;
  std::string ckpt;
  std::string vocab;
  std::string topics;
  std::string input;
  std::string output;
  int beam = 10;
  std::optional<uint64_t> seed;
  bool length_normalize = false;
};

int cmd_summarize(const SummarizeArgs& a, std::istream& in, std::ostream& out,
                  std::ostream& err) {
  PipelineConfig cfg;
  if (!a.config.empty()) {
    require_file(a.config, "config");
    cfg = load_pipeline_config(a.config);
  }
  if (a.seed) cfg.seed = *a.seed;
  if (a.beam < 1) throw Error(ErrorCode::kInvalidArgument, "--beam must be >= 1");
  const std::string vocab_path = a.vocab.empty() ? cfg.vocab_path : a.vocab;
  const std::string topics_path = a.topics.empty() ? cfg.topics_path : a.topics;
  require_file(a.ckpt, "checkpoint");
  require_file(vocab_path, "vocabulary");
  if (!a.input.empty()) require_file(a.input, "input");

  const ModelParams params = ModelParams::load(a.ckpt);
  const Vocabulary vocab = Vocabulary::load(vocab_path);
  std::optional<TopicModel> topic_model;
  SummarizerArtifacts art;
  art.vocab = &vocab;
  art.params = &params;
  art.topic_iters = cfg.topic_inference_iters;
  art.seed = cfg.seed;
  if (params.config.variant != Variant::kPlain) {
    require_file(topics_path, "topic model");
    topic_model = TopicModel::load(topics_path);
    art.topic_model = &*topic_model;
    art.word_topics = std::make_shared<const WordTopicTable>(word_topic_dist(*topic_model));
  }

  std::ifstream file;
  if (!a.input.empty()) file.open(a.input, std::ios::binary);
  std::istream& src = a.input.empty() ? in : file;
  std::ofstream out_file;
  if (!a.output.empty()) {
    out_file.open(a.output, std::ios::binary);
    if (!out_file) throw Error(ErrorCode::kIoError, "cannot write " + a.output);
  }
  std::ostream& dst = a.output.empty() ? out : out_file;

  BeamOptions beam;
  beam.beam = a.beam;
  beam.length_normalize = a.length_normalize;
  beam.max_len = std::min(beam.max_len, params.config.max_target_positions);
  std::string line;
  size_t lineno = 0;
  while (std::getline(src, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    Document doc;
    try {
      doc = document_from_json_line(line);
    } catch (const Error& e) {
      throw Error(e.code(), "input:" + std::to_string(lineno) + ": " + e.what());
    }
    const std::string summary = summarize_document(doc, art, beam);
    dst << json{{"id", doc.id}, {"summary", summary}}.dump() << '\n';
  }
  (void)err;
  return kExitOk;
}

struct EvaluateArgs {
  std::string outputs;
  std::string refs;
  std::string json_out;
  std::string name = "system";
  bool stem = false;
};

int cmd_evaluate(const EvaluateArgs& a, std::ostream& out, std::ostream& err) {
  require_file(a.outputs, "system outputs");
  require_file(a.refs, "references");
  const auto outputs = summaries_from_jsonl(a.outputs);
  const auto docs = load_jsonl(a.refs);
  std::map<std::string, Tokens> refs, doc_tokens;
  for (const auto& d : docs) {
    if (d.summary.empty()) continue;
    refs[d.id] = d.summary;
    doc_tokens[d.id] = d.flat_tokens();
  }
  const SystemReport report =
      evaluate_system(a.name, outputs, refs, doc_tokens, RougeOptions{a.stem});
  if (report.documents < refs.size()) {
    err << "note: " << refs.size() - report.documents
        << " references have no system output\n";
  }
  const SystemReport rows[] = {report};
  out << format_system_table(rows);
  if (!a.json_out.empty()) write_text(a.json_out, to_json(report).dump(2) + "\n");
  return kExitOk;
}

struct AnalyzeArgs {
  std::string corpus;
  std::string json_out;
  bool stem = false;
};

int cmd_analyze(const AnalyzeArgs& a, std::ostream& out, std::ostream& err) {
  require_file(a.corpus, "corpus");
  const auto docs = load_inputs(a.corpus, err);
  const CorpusStats stats = analyze_corpus(docs, RougeOptions{a.stem});
  out << format_corpus_stats(stats);
  if (!a.json_out.empty()) write_text(a.json_out, to_json(stats).dump(2) + "\n");
  return kExitOk;
}

}  // namespace

void PipelineConfig::propagate_seed() {
  trainer.seed = seed;
  lda.seed = seed;
}

PipelineConfig load_pipeline_config(const std::string& path) {
  const json j = read_json_file(path);
  const fs::path base = fs::path(path).parent_path();
  PipelineConfig c;
  try {
    if (j.contains("seed")) c.seed = j.at("seed").get<uint64_t>();
    if (j.contains("vocab_size")) c.vocab_cap = j.at("vocab_size").get<int>();
    if (j.contains("model")) {
      c.model = j.at("model").get<ModelConfig>();
    }
    if (j.contains("trainer")) c.trainer = j.at("trainer").get<TrainerConfig>();
    c.lda.num_topics = c.model.f_prime;
    if (j.contains("lda")) {
      const json& l = j.at("lda");
      if (l.contains("num_topics")) c.lda.num_topics = l.at("num_topics").get<int>();
      if (l.contains("alpha")) c.lda.alpha = l.at("alpha").get<double>();
      if (l.contains("beta")) c.lda.beta = l.at("beta").get<double>();
      if (l.contains("iters")) c.lda.iters = l.at("iters").get<int>();
      if (l.contains("stopword_fraction")) {
        c.lda.stopword_fraction = l.at("stopword_fraction").get<double>();
      }
      if (l.contains("inference_iters")) {
        c.topic_inference_iters = l.at("inference_iters").get<int>();
      }
    }
    if (j.contains("paths")) {
      const json& p = j.at("paths");
      auto get = [&](const char* key, std::string& field) {
        if (p.contains(key)) field = resolve(base, p.at(key).get<std::string>());
      };
      get("train", c.train_path);
      get("validation", c.validation_path);
      get("vocab", c.vocab_path);
      get("topics", c.topics_path);
      get("checkpoint_dir", c.checkpoint_dir);
      get("log", c.log_path);
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kFormatError, path + ": " + e.what());
  }
  c.propagate_seed();
  return c;
}

std::vector<TrainingExample> build_examples(std::span<const Document> docs,
                                            const Vocabulary& vocab,
                                            const TopicModel* topic_model,
                                            int topic_iters, uint64_t seed,
                                            size_t* skipped) {
  std::shared_ptr<const WordTopicTable> table;
  if (topic_model) {
    table = std::make_shared<const WordTopicTable>(word_topic_dist(*topic_model));
  }
  std::vector<std::optional<TrainingExample>> slots(docs.size());
  parallel_for(docs.size(), [&](size_t i) {
    if (docs[i].num_tokens() == 0) return;
    TrainingExample ex;
    ex.pair = encode_pair(docs[i], vocab);
    if (topic_model) {
      ex.topics = document_topic_vectors(docs[i], vocab, *topic_model, table,
                                         topic_iters, seed);
    }
    slots[i] = std::move(ex);
  });
  std::vector<TrainingExample> out;
  for (auto& s : slots) {
    if (s) {
      out.push_back(std::move(*s));
    } else if (skipped) {
      ++*skipped;
    }
  }
  return out;
}

int run_cli(const std::vector<std::string>& args, std::istream& in, std::ostream& out,
            std::ostream& err) {
  CLI::App app{"xsumforge: topic-conditioned convolutional summarization"};
  app.require_subcommand(1);

  PreprocessArgs pre;
  auto* c_pre = app.add_subcommand("preprocess", "JSONL or HTML corpus -> splits + vocab");
  c_pre->add_option("--input", pre.input, "JSONL file, HTML file or directory of HTML")
      ->required();
  c_pre->add_option("--out", pre.out_dir, "output directory")->required();
  c_pre->add_option("--vocab-size", pre.vocab_size, "vocabulary cap incl. specials");
  c_pre->add_option("--seed", pre.seed, "split seed");
  c_pre->add_option("--split-file", pre.split_file,
                    "JSON with train/validation/test id lists");

  TrainLdaArgs lda;
  auto* c_lda = app.add_subcommand("train-lda", "fit the topic model");
  c_lda->add_option("--config", lda.config, "pipeline JSON");
  c_lda->add_option("--corpus", lda.corpus, "training JSONL");
  c_lda->add_option("--vocab", lda.vocab, "vocabulary file");
  c_lda->add_option("--out", lda.out, "topic model output");
  c_lda->add_option("--topics,--num-topics", lda.num_topics, "number of topics");
  c_lda->add_option("--iters", lda.iters, "Gibbs sweeps");
  c_lda->add_option("--seed", lda.seed, "random seed");

  TrainArgs tr;
  auto* c_train = app.add_subcommand("train", "train a summarizer");
  c_train->add_option("--config", tr.config, "pipeline JSON")->required();
  c_train->add_option("--seed", tr.seed, "random seed");
  c_train->add_option("--variant", tr.variant,
                      "plain|enc_t|enc_t_dec_tD|enc_ttD|enc_ttD_dec_tD");
  c_train->add_option("--topics", tr.topics, "pretrained topic model");

  SummarizeArgs sum;
  auto* c_sum = app.add_subcommand("summarize", "JSONL documents -> JSONL summaries");
  c_sum->add_option("--config", sum.config, "pipeline JSON");
  c_sum->add_option("--ckpt", sum.ckpt, "model checkpoint")->required();
  c_sum->add_option("--vocab", sum.vocab, "vocabulary file");
  c_sum->add_option("--topics", sum.topics, "topic model");
  c_sum->add_option("--beam", sum.beam, "beam size");
  c_sum->add_option("--input", sum.input, "input JSONL (default stdin)");
  c_sum->add_option("--output", sum.output, "output JSONL (default stdout)");
  c_sum->add_option("--seed", sum.seed, "topic inference seed");
  c_sum->add_flag("--length-normalize", sum.length_normalize,
                  "rank beams by per-token log-probability");

  EvaluateArgs ev;
  auto* c_eval = app.add_subcommand("evaluate", "score system outputs");
  c_eval->add_option("--outputs", ev.outputs, "JSONL {id, summary}")->required();
  c_eval->add_option("--refs", ev.refs, "corpus JSONL with gold summaries")->required();
  c_eval->add_option("--json", ev.json_out, "write JSON report");
  c_eval->add_option("--name", ev.name, "system name");
  c_eval->add_flag("--stem", ev.stem, "Porter-stem before ROUGE");

  AnalyzeArgs an;
  auto* c_an = app.add_subcommand("analyze-corpus", "corpus statistics and baselines");
  c_an->add_option("--corpus", an.corpus, "JSONL file or HTML directory")->required();
  c_an->add_option("--json", an.json_out, "write JSON report");
  c_an->add_flag("--stem", an.stem, "Porter-stem before ROUGE");

  std::vector<std::string> argv_store = {"xsumforge"};
  argv_store.insert(argv_store.end(), args.begin(), args.end());
  std::vector<char*> argv;
  for (auto& s : argv_store) argv.push_back(s.data());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (c_pre->parsed()) return cmd_preprocess(pre, out, err);
    if (c_lda->parsed()) return cmd_train_lda(lda, out, err);
    if (c_train->parsed()) return cmd_train(tr, out, err);
    if (c_sum->parsed()) return cmd_summarize(sum, in, out, err);
    if (c_eval->parsed()) return cmd_evaluate(ev, out, err);
    if (c_an->parsed()) return cmd_analyze(an, out, err);
  } catch (const Error& e) {
    err << "error [" << error_code_name(e.code()) << "]: " << e.what() << '\n';
    return e.code() == ErrorCode::kInvalidArgument ? kExitUsage : kExitData;
  } catch (const json::exception& e) {
    err << "error [format]: " << e.what() << '\n';
    return kExitData;
  } catch (const fs::filesystem_error& e) {
    err << "error [io]: " << e.what() << '\n';
    return kExitData;
  }
  err << app.help();
  return kExitUsage;
}

}  // namespace xsf
