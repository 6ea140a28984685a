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

#include "xsumforge/evalsuite.h"

#include <algorithm>
#include <cstdio>
#include <set>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "xsumforge/common.h"

namespace xsf {

namespace {

// Porter's algorithm over b[0..k]; j marks the stem end after a suffix match.
class PorterStemmer {
 public:
  explicit PorterStemmer(std::string_view word) : b_(word) {
    k_ = static_cast<int>(b_.size()) - 1;
  }

  std::string run() {
    if (k_ <= 1) return b_;
    step1ab();
    if (k_ > 0) {
      step1c();
      step2();
      step3();
      step4();
      step5();
    }
    return b_.substr(0, static_cast<size_t>(k_ + 1));
  }

 private:
  bool cons(int i) const {
    switch (b_[i]) {
      case 'a': case 'e': case 'i': case 'o': case 'u':
        return false;
      case 'y':
        return i == 0 ? true : !cons(i - 1);
      default:
        return true;
    }
  }

  // Number of VC sequences in b[0..j].
  int m() const {
    int n = 0;
    int i = 0;
    while (true) {
      if (i > j_) return n;
      if (!cons(i)) break;
      ++i;
    }
    ++i;
    while (true) {
      while (true) {
        if (i > j_) return n;
        if (cons(i)) break;
        ++i;
      }
      ++i;
      ++n;
      while (true) {
        if (i > j_) return n;
        if (!cons(i)) break;
        ++i;
      }
      ++i;
    }
  }

  bool vowel_in_stem() const {
    for (int i = 0; i <= j_; ++i) {
      if (!cons(i)) return true;
    }
    return false;
  }

  bool double_cons(int j) const {
    return j >= 1 && b_[j] == b_[j - 1] && cons(j);
  }

  bool cvc(int i) const {
    if (i < 2 || !cons(i) || cons(i - 1) || !cons(i - 2)) return false;
    const char ch = b_[i];
    return ch != 'w' && ch != 'x' && ch != 'y';
  }

  bool ends(std::string_view s) {
    const int len = static_cast<int>(s.size());
    if (len > k_ + 1) return false;
    if (b_.compare(static_cast<size_t>(k_ + 1 - len), s.size(), s) != 0) return false;
    j_ = k_ - len;
    return true;
  }

  void set_to(std::string_view s) {
    b_.replace(static_cast<size_t>(j_ + 1), static_cast<size_t>(k_ - j_), s);
    k_ = j_ + static_cast<int>(s.size());
    b_.resize(static_cast<size_t>(k_ + 1));
  }

  void r(std::string_view s) {
    if (m() > 0) set_to(s);
  }

  void step1ab() {
    if (b_[k_] == 's') {
      if (ends("sses")) {
        k_ -= 2;
      } else if (ends("ies")) {
        set_to("i");
      } else if (b_[k_ - 1] != 's') {
        --k_;
      }
    }
    if (ends("eed")) {
      if (m() > 0) --k_;
    } else if ((ends("ed") || ends("ing")) && vowel_in_stem()) {
      k_ = j_;
      if (ends("at")) {
        set_to("ate");
      } else if (ends("bl")) {
        set_to("ble");
      } else if (ends("iz")) {
        set_to("ize");
      } else if (double_cons(k_)) {
        --k_;
        const char ch = b_[k_];
        if (ch == 'l' || ch == 's' || ch == 'z') ++k_;
      } else if (m() == 1 && cvc(k_)) {
        set_to("e");
      }
    }
    b_.resize(static_cast<size_t>(k_ + 1));
  }

  void step1c() {
    if (ends("y") && vowel_in_stem()) b_[k_] = 'i';
  }

  // First matching suffix decides; the replacement needs m() > 0.
  bool try_rules(std::initializer_list<std::pair<std::string_view, std::string_view>> rules) {
    for (const auto& [suffix, repl] : rules) {
      if (ends(suffix)) {
        r(repl);
        return true;
      }
    }
    return false;
  }

  void step2() {
    switch (b_[k_ - 1]) {
      case 'a': try_rules({{"ational", "ate"}, {"tional", "tion"}}); break;
      case 'c': try_rules({{"enci", "ence"}, {"anci", "ance"}}); break;
      case 'e': try_rules({{"izer", "ize"}}); break;
      case 'l':
        try_rules({{"bli", "ble"}, {"alli", "al"}, {"entli", "ent"},
                   {"eli", "e"}, {"ousli", "ous"}});
        break;
      case 'o':
        try_rules({{"ization", "ize"}, {"ation", "ate"}, {"ator", "ate"}});
        break;
      case 's':
        try_rules({{"alism", "al"}, {"iveness", "ive"}, {"fulness", "ful"},
                   {"ousness", "ous"}});
        break;
      case 't':
        try_rules({{"aliti", "al"}, {"iviti", "ive"}, {"biliti", "ble"}});
        break;
      case 'g': try_rules({{"logi", "log"}}); break;
      default: break;
    }
  }

  void step3() {
    switch (b_[k_]) {
      case 'e':
        try_rules({{"icate", "ic"}, {"ative", ""}, {"alize", "al"}});
        break;
      case 'i': try_rules({{"iciti", "ic"}}); break;
      case 'l': try_rules({{"ical", "ic"}, {"ful", ""}}); break;
      case 's': try_rules({{"ness", ""}}); break;
      default: break;
    }
  }

  bool ends_any(std::initializer_list<std::string_view> suffixes) {
    for (auto s : suffixes) {
      if (ends(s)) return true;
    }
    return false;
  }

  void step4() {
    if (k_ < 1) return;
    bool matched = false;
    switch (b_[k_ - 1]) {
      case 'a': matched = ends("al"); break;
      case 'c': matched = ends_any({"ance", "ence"}); break;
      case 'e': matched = ends("er"); break;
      case 'i': matched = ends("ic"); break;
      case 'l': matched = ends_any({"able", "ible"}); break;
      case 'n': matched = ends_any({"ant", "ement", "ment", "ent"}); break;
      case 'o':
        if (ends("ion") && j_ >= 0 && (b_[j_] == 's' || b_[j_] == 't')) {
          matched = true;
        } else {
          matched = ends("ou");
        }
        break;
      case 's': matched = ends("ism"); break;
      case 't': matched = ends_any({"ate", "iti"}); break;
      case 'u': matched = ends("ous"); break;
      case 'v': matched = ends("ive"); break;
      case 'z': matched = ends("ize"); break;
      default: break;
    }
    if (matched && m() > 1) k_ = j_;
  }

  void step5() {
    j_ = k_;
    if (b_[k_] == 'e') {
      const int a = m();
      if (a > 1 || (a == 1 && !cvc(k_ - 1))) --k_;
    }
    if (b_[k_] == 'l' && double_cons(k_) && m() > 1) --k_;
  }

  std::string b_;
  int k_ = 0;
  int j_ = 0;
};

Tokens maybe_stem(std::span<const std::string> tokens, const RougeOptions& options) {
  Tokens out(tokens.begin(), tokens.end());
  if (options.stem) {
    for (auto& t : out) t = porter_stem(t);
  }
  return out;
}

std::string ngram_key(std::span<const std::string> tokens, size_t start, size_t n) {
  std::string key;
  for (size_t i = 0; i < n; ++i) {
    if (i) key.push_back('\x1f');
    key += tokens[start + i];
  }
  return key;
}

std::unordered_map<std::string, int64_t> ngram_counts(std::span<const std::string> tokens,
                                                      size_t n) {
  std::unordered_map<std::string, int64_t> counts;
  for (size_t i = 0; i + n <= tokens.size(); ++i) ++counts[ngram_key(tokens, i, n)];
  return counts;
}

std::unordered_set<std::string> ngram_types(std::span<const std::string> tokens, size_t n) {
  std::unordered_set<std::string> types;
  for (size_t i = 0; i + n <= tokens.size(); ++i) types.insert(ngram_key(tokens, i, n));
  return types;
}

Prf make_prf(int64_t overlap, int64_t cand_units, int64_t ref_units) {
  Prf s;
  s.precision = cand_units > 0 ? static_cast<double>(overlap) / static_cast<double>(cand_units) : 0.0;
  s.recall = ref_units > 0 ? static_cast<double>(overlap) / static_cast<double>(ref_units) : 0.0;
  const double denom = s.precision + s.recall;
  s.f1 = denom > 0.0 ? 2.0 * s.precision * s.recall / denom : 0.0;
  return s;
}

Prf ngram_prf(std::span<const std::string> cand, std::span<const std::string> ref, size_t n) {
  const auto c = ngram_counts(cand, n);
  const auto r = ngram_counts(ref, n);
  int64_t overlap = 0;
  for (const auto& [key, count] : c) {
    auto it = r.find(key);
    if (it != r.end()) overlap += std::min(count, it->second);
  }
  const auto units = [n](size_t len) {
    return len >= n ? static_cast<int64_t>(len - n + 1) : int64_t{0};
  };
  return make_prf(overlap, units(cand.size()), units(ref.size()));
}

void require_sentences(const Document& doc) {
  if (doc.sentences.empty()) {
    throw Error(ErrorCode::kEmptyDocument, "document '" + doc.id + "' has no sentences");
  }
}

bool is_terminal(const std::string& t) { return t == "." || t == "?" || t == "!"; }

std::string fixed(double v, int digits = 2) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::string pad_left(const std::string& s, size_t width) {
  return s.size() >= width ? s : std::string(width - s.size(), ' ') + s;
}

std::string pad_right(const std::string& s, size_t width) {
  return s.size() >= width ? s : s + std::string(width - s.size(), ' ');
}

nlohmann::json novelty_json(const std::array<double, 4>& pct) {
  nlohmann::json j = nlohmann::json::object();
  for (size_t n = 0; n < 4; ++n) j[std::to_string(n + 1)] = pct[n];
  return j;
}

}  // namespace

std::string porter_stem(std::string_view word) { return PorterStemmer(word).run(); }

size_t lcs_length(std::span<const std::string> a, std::span<const std::string> b) {
  if (a.size() < b.size()) std::swap(a, b);
  std::vector<size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
  for (size_t i = 1; i <= a.size(); ++i) {
    for (size_t j = 1; j <= b.size(); ++j) {
      cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

RougeScores rouge(std::span<const std::string> candidate,
                  std::span<const std::string> reference, const RougeOptions& options) {
  if (reference.empty()) throw Error(ErrorCode::kEmptyReference, "empty reference");
  const Tokens cand = maybe_stem(candidate, options);
  const Tokens ref = maybe_stem(reference, options);
  RougeScores s;
  s.r1 = ngram_prf(cand, ref, 1);
  s.r2 = ngram_prf(cand, ref, 2);
  s.rl = make_prf(static_cast<int64_t>(lcs_length(cand, ref)),
                  static_cast<int64_t>(cand.size()), static_cast<int64_t>(ref.size()));
  return s;
}

Tokens lead(const Document& doc) {
  require_sentences(doc);
  return doc.sentences.front();
}

Tokens random_sentence(const Document& doc, uint64_t seed) {
  require_sentences(doc);
  Rng rng(seed);
  return doc.sentences[rng.uniform_int(doc.sentences.size())];
}

OracleChoice ext_oracle(const Document& doc, std::span<const std::string> gold,
                        const RougeOptions& options) {
  require_sentences(doc);
  OracleChoice best;
  double best_score = -1.0;
  for (size_t i = 0; i < doc.sentences.size(); ++i) {
    const RougeScores s = rouge(doc.sentences[i], gold, options);
    if (s.mean_f1() > best_score) {
      best_score = s.mean_f1();
      best.sentence = i;
      best.scores = s;
    }
  }
  best.tokens = doc.sentences[best.sentence];
  return best;
}

NoveltyReport novelty(std::span<const std::string> summary,
                      std::span<const std::string> doc_tokens) {
  NoveltyReport report;
  for (size_t n = 1; n <= 4; ++n) {
    const auto summary_types = ngram_types(summary, n);
    if (summary_types.empty()) continue;
    const auto doc_types = ngram_types(doc_tokens, n);
    size_t novel = 0;
    for (const auto& t : summary_types) novel += doc_types.count(t) == 0;
    report.pct_novel[n - 1] =
        100.0 * static_cast<double>(novel) / static_cast<double>(summary_types.size());
    report.defined[n - 1] = true;
  }
  return report;
}

SystemReport evaluate_system(std::string system,
                             const std::map<std::string, Tokens>& outputs,
                             const std::map<std::string, Tokens>& references,
                             const std::map<std::string, Tokens>& documents,
                             const RougeOptions& options) {
  std::vector<const std::string*> ids;
  for (const auto& [id, out] : outputs) {
    if (!references.count(id)) {
      throw Error(ErrorCode::kMissingReference, "no reference for '" + id + "'");
    }
    if (!documents.count(id)) {
      throw Error(ErrorCode::kMissingReference, "no document for '" + id + "'");
    }
    ids.push_back(&id);
  }
  std::vector<RougeScores> scores(ids.size());
  std::vector<NoveltyReport> nov(ids.size());
  parallel_for(ids.size(), [&](size_t i) {
    const Tokens& out = outputs.at(*ids[i]);
    scores[i] = rouge(out, references.at(*ids[i]), options);
    nov[i] = novelty(out, documents.at(*ids[i]));
  });

  SystemReport report;
  report.system = std::move(system);
  report.documents = ids.size();
  report.stemmed = options.stem;
  std::array<size_t, 4> nov_count{};
  double words = 0.0;
  for (size_t i = 0; i < ids.size(); ++i) {
    report.r1 += scores[i].r1.f1;
    report.r2 += scores[i].r2.f1;
    report.rl += scores[i].rl.f1;
    words += static_cast<double>(outputs.at(*ids[i]).size());
    for (size_t n = 0; n < 4; ++n) {
      if (nov[i].defined[n]) {
        report.novelty[n] += nov[i].pct_novel[n];
        ++nov_count[n];
      }
    }
  }
  if (!ids.empty()) {
    const auto d = static_cast<double>(ids.size());
    report.r1 /= d;
    report.r2 /= d;
    report.rl /= d;
    report.mean_length = words / d;
  }
  for (size_t n = 0; n < 4; ++n) {
    if (nov_count[n]) report.novelty[n] /= static_cast<double>(nov_count[n]);
  }
  return report;
}

size_t count_sentences(std::span<const std::string> tokens) {
  size_t n = 0;
  bool open = false;
  for (const auto& t : tokens) {
    if (is_terminal(t)) {
      ++n;
      open = false;
    } else {
      open = true;
    }
  }
  return n + (open ? 1 : 0);
}

CorpusStats analyze_corpus(std::span<const Document> docs, const RougeOptions& options) {
  if (docs.empty()) throw Error(ErrorCode::kEmptyCorpus, "no documents");
  CorpusStats st;
  st.documents = docs.size();
  std::set<std::string> doc_vocab, sum_vocab;
  std::map<std::string, Tokens> lead_out, oracle_out, refs, doc_tokens;
  std::array<double, 4> nov_sum{};
  std::array<size_t, 4> nov_count{};
  for (const auto& d : docs) {
    if (refs.count(d.id)) {
      throw Error(ErrorCode::kFormatError, "duplicate document id '" + d.id + "'");
    }
    const Tokens flat = d.flat_tokens();
    st.avg_doc_sentences += static_cast<double>(d.sentences.size());
    st.avg_doc_tokens += static_cast<double>(flat.size());
    st.avg_summary_sentences += static_cast<double>(count_sentences(d.summary));
    st.avg_summary_tokens += static_cast<double>(d.summary.size());
    doc_vocab.insert(flat.begin(), flat.end());
    sum_vocab.insert(d.summary.begin(), d.summary.end());
    const NoveltyReport nr = novelty(d.summary, flat);
    for (size_t n = 0; n < 4; ++n) {
      if (nr.defined[n]) {
        nov_sum[n] += nr.pct_novel[n];
        ++nov_count[n];
      }
    }
    refs[d.id] = d.summary;
    doc_tokens[d.id] = flat;
    if (!d.sentences.empty() && !d.summary.empty()) {
      lead_out[d.id] = lead(d);
      oracle_out[d.id] = ext_oracle(d, d.summary, options).tokens;
    }
  }
  const auto n = static_cast<double>(docs.size());
  st.avg_doc_sentences /= n;
  st.avg_doc_tokens /= n;
  st.avg_summary_sentences /= n;
  st.avg_summary_tokens /= n;
  st.doc_vocab = doc_vocab.size();
  st.summary_vocab = sum_vocab.size();
  for (size_t k = 0; k < 4; ++k) {
    st.gold_novelty.defined[k] = nov_count[k] > 0;
    if (nov_count[k]) st.gold_novelty.pct_novel[k] = nov_sum[k] / static_cast<double>(nov_count[k]);
  }
  st.lead = evaluate_system("LEAD", lead_out, refs, doc_tokens, options);
  st.ext_oracle = evaluate_system("EXT-ORACLE", oracle_out, refs, doc_tokens, options);
  return st;
}

nlohmann::json to_json(const SystemReport& r) {
  return nlohmann::json{{"system", r.system},
                        {"documents", r.documents},
                        {"rouge1_f1", r.r1},
                        {"rouge2_f1", r.r2},
                        {"rougeL_f1", r.rl},
                        {"novel_ngram_pct", novelty_json(r.novelty)},
                        {"mean_length", r.mean_length},
                        {"rouge_variant", r.stemmed ? "stemmed" : "unstemmed"}};
}

nlohmann::json to_json(const CorpusStats& s) {
  return nlohmann::json{
      {"documents", s.documents},
      {"avg_document_sentences", s.avg_doc_sentences},
      {"avg_document_words", s.avg_doc_tokens},
      {"avg_summary_sentences", s.avg_summary_sentences},
      {"avg_summary_words", s.avg_summary_tokens},
      {"document_vocabulary", s.doc_vocab},
      {"summary_vocabulary", s.summary_vocab},
      {"gold_novel_ngram_pct", novelty_json(s.gold_novelty.pct_novel)},
      {"systems", nlohmann::json::array({to_json(s.lead), to_json(s.ext_oracle)})}};
}

std::string format_system_table(std::span<const SystemReport> reports) {
  size_t name_w = 6;
  for (const auto& r : reports) name_w = std::max(name_w, r.system.size());
  std::ostringstream os;
  const char* heads[] = {"R1", "R2", "RL", "1-g", "2-g", "3-g", "4-g", "Len"};
  os << pad_right("System", name_w);
  for (const char* h : heads) os << "  " << pad_left(h, 6);
  os << '\n';
  for (const auto& r : reports) {
    os << pad_right(r.system, name_w);
    for (double v : {r.r1 * 100.0, r.r2 * 100.0, r.rl * 100.0}) os << "  " << pad_left(fixed(v), 6);
    for (double v : r.novelty) os << "  " << pad_left(fixed(v), 6);
    os << "  " << pad_left(fixed(r.mean_length), 6) << '\n';
  }
  if (!reports.empty()) {
    os << "(ROUGE F1, " << (reports.front().stemmed ? "stemmed" : "unstemmed")
       << "; n-g = % novel n-grams)\n";
  }
  return os.str();
}

std::string format_corpus_stats(const CorpusStats& s) {
  std::ostringstream os;
  const std::pair<std::string, std::string> rows[] = {
      {"documents", std::to_string(s.documents)},
      {"avg document sentences", fixed(s.avg_doc_sentences)},
      {"avg document words", fixed(s.avg_doc_tokens)},
      {"avg summary sentences", fixed(s.avg_summary_sentences)},
      {"avg summary words", fixed(s.avg_summary_tokens)},
      {"document vocabulary", std::to_string(s.doc_vocab)},
      {"summary vocabulary", std::to_string(s.summary_vocab)},
  };
  for (const auto& [k, v] : rows) os << pad_right(k, 24) << pad_left(v, 10) << '\n';
  os << pad_right("gold novel n-grams %", 24);
  for (double v : s.gold_novelty.pct_novel) os << "  " << pad_left(fixed(v), 6);
  os << "\n\n";
  const SystemReport systems[] = {s.lead, s.ext_oracle};
  os << format_system_table(systems);
  return os.str();
}

}  // namespace xsf
