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

// ROUGE-1/2/L, novel n-gram rates, extractive baselines and corpus reports.

#ifndef XSUMFORGE_EVALSUITE_H_
#define XSUMFORGE_EVALSUITE_H_

#include <array>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "xsumforge/corpus.h"

namespace xsf {

struct Prf {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

struct RougeScores {
  Prf r1;
  Prf r2;
  Prf rl;

  double mean_f1() const { return (r1.f1 + r2.f1 + rl.f1) / 3.0; }
};

struct RougeOptions {
  bool stem = false;  // Porter-stem both sides before matching
};

// Porter stemmer, reference C variant (words of length <= 2 untouched).
std::string porter_stem(std::string_view word);

size_t lcs_length(std::span<const std::string> a, std::span<const std::string> b);

// Clipped n-gram overlap for R-1/R-2, LCS for R-L. kEmptyReference.
RougeScores rouge(std::span<const std::string> candidate,
                  std::span<const std::string> reference,
                  const RougeOptions& options = {});

// First sentence. kEmptyDocument.
Tokens lead(const Document& doc);

// Uniformly chosen sentence; same seed and document give the same choice.
Tokens random_sentence(const Document& doc, uint64_t seed);

struct OracleChoice {
  size_t sentence = 0;
  Tokens tokens;
  RougeScores scores;
};

// Sentence maximizing mean(R-1, R-2, R-L F1) against gold; the earliest
// sentence wins ties. kEmptyDocument, kEmptyReference.
OracleChoice ext_oracle(const Document& doc, std::span<const std::string> gold,
                        const RougeOptions& options = {});

struct NoveltyReport {
  // Percent of distinct summary n-grams (n = index + 1) absent from the
  // document. Zero where the summary has no n-gram of that size.
  std::array<double, 4> pct_novel{};
  std::array<bool, 4> defined{};
};

NoveltyReport novelty(std::span<const std::string> summary,
                      std::span<const std::string> doc_tokens);

struct SystemReport {
  std::string system;
  size_t documents = 0;
  double r1 = 0.0;  // mean F1, in [0, 1]
  double r2 = 0.0;
  double rl = 0.0;
  // Mean of per-document novelty over documents where it is defined.
  std::array<double, 4> novelty{};
  double mean_length = 0.0;  // words per output
  bool stemmed = false;
};

// Scores outputs against references; novelty is measured against each
// document's tokens. Ids are visited in sorted order. kMissingReference when
// an output id has no reference or no document.
SystemReport evaluate_system(std::string system,
                             const std::map<std::string, Tokens>& outputs,
                             const std::map<std::string, Tokens>& references,
                             const std::map<std::string, Tokens>& documents,
                             const RougeOptions& options = {});

// Sentences in a flat token list: runs closed by ".", "?" or "!", plus a
// trailing unterminated run.
size_t count_sentences(std::span<const std::string> tokens);

struct CorpusStats {
  size_t documents = 0;
  double avg_doc_sentences = 0.0;
  double avg_doc_tokens = 0.0;
  double avg_summary_sentences = 0.0;
  double avg_summary_tokens = 0.0;
  size_t doc_vocab = 0;
  size_t summary_vocab = 0;
  NoveltyReport gold_novelty;  // macro-averaged over documents
  SystemReport lead;
  SystemReport ext_oracle;
};

// kEmptyCorpus.
CorpusStats analyze_corpus(std::span<const Document> docs,
                           const RougeOptions& options = {});

nlohmann::json to_json(const SystemReport& report);
nlohmann::json to_json(const CorpusStats& stats);

// Aligned text tables; scores are shown as percentages.
std::string format_system_table(std::span<const SystemReport> reports);
std::string format_corpus_stats(const CorpusStats& stats);

}  // namespace xsf

#endif  // XSUMFORGE_EVALSUITE_H_
