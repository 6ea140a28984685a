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

// Corpus ingestion: HTML summary extraction, tokenization, vocabularies,
// and the truncating encoder that turns documents into model inputs.

#ifndef XSUMFORGE_CORPUS_H_
#define XSUMFORGE_CORPUS_H_

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace xsf {

using Tokens = std::vector<std::string>;

inline constexpr int kPadId = 0;
inline constexpr int kBosId = 1;
inline constexpr int kEosId = 2;
inline constexpr int kUnkId = 3;
inline constexpr int kNumSpecials = 4;

inline constexpr int kMaxSourceTokens = 400;
inline constexpr int kMaxTargetTokens = 90;
inline constexpr int kDefaultVocabCap = 50000;

struct Document {
  std::string id;
  std::vector<Tokens> sentences;
  Tokens summary;
  std::optional<std::string> raw_text;

  // All sentence tokens in order.
  Tokens flat_tokens() const;
  size_t num_tokens() const;
};

struct HtmlExtraction {
  std::string summary_text;
  std::string body_text;
};

// Pulls the text of every element whose class list contains
// "story-body__introduction" (joined with single spaces) and returns the
// rest of the visible text as the body. Paragraph-level elements in the
// body are separated by newlines. Throws kMissingSummaryClass.
HtmlExtraction extract_summary(std::string_view html);

// Lowercased word/punctuation tokens. Leading and trailing punctuation is
// detached one character at a time; a trailing period stays attached when
// the word already contains a period (acronyms such as "u.k.").
Tokens tokenize(std::string_view text);

// Splits raw text into sentences at [.?!] followed by whitespace and an
// uppercase letter, and at newlines.
std::vector<std::string> split_sentences(std::string_view text);

// Sentence split followed by tokenize; empty sentences are dropped.
std::vector<Tokens> tokenize_sentences(std::string_view text);

class Vocabulary {
 public:
  // Specials only.
  Vocabulary();

  static constexpr std::string_view kPadToken = "<pad>";
  static constexpr std::string_view kBosToken = "<s>";
  static constexpr std::string_view kEosToken = "</s>";
  static constexpr std::string_view kUnkToken = "<unk>";

  int size() const { return static_cast<int>(id_to_token_.size()); }
  int id(std::string_view token) const;  // kUnkId when absent
  bool contains(std::string_view token) const;
  const std::string& token(int id) const;

  std::vector<int> encode(const Tokens& tokens) const;
  Tokens decode(std::span<const int> ids) const;

  // Appends a corpus token; it receives the next free id.
  int add(const std::string& token);

  // One "token<TAB>id" line per entry, specials first.
  void save(const std::string& path) const;
  static Vocabulary load(const std::string& path);

 private:
  std::unordered_map<std::string, int> token_to_id_;
  std::vector<std::string> id_to_token_;
};

// The cap-4 most frequent training tokens (document and summary) in
// descending frequency, ties broken lexicographically.
Vocabulary build_vocab(std::span<const Document> corpus,
                       int cap = kDefaultVocabCap);

struct EncodedPair {
  std::string id;
  std::vector<int> source_ids;
  std::vector<int> target_ids;
  std::vector<int> source_positions;
};

// Throws kEmptySource when the document has no tokens.
EncodedPair encode_pair(const Document& doc, const Vocabulary& vocab);

struct SplitRatios {
  double train = 0.90;
  double validation = 0.05;
  double test = 0.05;
};

struct CorpusSplit {
  std::vector<Document> train;
  std::vector<Document> validation;
  std::vector<Document> test;
};

// Orders documents by a seeded hash of their id, then cuts the ordering at
// round(n*train) and round(n*validation). Deterministic and independent of
// input order.
CorpusSplit split_corpus(std::span<const Document> docs,
                         const SplitRatios& ratios, uint64_t seed);

// JSON Lines: {"id": str, "document": [sentence strings], "summary": str}.
// Sentence strings are tokenized (but not re-split) on load.
Document document_from_json_line(std::string_view line);
std::string document_to_json_line(const Document& doc);
std::vector<Document> load_jsonl(const std::string& path);
void save_jsonl(const std::string& path, std::span<const Document> docs);

std::string join_tokens(const Tokens& tokens);

}  // namespace xsf

#endif  // XSUMFORGE_CORPUS_H_
