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

// LDA by collapsed Gibbs sampling, plus the word-level and document-level
// topic vectors that condition the summarizer.

#ifndef XSUMFORGE_TOPICLDA_H_
#define XSUMFORGE_TOPICLDA_H_

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace xsf {

using TokenBag = std::vector<int>;

struct LdaOptions {
  int num_topics = 512;
  // Non-positive means 50 / num_topics.
  double alpha = 0.0;
  double beta = 0.01;
  int iters = 200;
  uint64_t seed = 0;
  // Fraction of the most frequent word types dropped before sampling.
  double stopword_fraction = 0.001;
};

class TopicModel {
 public:
  TopicModel() = default;
  TopicModel(int num_topics, int vocab_size, double alpha, double beta);

  int num_topics() const { return num_topics_; }
  int vocab_size() const { return vocab_size_; }
  double alpha() const { return alpha_; }
  double beta() const { return beta_; }

  int64_t count(int topic, int word) const {
    return topic_word_counts_[static_cast<size_t>(topic) * vocab_size_ + word];
  }
  int64_t topic_total(int topic) const { return topic_totals_[topic]; }
  double phi(int topic, int word) const {
    return phi_[static_cast<size_t>(topic) * vocab_size_ + word];
  }
  std::span<const int64_t> topic_word_counts() const {
    return topic_word_counts_;
  }
  std::span<const int64_t> topic_totals() const { return topic_totals_; }
  std::span<const double> phi() const { return phi_; }

  // Corpus count of a word across all topics.
  int64_t word_count(int word) const { return word_counts_[word]; }

  // K, V, alpha, beta, then phi (K x V, row-major) and topic_totals, all
  // little-endian 64-bit.
  void save(const std::string& path) const;
  static TopicModel load(const std::string& path);

 private:
  friend class LdaSampler;
  void finalize();

  int num_topics_ = 0;
  int vocab_size_ = 0;
  double alpha_ = 0.0;
  double beta_ = 0.0;
  std::vector<int64_t> topic_word_counts_;
  std::vector<int64_t> topic_totals_;
  std::vector<int64_t> word_counts_;
  std::vector<double> phi_;
};

// Called after every sweep with the live count tables (phi not yet set).
using SweepObserver = std::function<void(int sweep, const TopicModel& state,
                                         int64_t corpus_tokens)>;

// Throws kEmptyCorpus when no token survives filtering, kIndexOutOfVocab
// for ids outside [0, vocab_size).
TopicModel train_lda(std::span<const TokenBag> docs, int vocab_size,
                     const LdaOptions& options,
                     const SweepObserver& observer = nullptr);

// V x K row-major table of p(topic | word).
struct WordTopicTable {
  int vocab_size = 0;
  int num_topics = 0;
  std::vector<double> values;

  std::span<const double> row(int word) const {
    return {values.data() + static_cast<size_t>(word) * num_topics,
            static_cast<size_t>(num_topics)};
  }
};

// p(k|w) proportional to phi[k][w] * p(k) with p(k) from topic totals;
// words never seen in training get the uniform row.
WordTopicTable word_topic_dist(const TopicModel& model);

// Fold-in Gibbs sampling against the frozen training counts. Unknown or
// unseen words are skipped. Returns the last-sample estimate
// (n_dk + alpha) / (N + K alpha).
std::vector<double> infer_doc_topics(const TopicModel& model,
                                     std::span<const int> doc, int iters = 50,
                                     uint64_t seed = 0);

// The pair of topic inputs consumed by the topic-aware encoder/decoder.
struct TopicVectors {
  std::shared_ptr<const WordTopicTable> word_topics;
  std::vector<double> doc_topic;
};

}  // namespace xsf

#endif  // XSUMFORGE_TOPICLDA_H_
