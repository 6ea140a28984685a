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

#include "xsumforge/topiclda.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "xsumforge/binary_io.h"
#include "xsumforge/common.h"

namespace xsf {

namespace {

// Inverse-CDF draw from unnormalized cumulative weights.
int sample_cumulative(std::span<const double> cdf, double u) {
  const double target = u * cdf.back();
  const auto it = std::upper_bound(cdf.begin(), cdf.end(), target);
  return static_cast<int>(
      std::min<ptrdiff_t>(it - cdf.begin(), static_cast<ptrdiff_t>(cdf.size()) - 1));
}

}  // namespace

TopicModel::TopicModel(int num_topics, int vocab_size, double alpha,
                       double beta)
    : num_topics_(num_topics),
      vocab_size_(vocab_size),
      alpha_(alpha),
      beta_(beta),
      topic_word_counts_(static_cast<size_t>(num_topics) * vocab_size, 0),
      topic_totals_(num_topics, 0),
      word_counts_(vocab_size, 0),
      phi_(static_cast<size_t>(num_topics) * vocab_size, 0.0) {}

void TopicModel::finalize() {
  std::fill(word_counts_.begin(), word_counts_.end(), 0);
  const double vbeta = vocab_size_ * beta_;
  for (int k = 0; k < num_topics_; ++k) {
    const double denom = static_cast<double>(topic_totals_[k]) + vbeta;
    const size_t base = static_cast<size_t>(k) * vocab_size_;
    for (int w = 0; w < vocab_size_; ++w) {
      const int64_t c = topic_word_counts_[base + w];
      word_counts_[w] += c;
      phi_[base + w] = (static_cast<double>(c) + beta_) / denom;
    }
  }
}

void TopicModel::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIoError, "cannot write " + path);
  binio::write<int64_t>(out, num_topics_);
  binio::write<int64_t>(out, vocab_size_);
  binio::write<double>(out, alpha_);
  binio::write<double>(out, beta_);
  binio::write_span<double>(out, phi_);
  binio::write_span<int64_t>(out, topic_totals_);
  if (!out) throw Error(ErrorCode::kIoError, "write failed for " + path);
}

TopicModel TopicModel::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIoError, "cannot read " + path);
  const auto k = binio::read<int64_t>(in);
  const auto v = binio::read<int64_t>(in);
  if (k < 1 || v < 1 || k > (1 << 20) || v > (1 << 26)) {
    throw Error(ErrorCode::kFormatError, "implausible topic model header");
  }
  const auto alpha = binio::read<double>(in);
  const auto beta = binio::read<double>(in);
  TopicModel model(static_cast<int>(k), static_cast<int>(v), alpha, beta);
  binio::read_into<double>(in, model.phi_);
  binio::read_into<int64_t>(in, model.topic_totals_);
  // phi = (c + beta) / (n_k + V beta) is inverted exactly after rounding.
  const double vbeta = static_cast<double>(v) * beta;
  for (int t = 0; t < model.num_topics_; ++t) {
    const double denom = static_cast<double>(model.topic_totals_[t]) + vbeta;
    const size_t base = static_cast<size_t>(t) * model.vocab_size_;
    for (int w = 0; w < model.vocab_size_; ++w) {
      const double c = model.phi_[base + w] * denom - beta;
      model.topic_word_counts_[base + w] = std::max<int64_t>(0, std::llround(c));
      model.word_counts_[w] += model.topic_word_counts_[base + w];
    }
  }
  return model;
}

class LdaSampler {
 public:
  LdaSampler(std::span<const TokenBag> docs, int vocab_size,
             const LdaOptions& options)
      : options_(options),
        num_topics_(options.num_topics),
        alpha_(options.alpha > 0 ? options.alpha : 50.0 / options.num_topics),
        model_(options.num_topics, vocab_size, alpha_, options.beta),
        rng_(options.seed) {
    if (num_topics_ < 2) {
      throw Error(ErrorCode::kInvalidArgument, "LDA needs at least 2 topics");
    }
    if (options.iters < 1) {
      throw Error(ErrorCode::kInvalidArgument, "LDA needs at least 1 sweep");
    }
    filter(docs, vocab_size);
  }

  TopicModel run(const SweepObserver& observer) {
    initialize();
    std::vector<double> cdf(num_topics_);
    for (int sweep = 1; sweep <= options_.iters; ++sweep) {
      for (size_t d = 0; d < docs_.size(); ++d) sweep_document(d, cdf);
      if (observer) observer(sweep, model_, total_tokens_);
    }
    model_.finalize();
    return std::move(model_);
  }

 private:
  void filter(std::span<const TokenBag> docs, int vocab_size) {
    std::vector<int64_t> freq(vocab_size, 0);
    for (const auto& doc : docs) {
      for (int w : doc) {
        if (w < 0 || w >= vocab_size) {
          throw Error(ErrorCode::kIndexOutOfVocab,
                      "LDA token id " + std::to_string(w));
        }
        ++freq[w];
      }
    }
    std::vector<int> types;
    for (int w = 0; w < vocab_size; ++w) {
      if (freq[w] > 0) types.push_back(w);
    }
    const auto n_stop = static_cast<size_t>(
        std::floor(options_.stopword_fraction * static_cast<double>(types.size())));
    std::vector<bool> stop(vocab_size, false);
    if (n_stop > 0) {
      std::stable_sort(types.begin(), types.end(), [&](int a, int b) {
        return freq[a] > freq[b];
      });
      for (size_t i = 0; i < n_stop; ++i) stop[types[i]] = true;
    }
    for (const auto& doc : docs) {
      TokenBag kept;
      for (int w : doc) {
        if (!stop[w]) kept.push_back(w);
      }
      total_tokens_ += static_cast<int64_t>(kept.size());
      docs_.push_back(std::move(kept));
    }
    if (total_tokens_ == 0) {
      throw Error(ErrorCode::kEmptyCorpus, "no tokens to train LDA on");
    }
  }

  void initialize() {
    assignments_.resize(docs_.size());
    doc_topic_.assign(docs_.size() * num_topics_, 0);
    for (size_t d = 0; d < docs_.size(); ++d) {
      assignments_[d].resize(docs_[d].size());
      for (size_t i = 0; i < docs_[d].size(); ++i) {
        const int k = static_cast<int>(rng_.uniform_int(num_topics_));
        assignments_[d][i] = k;
        add(d, docs_[d][i], k, +1);
      }
    }
  }

  void add(size_t d, int w, int k, int delta) {
    doc_topic_[d * num_topics_ + k] += delta;
    model_.topic_word_counts_[static_cast<size_t>(k) * model_.vocab_size_ + w] +=
        delta;
    model_.topic_totals_[k] += delta;
  }

  void sweep_document(size_t d, std::vector<double>& cdf) {
    const double beta = options_.beta;
    const double vbeta = model_.vocab_size_ * beta;
    const int64_t* nd = doc_topic_.data() + d * num_topics_;
    for (size_t i = 0; i < docs_[d].size(); ++i) {
      const int w = docs_[d][i];
      add(d, w, assignments_[d][i], -1);
      double acc = 0.0;
      for (int k = 0; k < num_topics_; ++k) {
        const double nkw = static_cast<double>(
            model_.topic_word_counts_[static_cast<size_t>(k) * model_.vocab_size_ + w]);
        acc += (static_cast<double>(nd[k]) + alpha_) * (nkw + beta) /
               (static_cast<double>(model_.topic_totals_[k]) + vbeta);
        cdf[k] = acc;
      }
      const int k = sample_cumulative(cdf, rng_.uniform());
      assignments_[d][i] = k;
      add(d, w, k, +1);
    }
  }

  LdaOptions options_;
  int num_topics_;
  double alpha_;
  TopicModel model_;
  Rng rng_;
  std::vector<TokenBag> docs_;
  std::vector<std::vector<int>> assignments_;
  std::vector<int64_t> doc_topic_;
  int64_t total_tokens_ = 0;
};

TopicModel train_lda(std::span<const TokenBag> docs, int vocab_size,
                     const LdaOptions& options, const SweepObserver& observer) {
  if (docs.empty()) throw Error(ErrorCode::kEmptyCorpus, "no documents");
  LdaSampler sampler(docs, vocab_size, options);
  return sampler.run(observer);
}

WordTopicTable word_topic_dist(const TopicModel& model) {
  const int K = model.num_topics();
  const int V = model.vocab_size();
  WordTopicTable table;
  table.vocab_size = V;
  table.num_topics = K;
  table.values.assign(static_cast<size_t>(V) * K, 0.0);

  const auto totals = model.topic_totals();
  const double grand =
      static_cast<double>(std::accumulate(totals.begin(), totals.end(), int64_t{0}));
  std::vector<double> prior(K, 1.0 / K);
  if (grand > 0) {
    for (int k = 0; k < K; ++k) prior[k] = static_cast<double>(totals[k]) / grand;
  }
  for (int w = 0; w < V; ++w) {
    double* row = table.values.data() + static_cast<size_t>(w) * K;
    if (model.word_count(w) == 0) {
      std::fill(row, row + K, 1.0 / K);
      continue;
    }
    double z = 0.0;
    for (int k = 0; k < K; ++k) {
      row[k] = model.phi(k, w) * prior[k];
      z += row[k];
    }
    for (int k = 0; k < K; ++k) row[k] /= z;
  }
  return table;
}

std::vector<double> infer_doc_topics(const TopicModel& model,
                                     std::span<const int> doc, int iters,
                                     uint64_t seed) {
  const int K = model.num_topics();
  const double alpha = model.alpha();
  std::vector<int> words;
  for (int w : doc) {
    if (w >= 0 && w < model.vocab_size() && model.word_count(w) > 0) {
      words.push_back(w);
    }
  }
  std::vector<double> out(K);
  const double denom = static_cast<double>(words.size()) + K * alpha;
  if (words.empty()) {
    std::fill(out.begin(), out.end(), alpha / denom);
    return out;
  }

  Rng rng(seed);
  std::vector<int64_t> nd(K, 0);
  std::vector<int> z(words.size());
  for (size_t i = 0; i < words.size(); ++i) {
    z[i] = static_cast<int>(rng.uniform_int(K));
    ++nd[z[i]];
  }
  std::vector<double> cdf(K);
  for (int it = 0; it < iters; ++it) {
    for (size_t i = 0; i < words.size(); ++i) {
      --nd[z[i]];
      double acc = 0.0;
      for (int k = 0; k < K; ++k) {
        acc += (static_cast<double>(nd[k]) + alpha) * model.phi(k, words[i]);
        cdf[k] = acc;
      }
      z[i] = sample_cumulative(cdf, rng.uniform());
      ++nd[z[i]];
    }
  }
  for (int k = 0; k < K; ++k) {
    out[k] = (static_cast<double>(nd[k]) + alpha) / denom;
  }
  return out;
}

}  // namespace xsf
