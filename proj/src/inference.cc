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

#include "xsumforge/inference.h"

#include <algorithm>
#include <cmath>
#include <limits>

namespace xsf {

namespace {

std::vector<double> log_softmax(const std::vector<double>& logits) {
  const double mx = *std::max_element(logits.begin(), logits.end());
  double z = 0.0;
  for (double x : logits) z += std::exp(x - mx);
  const double lz = mx + std::log(z);
  std::vector<double> out(logits.size());
  for (size_t i = 0; i < logits.size(); ++i) out[i] = logits[i] - lz;
  return out;
}

bool emittable(int token) { return token != kPadId && token != kBosId; }

double rank_score(const Hypothesis& h, bool length_normalize) {
  if (!length_normalize) return h.logprob;
  const auto len = static_cast<double>(std::max<size_t>(1, h.token_ids.size() - 1));
  return h.logprob / len;
}

}  // namespace

std::vector<int> Hypothesis::output_ids() const {
  std::vector<int> out;
  for (size_t i = 1; i < token_ids.size(); ++i) {
    if (token_ids[i] == kEosId) break;
    out.push_back(token_ids[i]);
  }
  return out;
}

std::vector<Hypothesis> beam_search(const ModelParams& params,
                                    const EncodedPair& source,
                                    const TopicVectors* topics,
                                    const BeamOptions& options) {
  if (options.beam < 1) {
    throw Error(ErrorCode::kInvalidArgument, "beam size must be >= 1");
  }
  if (options.max_len < 1 || options.max_len > params.config.max_target_positions) {
    throw Error(ErrorCode::kInvalidArgument, "max_len outside decoder positions");
  }
  DecodeSession session(params, source, topics);
  std::vector<Hypothesis> live{{{kBosId}, 0.0, false}};
  std::vector<Hypothesis> pool;

  struct Candidate {
    double score;
    size_t hyp;
    int token;
  };
  const auto better = [](const Candidate& a, const Candidate& b) {
    if (a.score != b.score) return a.score > b.score;
    if (a.hyp != b.hyp) return a.hyp < b.hyp;
    return a.token < b.token;
  };

  for (int step = 1; step <= options.max_len && !live.empty(); ++step) {
    std::vector<Candidate> candidates;
    for (size_t h = 0; h < live.size(); ++h) {
      const auto logp = log_softmax(session.step_logits(live[h].token_ids));
      for (int t = 0; t < static_cast<int>(logp.size()); ++t) {
        if (emittable(t)) candidates.push_back({live[h].logprob + logp[t], h, t});
      }
    }
    const size_t keep = std::min<size_t>(options.beam, candidates.size());
    std::partial_sort(candidates.begin(), candidates.begin() + keep,
                      candidates.end(), better);
    std::vector<Hypothesis> next;
    for (size_t c = 0; c < keep; ++c) {
      Hypothesis h = live[candidates[c].hyp];
      h.token_ids.push_back(candidates[c].token);
      h.logprob = candidates[c].score;
      h.finished = candidates[c].token == kEosId || step == options.max_len;
      (h.finished ? pool : next).push_back(std::move(h));
    }
    live = std::move(next);

    // Raw scores never increase, so once `beam` finished hypotheses beat
    // every live one the top of the ranking is settled.
    if (!options.length_normalize && pool.size() >= static_cast<size_t>(options.beam) &&
        !live.empty()) {
      std::vector<double> finished_scores;
      for (const auto& h : pool) finished_scores.push_back(h.logprob);
      std::nth_element(finished_scores.begin(),
                       finished_scores.begin() + (options.beam - 1),
                       finished_scores.end(), std::greater<>());
      const double kth = finished_scores[options.beam - 1];
      double best_live = -std::numeric_limits<double>::infinity();
      for (const auto& h : live) best_live = std::max(best_live, h.logprob);
      if (best_live <= kth) break;
    }
  }

  std::vector<Hypothesis> all = std::move(pool);
  for (auto& h : live) all.push_back(std::move(h));
  std::stable_sort(all.begin(), all.end(), [&](const Hypothesis& a, const Hypothesis& b) {
    return rank_score(a, options.length_normalize) > rank_score(b, options.length_normalize);
  });
  return all;
}

Hypothesis greedy_decode(const ModelParams& params, const EncodedPair& source,
                         const TopicVectors* topics, int max_len) {
  DecodeSession session(params, source, topics);
  Hypothesis h{{kBosId}, 0.0, false};
  for (int step = 1; step <= max_len; ++step) {
    const auto logp = log_softmax(session.step_logits(h.token_ids));
    int best = -1;
    for (int t = 0; t < static_cast<int>(logp.size()); ++t) {
      if (emittable(t) && (best < 0 || logp[t] > logp[best])) best = t;
    }
    h.token_ids.push_back(best);
    h.logprob += logp[best];
    if (best == kEosId || step == max_len) {
      h.finished = true;
      break;
    }
  }
  return h;
}

TokenBag topic_bag(const Document& doc, const Vocabulary& vocab) {
  TokenBag bag;
  for (int id : vocab.encode(doc.flat_tokens())) {
    if (id >= kNumSpecials) bag.push_back(id);
  }
  return bag;
}

TopicVectors document_topic_vectors(const Document& doc, const Vocabulary& vocab,
                                    const TopicModel& model,
                                    std::shared_ptr<const WordTopicTable> table,
                                    int iters, uint64_t seed) {
  TopicVectors tv;
  tv.word_topics = std::move(table);
  tv.doc_topic = infer_doc_topics(model, topic_bag(doc, vocab), iters, Rng::mix(seed ^ fnv1a(doc.id)));
  return tv;
}

std::string summarize_document(const Document& doc,
                               const SummarizerArtifacts& artifacts,
                               const BeamOptions& options) {
  if (artifacts.vocab == nullptr || artifacts.params == nullptr) {
    throw Error(ErrorCode::kInvalidArgument, "summarizer needs vocab and params");
  }
  const EncodedPair pair = encode_pair(doc, *artifacts.vocab);
  TopicVectors topics;
  const TopicVectors* topic_ptr = nullptr;
  if (artifacts.params->config.variant != Variant::kPlain) {
    if (artifacts.topic_model == nullptr || !artifacts.word_topics) {
      throw Error(ErrorCode::kInvalidArgument,
                  "topic-aware checkpoint needs a topic model");
    }
    topics = document_topic_vectors(doc, *artifacts.vocab, *artifacts.topic_model,
                                    artifacts.word_topics, artifacts.topic_iters,
                                    artifacts.seed);
    topic_ptr = &topics;
  }
  const auto hyps = beam_search(*artifacts.params, pair, topic_ptr, options);
  return join_tokens(artifacts.vocab->decode(hyps.front().output_ids()));
}

std::string summarize(std::string_view raw_document,
                      const SummarizerArtifacts& artifacts,
                      const BeamOptions& options) {
  Document doc;
  doc.sentences = tokenize_sentences(raw_document);
  doc.raw_text = std::string(raw_document);
  return summarize_document(doc, artifacts, options);
}

}  // namespace xsf
