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

#ifndef XSUMFORGE_INFERENCE_H_
#define XSUMFORGE_INFERENCE_H_

#include <cstdint>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "xsumforge/convs2s.h"
#include "xsumforge/corpus.h"
#include "xsumforge/topiclda.h"

namespace xsf {

struct Hypothesis {
  std::vector<int> token_ids;  // BOS first
  double logprob = 0.0;
  bool finished = false;

  // Generated tokens without BOS/EOS.
  std::vector<int> output_ids() const;
};

struct BeamOptions {
  int beam = 10;
  int max_len = kMaxTargetTokens;  // generated tokens, EOS included
  bool length_normalize = false;   // rank by logprob / generated length
};

// Length-capped beam search. Each step expands every live hypothesis over
// the vocabulary (PAD and BOS excluded), keeps the best `beam` candidates
// by total log-probability (ties: earlier hypothesis, then lower token id),
// and retires hypotheses ending in EOS or reaching max_len to a pool.
// Returns pool and still-live hypotheses, best first.
std::vector<Hypothesis> beam_search(const ModelParams& params,
                                    const EncodedPair& source,
                                    const TopicVectors* topics,
                                    const BeamOptions& options = {});

// Argmax decoding (lowest id on ties).
Hypothesis greedy_decode(const ModelParams& params, const EncodedPair& source,
                         const TopicVectors* topics,
                         int max_len = kMaxTargetTokens);

// Everything needed to summarize raw text. topic_model / word_topics may
// be null for the plain variant.
struct SummarizerArtifacts {
  const Vocabulary* vocab = nullptr;
  const ModelParams* params = nullptr;
  const TopicModel* topic_model = nullptr;
  std::shared_ptr<const WordTopicTable> word_topics;
  int topic_iters = 50;
  uint64_t seed = 0;
};

// In-vocabulary document tokens as topic-model input (special ids and UNK
// dropped).
TokenBag topic_bag(const Document& doc, const Vocabulary& vocab);

// Topic inputs for one document: shared word table plus t_D inferred from
// the document's topic bag. The inference seed mixes the
// document id into `seed`.
TopicVectors document_topic_vectors(const Document& doc, const Vocabulary& vocab,
                                    const TopicModel& model,
                                    std::shared_ptr<const WordTopicTable> table,
                                    int iters, uint64_t seed);

// Tokenize, encode, infer t_D, beam search, detokenize. kEmptySource.
std::string summarize(std::string_view raw_document,
                      const SummarizerArtifacts& artifacts,
                      const BeamOptions& options = {});
std::string summarize_document(const Document& doc,
                               const SummarizerArtifacts& artifacts,
                               const BeamOptions& options = {});

}  // namespace xsf

#endif  // XSUMFORGE_INFERENCE_H_
