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

// The xsumforge command line: preprocess, train-lda, train, summarize,
// evaluate and analyze-corpus. Exit codes: 0 success, 1 usage error,
// 2 data error.

#ifndef XSUMFORGE_CLI_H_
#define XSUMFORGE_CLI_H_

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "xsumforge/convs2s.h"
#include "xsumforge/corpus.h"
#include "xsumforge/topiclda.h"
#include "xsumforge/trainer.h"

namespace xsf {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;

// JSON experiment description. Relative paths resolve against the config
// file's directory. The top-level seed overrides the per-component seeds.
//
//   {"seed": 1,
//    "paths": {"train", "validation", "vocab", "topics", "checkpoint_dir",
//              "log"},
//    "vocab_size": 50000,
//    "model": {...}, "trainer": {...},
//    "lda": {"num_topics", "alpha", "beta", "iters", "inference_iters",
//            "stopword_fraction"}}
struct PipelineConfig {
  uint64_t seed = 1;
  std::string train_path;
  std::string validation_path;
  std::string vocab_path;   // empty: build from the training split
  std::string topics_path;  // empty: train a topic model when needed
  std::string checkpoint_dir = "checkpoints";
  std::string log_path;
  int vocab_cap = kDefaultVocabCap;
  ModelConfig model;
  TrainerConfig trainer;
  LdaOptions lda;
  int topic_inference_iters = 50;

  // Pushes `seed` into every stochastic component.
  void propagate_seed();
};

PipelineConfig load_pipeline_config(const std::string& path);

// Pairs plus topic inputs; documents without source tokens are skipped.
std::vector<TrainingExample> build_examples(std::span<const Document> docs,
                                            const Vocabulary& vocab,
                                            const TopicModel* topic_model,
                                            int topic_iters, uint64_t seed,
                                            size_t* skipped = nullptr);

// args excludes the program name.
int run_cli(const std::vector<std::string>& args, std::istream& in,
            std::ostream& out, std::ostream& err);

}  // namespace xsf

#endif  // XSUMFORGE_CLI_H_
