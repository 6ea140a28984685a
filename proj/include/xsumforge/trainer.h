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

// Nesterov-momentum training with global gradient renormalization and a
// validation-driven learning-rate schedule: the rate holds until validation
// perplexity stops improving (or the pre-anneal epoch cap is hit), then
// drops by the anneal factor after every epoch until it falls below the
// floor.

#ifndef XSUMFORGE_TRAINER_H_
#define XSUMFORGE_TRAINER_H_

#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "xsumforge/convs2s.h"

namespace xsf {

struct TrainerConfig {
  double learning_rate = 0.10;
  double momentum = 0.99;
  double clip_norm = 0.1;
  double min_learning_rate = 1e-4;
  double anneal_factor = 0.1;
  int max_epochs_before_anneal = 30;
  int anneal_patience = 0;  // non-improving epochs tolerated before decay starts
  int max_epochs = 100;
  int batch_size = 32;
  int sort_window = 1024;
  uint64_t seed = 1;
  std::string checkpoint_dir;  // empty: no checkpoints
  std::string log_path;        // empty: no CSV log
};

void to_json(nlohmann::json& j, const TrainerConfig& c);
void from_json(const nlohmann::json& j, TrainerConfig& c);

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;
  double val_ppl = 0.0;
  double lr = 0.0;
};

struct TrainState {
  ModelParams params;       // after the last step
  ModelParams best_params;  // snapshot at the best validation perplexity
  std::vector<std::vector<double>> velocity;  // mirrors params.named()
  double lr = 0.10;
  int epoch = 0;
  double best_val_ppl = std::numeric_limits<double>::infinity();
  bool annealing = false;
  int anneal_steps = 0;
  int stale_epochs = 0;  // consecutive epochs without a new best
  std::vector<EpochRecord> history;

  static TrainState start(ModelParams params, const TrainerConfig& config);
};

struct TrainingExample {
  EncodedPair pair;
  TopicVectors topics;
};

// Scales every gradient by threshold / ||g|| when the global L2 norm
// exceeds threshold. Returns the norm before scaling.
double renorm_grads(std::span<Tensor> tensors, double threshold = 0.1);

// v <- mu v - lr g;  theta <- theta + mu v - lr g  (using the updated v).
void nesterov_step(std::span<Tensor> params,
                   std::vector<std::vector<double>>& velocity, double lr,
                   double momentum);
void nesterov_step(TrainState& state, double momentum = 0.99);

// exp(mean NLL) over every non-PAD target token. kEmptyValidationSet.
double validation_perplexity(const ModelParams& params,
                             std::span<const TrainingExample> val);

enum class ScheduleDecision { kContinue, kStop };

// Called once per finished epoch (state.epoch already counts it); sets the
// rate for the next epoch.
ScheduleDecision anneal_and_stop(TrainState& state, double new_val_ppl,
                                 const TrainerConfig& config);

using EpochCallback = std::function<void(const TrainState&)>;

// Full loop: shuffled, length-sorted batches; forward, backward, renorm,
// Nesterov step per batch; validation, checkpoint and log per epoch.
// Deterministic under config.seed. kInvalidArgument for empty inputs or
// an all-PAD batch.
TrainState train(ModelParams params, std::span<const TrainingExample> train_set,
                 std::span<const TrainingExample> val_set,
                 const TrainerConfig& config,
                 const EpochCallback& on_epoch = nullptr);

}  // namespace xsf

#endif  // XSUMFORGE_TRAINER_H_
