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

#include "xsumforge/trainer.h"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <sstream>

namespace xsf {

namespace {

std::vector<Tensor> param_handles(const ModelParams& params) {
  std::vector<Tensor> out;
  for (auto& [name, t] : params.named()) out.push_back(t);
  return out;
}

int64_t target_tokens(const EncodedPair& pair) {
  return std::count_if(pair.target_ids.begin(), pair.target_ids.end(),
                       [](int t) { return t != kPadId; });
}

std::vector<std::vector<size_t>> make_batches(
    std::span<const TrainingExample> data, const TrainerConfig& config,
    Rng& rng) {
  std::vector<size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  for (size_t i = order.size(); i > 1; --i) {
    std::swap(order[i - 1], order[rng.uniform_int(i)]);
  }
  const size_t window = static_cast<size_t>(std::max(config.sort_window, 1));
  for (size_t w = 0; w < order.size(); w += window) {
    const auto end = order.begin() + std::min(order.size(), w + window);
    std::stable_sort(order.begin() + w, end, [&](size_t a, size_t b) {
      return data[a].pair.source_ids.size() < data[b].pair.source_ids.size();
    });
  }
  std::vector<std::vector<size_t>> batches;
  const size_t bs = static_cast<size_t>(std::max(config.batch_size, 1));
  for (size_t i = 0; i < order.size(); i += bs) {
    batches.emplace_back(order.begin() + i,
                         order.begin() + std::min(order.size(), i + bs));
  }
  for (size_t i = batches.size(); i > 1; --i) {
    std::swap(batches[i - 1], batches[rng.uniform_int(i)]);
  }
  return batches;
}

}  // namespace

void to_json(nlohmann::json& j, const TrainerConfig& c) {
  j = nlohmann::json{{"learning_rate", c.learning_rate},
                     {"momentum", c.momentum},
                     {"clip_norm", c.clip_norm},
                     {"min_learning_rate", c.min_learning_rate},
                     {"anneal_factor", c.anneal_factor},
                     {"max_epochs_before_anneal", c.max_epochs_before_anneal},
                     {"anneal_patience", c.anneal_patience},
                     {"max_epochs", c.max_epochs},
                     {"batch_size", c.batch_size},
                     {"sort_window", c.sort_window},
                     {"seed", c.seed},
                     {"checkpoint_dir", c.checkpoint_dir},
                     {"log_path", c.log_path}};
}

void from_json(const nlohmann::json& j, TrainerConfig& c) {
  auto get = [&j](const char* key, auto& field) {
    if (j.contains(key)) j.at(key).get_to(field);
  };
  get("learning_rate", c.learning_rate);
  get("momentum", c.momentum);
  get("clip_norm", c.clip_norm);
  get("min_learning_rate", c.min_learning_rate);
  get("anneal_factor", c.anneal_factor);
  get("max_epochs_before_anneal", c.max_epochs_before_anneal);
  get("anneal_patience", c.anneal_patience);
  get("max_epochs", c.max_epochs);
  get("batch_size", c.batch_size);
  get("sort_window", c.sort_window);
  get("seed", c.seed);
  get("checkpoint_dir", c.checkpoint_dir);
  get("log_path", c.log_path);
}

TrainState TrainState::start(ModelParams params, const TrainerConfig& config) {
  if (config.learning_rate <= 0.0) {
    throw Error(ErrorCode::kInvalidArgument, "learning rate must be positive");
  }
  if (config.anneal_factor <= 0.0 || config.anneal_factor >= 1.0) {
    throw Error(ErrorCode::kInvalidArgument, "anneal factor must be in (0, 1)");
  }
  TrainState s;
  s.params = std::move(params);
  for (const auto& [name, t] : s.params.named()) {
    s.velocity.emplace_back(static_cast<size_t>(t.size()), 0.0);
  }
  s.best_params = s.params.clone();
  s.lr = config.learning_rate;
  return s;
}

double renorm_grads(std::span<Tensor> tensors, double threshold) {
  double ss = 0.0;
  for (auto& t : tensors) {
    for (double g : t.grad()) ss += g * g;
  }
  const double norm = std::sqrt(ss);
  if (norm > threshold) {
    const double factor = threshold / norm;
    for (auto& t : tensors) {
      for (double& g : t.grad()) g *= factor;
    }
  }
  return norm;
}

void nesterov_step(std::span<Tensor> params,
                   std::vector<std::vector<double>>& velocity, double lr,
                   double momentum) {
  if (velocity.size() != params.size()) {
    throw Error(ErrorCode::kShapeMismatch, "velocity does not mirror params");
  }
  for (size_t p = 0; p < params.size(); ++p) {
    auto theta = params[p].mutable_values();
    const auto g = params[p].grad();
    auto& v = velocity[p];
    if (v.size() != theta.size()) {
      throw Error(ErrorCode::kShapeMismatch, "velocity does not mirror params");
    }
    for (size_t i = 0; i < theta.size(); ++i) {
      v[i] = momentum * v[i] - lr * g[i];
      theta[i] += momentum * v[i] - lr * g[i];
    }
  }
}

void nesterov_step(TrainState& state, double momentum) {
  std::vector<Tensor> handles = param_handles(state.params);
  nesterov_step(handles, state.velocity, state.lr, momentum);
}

double validation_perplexity(const ModelParams& params,
                             std::span<const TrainingExample> val) {
  if (val.empty()) {
    throw Error(ErrorCode::kEmptyValidationSet, "no validation pairs");
  }
  std::vector<double> nll(val.size(), 0.0);
  std::vector<int64_t> counts(val.size(), 0);
  parallel_for(val.size(), [&](size_t i) {
    counts[i] = target_tokens(val[i].pair);
    if (counts[i] == 0) return;
    Tape tape = Tape::inference();
    const Tensor loss = forward_loss(tape, params, val[i].pair, &val[i].topics);
    nll[i] = loss.item() * static_cast<double>(counts[i]);
  });
  double total = 0.0;
  int64_t n = 0;
  for (size_t i = 0; i < val.size(); ++i) {
    total += nll[i];
    n += counts[i];
  }
  if (n == 0) throw Error(ErrorCode::kEmptyValidationSet, "no target tokens");
  return std::exp(total / static_cast<double>(n));
}

ScheduleDecision anneal_and_stop(TrainState& state, double new_val_ppl,
                                 const TrainerConfig& config) {
  const bool improved = new_val_ppl < state.best_val_ppl;
  if (improved) state.best_val_ppl = new_val_ppl;
  state.stale_epochs = improved ? 0 : state.stale_epochs + 1;
  if (!state.annealing && (state.stale_epochs > config.anneal_patience ||
                           state.epoch >= config.max_epochs_before_anneal)) {
    state.annealing = true;
  }
  if (state.annealing) {
    ++state.anneal_steps;
    // Dividing by an exact power keeps 0.1 -> 0.01 -> 0.001 exact.
    state.lr = config.learning_rate /
               std::pow(1.0 / config.anneal_factor, state.anneal_steps);
  }
  const bool below_floor =
      state.lr < config.min_learning_rate * (1.0 - 1e-12);
  if (below_floor || state.epoch >= config.max_epochs) {
    return ScheduleDecision::kStop;
  }
  return ScheduleDecision::kContinue;
}

TrainState train(ModelParams params, std::span<const TrainingExample> train_set,
                 std::span<const TrainingExample> val_set,
                 const TrainerConfig& config, const EpochCallback& on_epoch) {
  if (train_set.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "empty training set");
  }
  if (val_set.empty()) {
    throw Error(ErrorCode::kEmptyValidationSet, "no validation pairs");
  }
  for (const auto& ex : train_set) {
    if (target_tokens(ex.pair) == 0) {
      throw Error(ErrorCode::kInvalidArgument,
                  "pair '" + ex.pair.id + "' has only PAD targets");
    }
  }
  TrainState state = TrainState::start(std::move(params), config);
  std::vector<Tensor> handles = param_handles(state.params);
  Rng rng(config.seed);

  std::ofstream log;
  if (!config.log_path.empty()) {
    log.open(config.log_path, std::ios::binary);
    if (!log) throw Error(ErrorCode::kIoError, "cannot write " + config.log_path);
    log << "epoch,loss,val_ppl,lr\n";
  }
  if (!config.checkpoint_dir.empty()) {
    std::filesystem::create_directories(config.checkpoint_dir);
  }

  while (true) {
    const double epoch_lr = state.lr;
    double loss_sum = 0.0;
    int64_t token_sum = 0;
    for (const auto& batch : make_batches(train_set, config, rng)) {
      std::vector<BatchItem> items;
      int64_t tokens = 0;
      for (size_t i : batch) {
        items.push_back({&train_set[i].pair, &train_set[i].topics});
        tokens += target_tokens(train_set[i].pair);
      }
      state.params.zero_grad();
      Tape tape;
      const Tensor loss = forward_batch_loss(tape, state.params, items,
                                             RunMode{true, &rng});
      tape.backward(loss);
      renorm_grads(handles, config.clip_norm);
      nesterov_step(handles, state.velocity, state.lr, config.momentum);
      loss_sum += loss.item() * static_cast<double>(tokens);
      token_sum += tokens;
    }
    ++state.epoch;
    const double train_loss = loss_sum / static_cast<double>(token_sum);
    const double val_ppl = validation_perplexity(state.params, val_set);
    state.history.push_back({state.epoch, train_loss, val_ppl, epoch_lr});

    if (log.is_open()) {
      std::ostringstream row;
      row << state.epoch << ',' << std::setprecision(17) << train_loss << ','
          << val_ppl << ',' << epoch_lr << '\n';
      log << row.str() << std::flush;
    }
    if (!config.checkpoint_dir.empty()) {
      state.params.save((std::filesystem::path(config.checkpoint_dir) /
                         ("ckpt-epoch" + std::to_string(state.epoch)))
                            .string());
    }
    if (val_ppl < state.best_val_ppl) {
      state.best_params = state.params.clone();
      if (!config.checkpoint_dir.empty()) {
        state.best_params.save(
            (std::filesystem::path(config.checkpoint_dir) / "best.ckpt").string());
      }
    }
    const ScheduleDecision decision = anneal_and_stop(state, val_ppl, config);
    if (on_epoch) on_epoch(state);
    if (decision == ScheduleDecision::kStop) break;
  }
  return state;
}

}  // namespace xsf
