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

#include <cmath>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "test_support.h"
#include "xsumforge/trainer.h"

namespace xsf {
namespace {

using testing::random_pair;
using testing::tiny_config;

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an Error");
  return ErrorCode::kFormatError;
}

double grad_norm(std::span<const Tensor> ts) {
  double s = 0.0;
  for (const auto& t : ts)
    for (double g : t.grad()) s += g * g;
  return std::sqrt(s);
}

// Plays back a fixed validation-perplexity sequence and records the rate
// in effect for every epoch that runs.
std::vector<double> schedule_trace(const std::vector<double>& ppl,
                                   const TrainerConfig& config) {
  TrainState s = TrainState::start(ModelParams::init(tiny_config(Variant::kPlain), 0), config);
  std::vector<double> used;
  for (double p : ppl) {
    used.push_back(s.lr);
    ++s.epoch;
    if (anneal_and_stop(s, p, config) == ScheduleDecision::kStop) return used;
  }
  used.push_back(-1.0);  // never stopped
  return used;
}

std::vector<TrainingExample> toy_examples(const Vocabulary& vocab) {
  std::vector<TrainingExample> out;
  for (const Document& d : load_jsonl(XSF_FIXTURE_DIR "/toy_pairs.jsonl")) {
    out.push_back({encode_pair(d, vocab), {}});
  }
  return out;
}

TEST_CASE("renormalization") {
  SUBCASE("hand example") {
    Tensor t = Tensor::from({2}, {0, 0}, true);
    t.grad()[0] = 0.3;
    t.grad()[1] = 0.4;
    std::vector<Tensor> ts = {t};
    CHECK(renorm_grads(ts, 0.1) == doctest::Approx(0.5));
    CHECK(t.grad()[0] == doctest::Approx(0.06).epsilon(1e-15));
    CHECK(t.grad()[1] == doctest::Approx(0.08).epsilon(1e-15));
  }
  SUBCASE("below the threshold nothing moves") {
    Tensor t = Tensor::from({2}, {0, 0}, true);
    t.grad()[0] = 0.03;
    t.grad()[1] = 0.04;
    std::vector<Tensor> ts = {t};
    renorm_grads(ts, 0.1);
    CHECK(t.grad()[0] == 0.03);
    CHECK(t.grad()[1] == 0.04);
  }
  SUBCASE("random gradients end at most at the threshold") {
    Rng rng(1);
    for (int trial = 0; trial < 200; ++trial) {
      std::vector<Tensor> ts;
      for (int p = 0; p < 3; ++p) {
        Tensor t = Tensor::zeros({4}, true);
        const double scale = std::pow(10.0, rng.uniform() * 4 - 3);
        for (double& g : t.grad()) g = rng.normal() * scale;
        ts.push_back(t);
      }
      const double before = grad_norm(ts);
      std::vector<double> direction;
      for (auto& t : ts)
        for (double g : t.grad()) direction.push_back(g / before);
      renorm_grads(ts, 0.1);
      const double after = grad_norm(ts);
      CHECK(after <= 0.1 + 1e-12);
      if (before <= 0.1) CHECK(after == before);
      size_t i = 0;
      for (auto& t : ts)
        for (double g : t.grad()) CHECK(g / after == doctest::Approx(direction[i++]));
    }
  }
}

TEST_CASE("nesterov updates") {
  SUBCASE("zero gradient at rest is a fixed point") {
    Tensor t = Tensor::from({3}, {1, -2, 3}, true);
    t.grad();
    std::vector<Tensor> ts = {t};
    std::vector<std::vector<double>> v = {{0, 0, 0}};
    nesterov_step(ts, v, 0.1, 0.99);
    CHECK(t[0] == 1);
    CHECK(t[1] == -2);
    CHECK(t[2] == 3);
  }
  SUBCASE("first step from rest is SGD scaled by 1 + momentum") {
    Tensor t = Tensor::from({2}, {1, 1}, true);
    t.grad()[0] = 0.5;
    t.grad()[1] = -2.0;
    std::vector<Tensor> ts = {t};
    std::vector<std::vector<double>> v = {{0, 0}};
    nesterov_step(ts, v, 0.1, 0.99);
    CHECK(t[0] == doctest::Approx(1 - 1.99 * 0.1 * 0.5).epsilon(1e-15));
    CHECK(t[1] == doctest::Approx(1 + 1.99 * 0.1 * 2.0).epsilon(1e-15));
    CHECK(v[0][0] == doctest::Approx(-0.05));
  }
  SUBCASE("quadratic bowl") {
    Tensor t = Tensor::from({1}, {1.0}, true);
    std::vector<Tensor> ts = {t};
    std::vector<std::vector<double>> v = {{0.0}};
    for (int step = 0; step < 500; ++step) {
      t.grad()[0] = 2.0 * t[0];
      nesterov_step(ts, v, 0.01, 0.99);
    }
    // Scalar simulation of the same recurrence.
    CHECK(t[0] == doctest::Approx(-0.00016678102059892186).epsilon(1e-12));
    CHECK(std::abs(t[0]) < 1e-2);
  }
  SUBCASE("velocity must mirror the parameters") {
    Tensor t = Tensor::zeros({2}, true);
    std::vector<Tensor> ts = {t};
    std::vector<std::vector<double>> v = {{0.0}};
    CHECK(code_of([&] { nesterov_step(ts, v, 0.1, 0.9); }) == ErrorCode::kShapeMismatch);
  }
  SUBCASE("state velocity mirrors params") {
    const TrainState s =
        TrainState::start(ModelParams::init(tiny_config(Variant::kEncT), 2), TrainerConfig{});
    const auto named = s.params.named();
    REQUIRE(s.velocity.size() == named.size());
    for (size_t i = 0; i < named.size(); ++i) {
      CHECK(static_cast<int64_t>(s.velocity[i].size()) == named[i].second.size());
    }
    CHECK(s.lr == 0.10);
  }
}

TEST_CASE("defaults") {
  const TrainerConfig c;
  CHECK(c.learning_rate == 0.10);
  CHECK(c.momentum == 0.99);
  CHECK(c.clip_norm == 0.1);
  CHECK(c.min_learning_rate == 1e-4);
  CHECK(c.anneal_factor == 0.1);
  CHECK(c.batch_size == 32);
  CHECK(c.max_epochs_before_anneal == 30);
  nlohmann::json j = c;
  CHECK(nlohmann::json(j.get<TrainerConfig>()) == j);
}

TEST_CASE("learning-rate schedule") {
  TrainerConfig config;
  config.max_epochs = 1000;

  SUBCASE("plateau at the third epoch") {
    const auto used = schedule_trace({10, 9, 9.5, 9, 8, 7, 6, 5, 4}, config);
    CHECK(used == std::vector<double>{0.10, 0.10, 0.10, 0.01, 0.001, 1e-4});
  }
  SUBCASE("steady improvement keeps the rate") {
    std::vector<double> ppl;
    for (int i = 0; i < 20; ++i) ppl.push_back(100.0 - i);
    const auto used = schedule_trace(ppl, config);
    REQUIRE(used.size() == 21);
    CHECK(used.back() == -1.0);
    for (int i = 0; i < 20; ++i) CHECK(used[i] == 0.10);
  }
  SUBCASE("decay is geometric once it begins") {
    const auto used = schedule_trace({5, 5, 1, 1, 1, 1, 1}, config);
    REQUIRE(used.size() == 5);
    for (int k = 0; k < 4; ++k) {
      CHECK(used[k + 1] == doctest::Approx(0.10 * std::pow(10.0, -k)).epsilon(1e-12));
    }
  }
  SUBCASE("the pre-anneal cap starts the decay") {
    TrainerConfig capped = config;
    capped.max_epochs_before_anneal = 2;
    const auto used = schedule_trace({9, 8, 7, 6, 5, 4, 3}, capped);
    CHECK(used == std::vector<double>{0.10, 0.10, 0.01, 0.001, 1e-4});
  }
  SUBCASE("the epoch cap stops training") {
    TrainerConfig capped = config;
    capped.max_epochs = 3;
    const auto used = schedule_trace({9, 8, 7, 6}, capped);
    CHECK(used.size() == 3);
  }
  SUBCASE("the rate never leaves (0, 0.10]") {
    Rng rng(3);
    for (int trial = 0; trial < 50; ++trial) {
      std::vector<double> ppl;
      for (int i = 0; i < 30; ++i) ppl.push_back(1.0 + rng.uniform() * 10);
      for (double lr : schedule_trace(ppl, config)) {
        if (lr == -1.0) continue;
        CHECK(lr > 0.0);
        CHECK(lr <= 0.10);
      }
    }
  }
}

TEST_CASE("validation perplexity") {
  const ModelParams p = ModelParams::init(tiny_config(Variant::kPlain), 4);
  std::vector<TrainingExample> val;
  for (uint64_t s = 0; s < 8; ++s) val.push_back({random_pair(50, 6, 5, s), {}});
  const double ppl = validation_perplexity(p, val);
  CHECK(ppl >= 1.0);
  CHECK(std::abs(ppl - 50.0) < 0.10 * 50.0);

  // Token-weighted, not pair-weighted.
  double nll = 0.0;
  for (const auto& ex : val) {
    Tape tape = Tape::inference();
    nll += forward_loss(tape, p, ex.pair, nullptr).item() * 5;
  }
  CHECK(ppl == doctest::Approx(std::exp(nll / 40)).epsilon(1e-12));
  CHECK(code_of([&] { validation_perplexity(p, {}); }) == ErrorCode::kEmptyValidationSet);
}

TEST_CASE("PAD-only padding leaves the batch loss unchanged") {
  const ModelParams p = ModelParams::init(tiny_config(Variant::kPlain), 5);
  const EncodedPair a = random_pair(50, 5, 3, 1);
  const EncodedPair b = random_pair(50, 7, 4, 2);
  const BatchItem items[] = {{&a, nullptr}, {&b, nullptr}};
  Tape tape = Tape::inference();
  const double base = forward_batch_loss(tape, p, items).item();
  CHECK(forward_batch_loss(tape, p, items, {}, 8).item() == doctest::Approx(base).epsilon(1e-12));
  CHECK(forward_batch_loss(tape, p, items, {}, 16).item() == doctest::Approx(base).epsilon(1e-12));
}

TEST_CASE("training on the toy corpus") {
  const auto docs = load_jsonl(XSF_FIXTURE_DIR "/toy_pairs.jsonl");
  const Vocabulary vocab = build_vocab(docs);
  const auto data = toy_examples(vocab);
  REQUIRE(data.size() == 50);

  ModelConfig mc = tiny_config(Variant::kPlain, vocab.size());
  mc.f = mc.d = 32;
  TrainerConfig tc;
  tc.max_epochs = 5;
  tc.seed = 9;

  const TrainState a = train(ModelParams::init(mc, 10), data, data, tc);
  REQUIRE(a.history.size() == 5);
  for (size_t i = 1; i < a.history.size(); ++i) {
    CHECK(a.history[i].train_loss < a.history[i - 1].train_loss);
  }
  for (const auto& r : a.history) CHECK(r.val_ppl >= 1.0);

  SUBCASE("same seed, same curve") {
    const TrainState b = train(ModelParams::init(mc, 10), data, data, tc);
    for (size_t i = 0; i < a.history.size(); ++i) {
      CHECK(b.history[i].train_loss == a.history[i].train_loss);
      CHECK(b.history[i].val_ppl == a.history[i].val_ppl);
      CHECK(b.history[i].lr == a.history[i].lr);
    }
  }

  SUBCASE("checkpoints and log") {
    const auto dir = std::filesystem::temp_directory_path() / "xsf_trainer_ckpt";
    std::filesystem::remove_all(dir);
    TrainerConfig logged = tc;
    logged.max_epochs = 2;
    logged.checkpoint_dir = dir.string();
    logged.log_path = (dir / "log.csv").string();
    std::filesystem::create_directories(dir);
    const TrainState s = train(ModelParams::init(mc, 10), data, data, logged);
    CHECK(std::filesystem::exists(dir / "ckpt-epoch1"));
    CHECK(std::filesystem::exists(dir / "ckpt-epoch2"));
    CHECK(std::filesystem::exists(dir / "best.ckpt"));
    const ModelParams last = ModelParams::load((dir / "ckpt-epoch2").string());
    const auto x = last.named(), y = s.params.named();
    for (size_t i = 0; i < x.size(); ++i) {
      CHECK(std::equal(x[i].second.values().begin(), x[i].second.values().end(),
                       y[i].second.values().begin()));
    }
    std::ifstream log(logged.log_path);
    std::string line;
    std::getline(log, line);
    CHECK(line == "epoch,loss,val_ppl,lr");
    int rows = 0;
    while (std::getline(log, line)) ++rows;
    CHECK(rows == 2);
    std::filesystem::remove_all(dir);
  }
}

TEST_CASE("a single pair is memorized") {
  const auto docs = load_jsonl(XSF_FIXTURE_DIR "/toy_pairs.jsonl");
  const Vocabulary vocab = build_vocab(docs);
  const std::vector<TrainingExample> one = {{encode_pair(docs[0], vocab), {}}};
  TrainerConfig tc;
  tc.max_epochs = 60;
  tc.batch_size = 1;
  const TrainState s =
      train(ModelParams::init(tiny_config(Variant::kPlain, vocab.size()), 11), one, one, tc);
  const double best = validation_perplexity(s.best_params, one);
  CHECK(best <= 1.1);
  for (const auto& r : s.history) CHECK(best <= r.val_ppl);
}

TEST_CASE("degenerate training input") {
  const ModelParams p = ModelParams::init(tiny_config(Variant::kPlain), 12);
  TrainingExample pad_only{random_pair(50, 4, 3, 1), {}};
  std::fill(pad_only.pair.target_ids.begin(), pad_only.pair.target_ids.end(), kPadId);
  const std::vector<TrainingExample> bad = {pad_only};
  const std::vector<TrainingExample> good = {{random_pair(50, 4, 3, 2), {}}};
  CHECK(code_of([&] { train(p, bad, good, TrainerConfig{}); }) == ErrorCode::kInvalidArgument);
  CHECK(code_of([&] { train(p, {}, good, TrainerConfig{}); }) == ErrorCode::kInvalidArgument);
  CHECK(code_of([&] { train(p, good, {}, TrainerConfig{}); }) ==
        ErrorCode::kEmptyValidationSet);
  Tape tape = Tape::inference();
  const BatchItem item{&bad[0].pair, nullptr};
  CHECK(code_of([&] { forward_batch_loss(tape, p, std::span<const BatchItem>(&item, 1)); }) ==
        ErrorCode::kInvalidArgument);
}

}  // namespace
}  // namespace xsf
