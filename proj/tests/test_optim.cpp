/*
 * Copyright 2026 The Corticast Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include <doctest.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>

#include "corticast/checkpoint.hpp"
#include "corticast/error.hpp"
#include "corticast/optim.hpp"
#include "corticast/synthetic.hpp"
#include "corticast/task.hpp"
#include "support/oracles.hpp"

using namespace corticast;
using namespace corticast::optim;

namespace {

struct Fixture {
  dataio::Dataset dataset;
  dataio::StandardizationStats stats;
  TaskData train, val;
};

Fixture fixture(Task task = Task::scan_age, std::size_t n = 40, std::uint64_t seed = 3) {
  Fixture f;
  f.dataset = dataio::generate_synthetic(n, 1, seed).dataset;
  f.stats = dataio::fit_standardization(f.dataset);
  f.train = build_inputs(f.dataset, task, f.stats, f.dataset.indices_of(dataio::Split::train));
  f.val = build_inputs(f.dataset, task, f.stats, f.dataset.indices_of(dataio::Split::val));
  return f;
}

autonet::ModelConfig model_for(Task task, std::size_t channels = 4) {
  autonet::ModelConfig cfg;
  cfg.in_channels = task_in_channels(task, channels);
  cfg.out_units = task_targets(task).size();
  return cfg;
}

}  // namespace

TEST_CASE("mse value and gradient") {
  const Matrix pred(2, 2, std::vector<double>{1.0, 2.0, 3.0, 5.0});
  const Matrix target(2, 2, std::vector<double>{0.0, 2.0, 1.0, 4.0});
  const std::vector<double> w{1.0, 0.5};
  const auto r = mse_loss(pred, target, w);
  // column 0: (1 + 4) / 2, column 1: (0 + 1) / 2
  CHECK(r.loss == doctest::Approx(2.5 + 0.5 * 0.5).epsilon(1e-15));
  CHECK(r.gradient(0, 0) == doctest::Approx(2 * 1.0 / 2));
  CHECK(r.gradient(1, 0) == doctest::Approx(2 * 2.0 / 2));
  CHECK(r.gradient(1, 1) == doctest::Approx(0.5 * 2 * 1.0 / 2));
  CHECK(r.gradient(0, 1) == 0.0);

  Matrix p = pred;
  auto loss = [&] { return mse_loss(p, target, w).loss; };
  const auto fd = oracle::finite_difference(p.values(), mse_loss(pred, target, w).gradient.values(), loss);
  CHECK(fd.failures == 0);
}

TEST_CASE("adam matches a hand trace") {
  std::vector<double> theta{1.0, -2.0};
  std::vector<std::span<double>> params{std::span<double>(theta)};
  auto state = AdamState::zeros_like(std::vector<std::vector<double>>{theta});
  AdamConfig cfg;
  cfg.learning_rate = 0.1;
  const std::vector<std::vector<double>> grads{{0.5, -1.0}, {0.1, 0.2}, {-0.3, 0.05}};
  const std::vector<std::array<double, 2>> expected{{0.900000002, -1.900000001},
                                                    {0.8196959063846518, -1.8488973939904947},
                                                    {0.7986246117635081, -1.812573764574355}};
  for (std::size_t t = 0; t < 3; ++t) {
    autonet::ParamGrads g;
    g.arrays = {grads[t]};
    adam_step(params, g, state, cfg);
    CHECK(state.step == t + 1);
    CHECK(std::abs(theta[0] - expected[t][0]) <= 1e-14);
    CHECK(std::abs(theta[1] - expected[t][1]) <= 1e-14);
  }
}

TEST_CASE("adam rejects non-finite gradients without moving") {
  std::vector<double> theta{1.0};
  std::vector<std::span<double>> params{std::span<double>(theta)};
  auto state = AdamState::zeros_like(std::vector<std::vector<double>>{theta});
  autonet::ParamGrads g;
  g.arrays = {{std::numeric_limits<double>::infinity()}};
  CHECK_THROWS_AS(adam_step(params, g, state, AdamConfig{}), NumericError);
  CHECK(theta[0] == 1.0);
}

TEST_CASE("adam step through the model bumps the revision") {
  auto m = autonet::init_model(autonet::ModelConfig{}, 1);
  auto state = AdamState::zeros_like(m);
  auto g = autonet::ParamGrads::zeros_like(m);
  const auto before = m.revision();
  adam_step(m, g, state, AdamConfig{});
  CHECK(m.revision() > before);
}

TEST_CASE("early stopping counts epochs since the strict minimum") {
  EarlyStopper s(2);
  CHECK(s.observe(1, 1.0));
  CHECK_FALSE(s.observe(2, 1.0));
  CHECK_FALSE(s.should_stop());
  CHECK(s.observe(3, 0.5));
  CHECK_FALSE(s.observe(4, 0.7));
  CHECK_FALSE(s.should_stop());
  CHECK_FALSE(s.observe(5, 0.5));
  CHECK(s.should_stop());
  CHECK(s.best_epoch() == 3);
  CHECK(s.best_loss() == 0.5);
}

TEST_CASE("batches cover the order and never end in a singleton") {
  for (std::size_t n = 1; n < 70; ++n) {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    const auto batches = make_batches(order, 32);
    std::vector<std::size_t> seen;
    for (const auto& b : batches) {
      if (n > 1) CHECK(b.size() >= 2);
      seen.insert(seen.end(), b.begin(), b.end());
    }
    CHECK(seen == order);
  }
  std::vector<std::size_t> order(33);
  std::iota(order.begin(), order.end(), 0);
  const auto b = make_batches(order, 32);
  REQUIRE(b.size() == 1);
  CHECK(b[0].size() == 33);
}

TEST_CASE("scan-age inputs are the standardized features") {
  const auto f = fixture();
  CHECK(f.train.inputs.channels() == 4);
  CHECK(f.train.inputs.vertices == 42);
  const std::size_t s = f.train.subjects[0];
  const auto z = dataio::apply_standardization(f.dataset.subjects[s].features, f.stats);
  for (std::size_t v = 0; v < 42; ++v) {
    for (std::size_t c = 0; c < 4; ++c) CHECK(f.train.inputs.at(0, v, c) == z.at(c, v));
  }
  CHECK(f.train.natural_targets(0, 0) == *f.dataset.subjects[s].meta.pma_scan);
  CHECK(f.train.targets(0, 0) == f.stats.require(dataio::Target::pma_scan).apply(*f.dataset.subjects[s].meta.pma_scan));
}

TEST_CASE("birth-age inputs add a constant scan-age channel") {
  const auto f = fixture(Task::birth_age);
  CHECK(f.train.inputs.channels() == 5);
  CHECK(task_channel_names(Task::birth_age, dataio::kCorticalChannels).back() == "pma_scan");
  for (std::size_t s = 0; s < f.train.size(); ++s) {
    const double pma = *f.dataset.subjects[f.train.subjects[s]].meta.pma_scan;
    const double z = f.stats.require(dataio::Target::pma_scan).apply(pma);
    for (std::size_t v = 0; v < 42; ++v) CHECK(f.train.inputs.at(s, v, 4) == z);
  }
  CHECK(f.train.natural_targets(0, 0) == *f.dataset.subjects[f.train.subjects[0]].meta.ga_birth);
}

TEST_CASE("challenge targets are three outputs and incomplete subjects drop out") {
  auto f = fixture(Task::challenge);
  CHECK(f.train.targets.cols() == 3);
  const auto train = f.dataset.indices_of(dataio::Split::train);
  f.dataset.subjects[train[0]].meta.birthweight.reset();
  const auto data = build_inputs(f.dataset, Task::challenge, f.stats, train);
  CHECK(data.size() == train.size() - 1);
  CHECK(std::find(data.subjects.begin(), data.subjects.end(), train[0]) == data.subjects.end());
}

TEST_CASE("missing metadata lists every subject") {
  auto f = fixture(Task::birth_age);
  const auto train = f.dataset.indices_of(dataio::Split::train);
  f.dataset.subjects[train[1]].meta.ga_birth.reset();
  f.dataset.subjects[train[3]].meta.pma_scan.reset();
  try {
    build_inputs(f.dataset, Task::birth_age, f.stats, train);
    FAIL("expected MetadataError");
  } catch (const MetadataError& e) {
    CHECK(e.subjects() == std::vector<std::string>{f.dataset.subjects[train[1]].meta.subject_id,
                                                   f.dataset.subjects[train[3]].meta.subject_id});
  }
  const auto kept = build_inputs(f.dataset, Task::birth_age, f.stats, train, MissingPolicy::exclude);
  CHECK(kept.size() == train.size() - 2);
}

TEST_CASE("task names round trip") {
  for (Task t : {Task::scan_age, Task::birth_age, Task::challenge}) CHECK(parse_task(to_string(t)) == t);
  CHECK_THROWS_AS(parse_task("age"), std::invalid_argument);
}

TEST_CASE("training returns the best validation snapshot") {
  const auto f = fixture();
  TrainConfig cfg;
  cfg.patience = 20;
  cfg.max_epochs = 400;
  cfg.seed = 5;
  cfg.record_wall_time = false;
  const auto result = train(autonet::init_model(model_for(Task::scan_age), 5), f.train, f.val, cfg);
  const auto& log = result.log;
  REQUIRE_FALSE(log.epochs.empty());
  double logged_min = std::numeric_limits<double>::infinity();
  std::size_t argmin = 0;
  for (const auto& e : log.epochs) {
    if (e.val_loss < logged_min) {
      logged_min = e.val_loss;
      argmin = e.epoch;
    }
  }
  CHECK(log.best_val_loss == logged_min);
  CHECK(log.best_epoch == argmin);
  CHECK(evaluate_loss(result.model, f.val, std::vector<double>{1.0}) == log.best_val_loss);
  CHECK(result.model.mode == autonet::Mode::eval);
  CHECK(log.stopped_epoch - log.best_epoch <= cfg.patience);
  if (log.stopped_epoch < cfg.max_epochs) CHECK(log.stopped_epoch - log.best_epoch == cfg.patience);
  CHECK(log.epochs.back().train_loss < log.epochs.front().train_loss);
}

TEST_CASE("identical seeds give identical checkpoints") {
  const auto f = fixture();
  TrainConfig cfg;
  cfg.patience = 5;
  cfg.max_epochs = 30;
  cfg.seed = 8;
  cfg.record_wall_time = false;
  auto run = [&](std::uint64_t seed) {
    cfg.seed = seed;
    const auto r = train(autonet::init_model(model_for(Task::scan_age), seed), f.train, f.val, cfg);
    autonet::Checkpoint ck;
    ck.model = r.model;
    ck.task = "scan_age";
    return std::make_pair(autonet::encode_checkpoint(ck), train_log_csv(r.log));
  };
  const auto a = run(8), b = run(8), c = run(9);
  CHECK(a == b);
  CHECK(a.first != c.first);
}

TEST_CASE("divergence raises a numeric error with its epoch") {
  const auto f = fixture();
  TrainConfig cfg;
  cfg.learning_rate = 1e200;
  cfg.max_epochs = 50;
  try {
    train(autonet::init_model(model_for(Task::scan_age), 1), f.train, f.val, cfg);
    FAIL("expected NumericError");
  } catch (const NumericError& e) {
    CHECK(e.epoch() >= 1);
  }
}

TEST_CASE("training rejects empty or non-finite data") {
  auto f = fixture();
  TrainConfig cfg;
  cfg.max_epochs = 1;
  TaskData empty = gather(f.val, std::vector<std::size_t>{});
  CHECK_THROWS_AS(train(autonet::init_model(model_for(Task::scan_age), 1), f.train, empty, cfg),
                  std::invalid_argument);
  f.val.targets(0, 0) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(train(autonet::init_model(model_for(Task::scan_age), 1), f.train, f.val, cfg),
                  std::invalid_argument);
}

TEST_CASE("train config validation") {
  TrainConfig cfg;
  cfg.batch_size = 0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = {};
  cfg.learning_rate = -1;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = {};
  cfg.target_weights = {1.0, 2.0};
  CHECK(cfg.weights_for(2) == std::vector<double>{1.0, 2.0});
  CHECK_THROWS_AS(cfg.weights_for(3), std::invalid_argument);
  CHECK(TrainConfig{}.weights_for(3) == std::vector<double>{1.0, 1.0, 1.0});
}

TEST_CASE("train log formats") {
  TrainLog log;
  log.epochs = {{1, 0.5, 0.25, 0.0}, {2, 0.125, 0.375, 0.0}};
  log.best_epoch = 1;
  log.best_val_loss = 0.25;
  log.stopped_epoch = 2;
  log.seed = 4;
  CHECK(train_log_csv(log) == "epoch,train_loss,val_loss,wall_ms\n1,0.5,0.25,0\n2,0.125,0.375,0\n");
  const auto j = nlohmann::json::parse(train_summary_json(log));
  CHECK(j["best_epoch"] == 1);
  CHECK(j["best_val_loss"] == 0.25);
  CHECK(j["stopped_epoch"] == 2);
  CHECK(j["seed"] == 4);
}
