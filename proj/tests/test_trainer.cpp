/*
 * Copyright 2026 The lightvad Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *    http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include <cmath>
#include <fstream>
#include <iterator>

#include "doctest.h"
#include "lightvad/config.hpp"
#include "lightvad/errors.hpp"
#include "lightvad/trainer.hpp"
#include "test_support.hpp"

using namespace lightvad;
using testing::TempDir;

namespace {

ParameterStore scalar_store(double value) {
  ParameterStore store;
  store.add("theta", Tensor::vector({value}));
  return store;
}

TrainConfig plain_adam(double lr) {
  TrainConfig cfg;
  cfg.lr = lr;
  cfg.weight_decay = 0.0;
  return cfg;
}

struct SmallSet {
  std::vector<Video> train, test;
};

SmallSet small_set(std::uint64_t seed) {
  SyntheticSpec spec;
  spec.n_normal = spec.n_abnormal = 8;
  spec.n_test_normal = spec.n_test_abnormal = 4;
  spec.clips = 12;
  spec.dims = 8;
  spec.span_min = 2;
  spec.span_max = 5;
  spec.frames_min = 24;
  spec.frames_max = 48;
  spec.seed = seed;
  SmallSet s;
  for (auto& v : generate_synthetic(spec)) (v.split == "train" ? s.train : s.test).push_back(std::move(v.video));
  return s;
}

ExperimentConfig small_experiment() {
  ExperimentConfig cfg;
  cfg.model.hfc.dropout = 0.0;
  cfg.train.batch_pairs = 4;
  cfg.train.epochs = 3;
  cfg.train.seed = 11;
  return cfg;
}

std::vector<double> flat(const ParameterStore& params) {
  std::vector<double> v;
  for (const auto& p : params) v.insert(v.end(), p.value.values().begin(), p.value.values().end());
  return v;
}

std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::vector<const Video*> pick(const std::vector<Video>& videos, int label) {
  std::vector<const Video*> out;
  for (const auto& v : videos) {
    if (v.bag.label == label) out.push_back(&v);
  }
  return out;
}

}  // namespace

TEST_CASE("adam leaves parameters alone when gradients are zero") {
  auto store = scalar_store(0.75);
  auto state = TrainState::fresh(store, 1);
  for (int i = 0; i < 5; ++i) {
    store.zero_grads();
    adam_step(store, state, plain_adam(0.1));
  }
  CHECK(store.get("theta").value[0] == 0.75);
  CHECK(state.step == 5);
}

TEST_CASE("first adam step moves by the learning rate") {
  auto store = scalar_store(0.0);
  auto state = TrainState::fresh(store, 1);
  store.get("theta").grad[0] = 1.0;
  adam_step(store, state, plain_adam(0.01));
  // m_hat = 1, v_hat = 1, so the step is lr / (1 + eps).
  CHECK(store.get("theta").value[0] == doctest::Approx(-0.01 / (1.0 + 1e-8)).epsilon(1e-12));
}

TEST_CASE("adam matches a scalar simulation and descends the quadratic bowl") {
  auto store = scalar_store(1.0);
  auto state = TrainState::fresh(store, 1);
  const TrainConfig cfg = plain_adam(0.01);
  double theta = 1.0, m = 0.0, v = 0.0;
  bool reached = false;
  for (int t = 1; t <= 500; ++t) {
    auto& p = store.get("theta");
    p.grad[0] = 2.0 * p.value[0];
    adam_step(store, state, cfg);
    const double g = 2.0 * theta;
    m = 0.9 * m + 0.1 * g;
    v = 0.999 * v + 0.001 * g * g;
    theta -= 0.01 * (m / (1.0 - std::pow(0.9, t))) / (std::sqrt(v / (1.0 - std::pow(0.999, t))) + 1e-8);
    CHECK(std::abs(p.value[0] - theta) < 1e-12);
    reached = reached || std::abs(p.value[0]) < 1e-3;
  }
  CHECK(reached);
}

TEST_CASE("weight decay enters as an L2 gradient term") {
  auto a = scalar_store(2.0), b = scalar_store(2.0);
  auto sa = TrainState::fresh(a, 1), sb = TrainState::fresh(b, 1);
  TrainConfig decayed = plain_adam(0.05);
  decayed.weight_decay = 0.5;
  for (int i = 0; i < 3; ++i) {
    a.get("theta").grad[0] = 0.3;
    adam_step(a, sa, decayed);
    b.get("theta").grad[0] = 0.3 + 0.5 * b.get("theta").value[0];
    adam_step(b, sb, plain_adam(0.05));
  }
  CHECK(a.get("theta").value[0] == b.get("theta").value[0]);
}

TEST_CASE("adam names the parameter with a non-finite gradient") {
  auto store = scalar_store(1.0);
  auto state = TrainState::fresh(store, 1);
  store.get("theta").grad[0] = std::nan("");
  try {
    adam_step(store, state, plain_adam(0.1));
    FAIL("expected NumericError");
  } catch (const NumericError& e) {
    CHECK(std::string(e.what()).find("theta") != std::string::npos);
  }
}

TEST_CASE("train config validation") {
  TrainConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  cfg.batch_pairs = 0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = TrainConfig{};
  cfg.lr = -1.0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("train_epoch is deterministic and lr zero changes nothing") {
  const auto data = small_set(3);
  const auto abnormal = pick(data.train, 1), normal = pick(data.train, 0);
  ExperimentConfig cfg = small_experiment();
  cfg.model.hfc.input_dim = 8;

  auto run = [&](double lr) {
    ExperimentConfig c = cfg;
    c.train.lr = lr;
    Model model(c.model, c.train.seed);
    auto state = TrainState::fresh(model.params(), c.train.seed);
    std::vector<double> totals;
    for (int e = 0; e < 3; ++e) totals.push_back(train_epoch(abnormal, normal, model, state, c).loss.total);
    return std::make_pair(totals, flat(model.params()));
  };
  const auto a = run(1e-3), b = run(1e-3);
  CHECK(a.first == b.first);
  CHECK(a.second == b.second);

  cfg.train.weight_decay = 0.0;
  const auto frozen = run(0.0);
  CHECK(frozen.second == flat(Model(cfg.model, cfg.train.seed).params()));
}

TEST_CASE("train_epoch rejects batches larger than the dataset") {
  const auto data = small_set(3);
  ExperimentConfig cfg = small_experiment();
  cfg.model.hfc.input_dim = 8;
  cfg.train.batch_pairs = 9;
  Model model(cfg.model, 1);
  auto state = TrainState::fresh(model.params(), 1);
  CHECK_THROWS_AS(train_epoch(pick(data.train, 1), pick(data.train, 0), model, state, cfg), ConfigError);
}

TEST_CASE("fit with zero epochs saves the initialization") {
  TempDir dir("fit0");
  const auto data = small_set(4);
  ExperimentConfig cfg = small_experiment();
  cfg.train.epochs = 0;
  const auto result = fit(data.train, data.test, cfg, {dir.path(), std::nullopt});
  auto ck = load_checkpoint(result.checkpoint);
  cfg.model.hfc.input_dim = 8;
  CHECK(flat(ck.model.params()) == flat(Model(cfg.model, cfg.train.seed).params()));
  CHECK(ck.progress.step == 0);
  CHECK(result.final_auc.has_value());
}

TEST_CASE("fit logs every epoch and its final auc matches a fresh evaluation") {
  TempDir dir("fit_log");
  const auto data = small_set(5);
  const auto result = fit(data.train, data.test, small_experiment(), {dir.path(), std::nullopt});
  const auto log = read_log(result.log_file);
  REQUIRE(log.size() == 3);
  for (std::size_t i = 0; i < log.size(); ++i) {
    CHECK(log[i].epoch == i + 1);
    CHECK(std::isfinite(log[i].loss.total));
    CHECK(log[i].omega >= 0.0);
    CHECK(log[i].omega <= 1.0);
  }
  const auto ck = load_checkpoint(result.checkpoint);
  CHECK(ck.progress.step == 3 * 2);
  CHECK(pooled_auc(score_videos(ck.model, data.test)) == *log.back().auc);
  CHECK(std::filesystem::exists(result.best_checkpoint));
}

TEST_CASE("resuming reproduces an uninterrupted run") {
  TempDir whole("resume_whole"), split("resume_split");
  const auto data = small_set(6);
  ExperimentConfig cfg = small_experiment();
  cfg.train.epochs = 4;
  fit(data.train, data.test, cfg, {whole.path(), std::nullopt});

  cfg.train.epochs = 2;
  fit(data.train, data.test, cfg, {split.path(), std::nullopt});
  const auto resumed = fit(data.train, data.test, cfg, {split.path(), split / "model.lwck"});
  CHECK(resumed.state.step == 4 * 2);
  CHECK(resumed.state.epoch == 4);
  CHECK(slurp(whole / "model.lwck") == slurp(split / "model.lwck"));
  CHECK(slurp(whole / "train_log.csv") == slurp(split / "train_log.csv"));
}

TEST_CASE("total loss falls between epoch 1 and epoch 10 on the default synthetic set") {
  std::vector<Video> train, test;
  for (auto& v : generate_synthetic(SyntheticSpec{})) (v.split == "train" ? train : test).push_back(std::move(v.video));
  TempDir dir("fit10");
  ExperimentConfig cfg;
  cfg.train.epochs = 10;
  cfg.train.eval_every = 10;
  const auto result = fit(train, test, cfg, {dir.path(), std::nullopt});
  CHECK(result.log.back().loss.total < result.log.front().loss.total);
}

TEST_CASE("config rejects unknown keys and malformed values") {
  RunConfig cfg;
  CHECK_THROWS_AS(cfg.set("train.learning_rate", "0.1"), ConfigError);
  CHECK_THROWS_AS(cfg.set("train.lr", "fast"), ConfigError);
  CHECK_THROWS_AS(cfg.set("train.batch_pairs", "-3"), ConfigError);
  CHECK_THROWS_AS(cfg.apply_assignment("no equals sign"), ConfigError);
}

TEST_CASE("seed drives both data generation and training") {
  RunConfig cfg;
  cfg.set("seed", "123");
  CHECK(cfg.experiment.train.seed == 123);
  CHECK(cfg.synth.seed == 123);
  CHECK(cfg.get("seed") == "123");
}

TEST_CASE("config files accept comments and report the offending line") {
  TempDir dir("cfg");
  {
    std::ofstream out(dir / "run.txt");
    out << "# comment\n\ntrain.lr = 0.005   # trailing\nmta.mode=pure\n";
  }
  RunConfig cfg;
  cfg.apply_file(dir / "run.txt");
  CHECK(cfg.experiment.train.lr == 0.005);
  CHECK(cfg.experiment.model.mta.mode == MtaMode::Pure);
  {
    std::ofstream out(dir / "bad.txt");
    out << "train.lr = 0.1\nbogus = 1\n";
  }
  try {
    cfg.apply_file(dir / "bad.txt");
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find(":2:") != std::string::npos);
  }
  CHECK_THROWS_AS(cfg.apply_file(dir / "missing.txt"), IoError);
}

TEST_CASE("config dump round trips through a file") {
  TempDir dir("cfg_rt");
  RunConfig cfg;
  cfg.set("train.lr", "0.0025");
  cfg.set("hfc.shape", "conventional");
  cfg.set("seed", "99");
  cfg.write(dir / "config.txt");
  RunConfig back;
  back.apply_file(dir / "config.txt");
  CHECK(back.to_kv() == cfg.to_kv());
  for (const auto& key : RunConfig::keys()) CHECK(back.get(key) == cfg.get(key));
}
