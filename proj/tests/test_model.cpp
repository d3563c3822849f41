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
#include <map>

#include "doctest.h"
#include "lightvad/errors.hpp"
#include "lightvad/model.hpp"
#include "test_support.hpp"

using namespace lightvad;
using testing::random_tensor;
using testing::TempDir;

namespace {

ModelConfig small_config(std::size_t dims, MtaMode mode = MtaMode::Residual) {
  ModelConfig cfg;
  cfg.hfc.input_dim = dims;
  cfg.mta.mode = mode;
  return cfg;
}

// Loop-by-loop head evaluation straight from the layer definition, reading
// only the raw weight arrays.
std::vector<double> scalar_head(const Model& m, const Tensor& y) {
  const auto dims = m.config().hfc.dims();
  const double slope = m.config().hfc.slope;
  std::vector<double> out;
  for (std::size_t t = 0; t < y.dim(0); ++t) {
    std::vector<double> h(y.row(t).begin(), y.row(t).end());
    for (std::size_t layer = 0; layer + 1 < dims.size(); ++layer) {
      const auto& w = m.params().get("hfc.fc" + std::to_string(layer + 1) + ".weight").value;
      const auto& b = m.params().get("hfc.fc" + std::to_string(layer + 1) + ".bias").value;
      std::vector<double> next(dims[layer + 1]);
      for (std::size_t o = 0; o < next.size(); ++o) {
        double acc = b[o];
        for (std::size_t i = 0; i < h.size(); ++i) acc += h[i] * w[i * next.size() + o];
        if (layer + 2 < dims.size()) acc = acc >= 0 ? acc : slope * acc;
        next[o] = acc;
      }
      h = std::move(next);
    }
    out.push_back(1.0 / (1.0 + std::exp(-h[0])));
  }
  return out;
}

}  // namespace

TEST_CASE("parameter counts match the closed form") {
  ModelConfig cfg;
  CHECK(count_parameters(cfg) == 139595);
  CHECK(Model(cfg, 1).params().num_scalars() == 139595);
  cfg.hfc.shape = HeadShape::Conventional;
  CHECK(count_parameters(cfg) == 270603);
  CHECK(Model(cfg, 1).params().num_scalars() == 270603);
  const double ratio = 139595.0 / 270603.0;
  CHECK(std::abs(ratio - 0.516) < 0.001);
}

TEST_CASE("registered parameters equal the audit across configurations") {
  for (std::size_t k : {3, 5, 7, 9}) {
    for (bool mta : {true, false}) {
      for (auto shape : {HeadShape::Hourglass, HeadShape::Conventional}) {
        ModelConfig cfg = small_config(37);
        cfg.mta.k_max = k;
        cfg.mta.enabled = mta;
        cfg.hfc.shape = shape;
        CHECK(Model(cfg, 3).params().num_scalars() == count_parameters(cfg));
      }
    }
  }
}

TEST_CASE("kernel sizes descend by two from k_max") {
  MtaConfig m;
  m.k_max = 7;
  CHECK(m.kernel_sizes() == std::vector<std::size_t>{7, 5, 3});
  m.k_max = 4;
  CHECK_THROWS_AS(m.validate(), ConfigError);
  m.k_max = 1;
  CHECK_THROWS_AS(m.validate(), ConfigError);
}

TEST_CASE("zero attention is the identity in residual mode and zero in pure mode") {
  const Tensor x = random_tensor({8, 6}, 1);
  Model residual(small_config(6), 2);
  Model pure(small_config(6, MtaMode::Pure), 2);
  Graph g;
  CHECK(residual.forward(g, x).features.value() == x);
  for (double v : pure.forward(g, x).features.value().data()) CHECK(v == 0.0);
}

TEST_CASE("pure-mode attention on a hand example") {
  ModelConfig cfg = small_config(1, MtaMode::Pure);
  cfg.mta.k_max = 3;
  Model m(cfg, 0);
  m.params().get("mta.conv3.weight").value = Tensor::vector({0, 1, 0});
  Graph g;
  const auto y = m.forward(g, Tensor::matrix({{1}, {2}, {3}, {4}})).features.value();
  const std::vector<double> want = {0.1, 0.4, 0.9, 1.6};
  for (std::size_t i = 0; i < 4; ++i) CHECK(y[i] == doctest::Approx(want[i]).epsilon(1e-14));
}

TEST_CASE("attention rejects bags shorter than the largest kernel") {
  Model m(small_config(3), 0);
  Graph g;
  CHECK_THROWS_AS(m.forward(g, random_tensor({4, 3}, 1)), ConfigError);
}

TEST_CASE("zero head weights score every instance at one half") {
  Model m(small_config(5), 4);
  for (auto& p : m.params()) p.value.fill(0.0);
  for (double s : m.score(random_tensor({6, 5}, 2))) CHECK(s == 0.5);
}

TEST_CASE("head matches a scalar loop implementation") {
  for (auto shape : {HeadShape::Hourglass, HeadShape::Conventional}) {
    ModelConfig cfg = small_config(24);
    cfg.mta.enabled = false;
    cfg.hfc.shape = shape;
    Model m(cfg, 11);
    const Tensor x = random_tensor({10, 24}, 12);
    const auto got = m.score(x);
    const auto want = scalar_head(m, x);
    for (std::size_t i = 0; i < got.size(); ++i) CHECK(std::abs(got[i] - want[i]) < 1e-10);
  }
}

TEST_CASE("head is permutation equivariant and identical rows score identically") {
  Model m(small_config(9), 5);
  Tensor x = random_tensor({7, 9}, 6);
  for (std::size_t d = 0; d < 9; ++d) x.at(3, d) = x.at(1, d);
  const std::vector<std::size_t> perm = {4, 2, 6, 0, 1, 5, 3};
  Tensor px({7, 9});
  for (std::size_t r = 0; r < 7; ++r) {
    for (std::size_t d = 0; d < 9; ++d) px.at(r, d) = x.at(perm[r], d);
  }
  Rng rng(0);
  Graph g;
  const auto s = m.hfc_forward(g, g.constant(x), false, rng).value();
  const auto ps = m.hfc_forward(g, g.constant(px), false, rng).value();
  for (std::size_t r = 0; r < 7; ++r) CHECK(ps[r] == s[perm[r]]);
  CHECK(s[1] == s[3]);
}

TEST_CASE("scores stay strictly inside (0, 1) for moderate inputs") {
  Model m(small_config(12), 7);
  for (double s : m.score(random_tensor({32, 12}, 8, -3, 3))) {
    CHECK(s > 0.0);
    CHECK(s < 1.0);
  }
}

TEST_CASE("head rejects the wrong feature dimension") {
  Model m(small_config(12), 7);
  CHECK_THROWS_AS(m.score(random_tensor({8, 13}, 1)), DimensionError);
}

TEST_CASE("mean score gradients pass grad_check in both modes") {
  for (auto mode : {MtaMode::Residual, MtaMode::Pure}) {
    Model m(small_config(16, mode), 9);
    Rng init(3);
    for (auto& p : m.params()) {
      if (p.name.starts_with("mta.")) {
        for (auto& v : p.value.data()) v = std::uniform_real_distribution<double>(-0.5, 0.5)(init);
      }
    }
    const Tensor x = random_tensor({8, 16}, 10);
    auto report = grad_check(m.params(), [&](Graph& g, ParameterStore&) {
      Rng rng(0);
      return ops::mean(m.forward(g, x, false, rng).scores);
    });
    CAPTURE(to_string(mode));
    CHECK(report.max_rel_error < 1e-4);
  }
}

TEST_CASE("same seed gives the same initial weights") {
  Model a(small_config(10), 42), b(small_config(10), 42), c(small_config(10), 43);
  auto flat = [](const Model& m) {
    std::vector<double> v;
    for (const auto& p : m.params()) v.insert(v.end(), p.value.values().begin(), p.value.values().end());
    return v;
  };
  CHECK(flat(a) == flat(b));
  CHECK(flat(a) != flat(c));
  // Uniform(+-1/sqrt(fan_in)) with fan_in 10, 64, 128 for the three layers.
  const std::map<std::string, double> fan_in = {{"hfc.fc1", 10}, {"hfc.fc2", 64}, {"hfc.fc3", 128}};
  for (const auto& p : a.params()) {
    if (!p.name.starts_with("hfc.")) continue;
    const double bound = 1.0 / std::sqrt(fan_in.at(p.name.substr(0, 7)));
    for (double v : p.value.data()) CHECK(std::abs(v) <= bound);
  }
}

TEST_CASE("checkpoint round trip preserves weights and progress") {
  TempDir dir("ckpt");
  Model m(small_config(10, MtaMode::Pure), 5);
  TrainProgress progress;
  progress.step = 17;
  progress.epoch = 3;
  progress.best_auc = 0.875;
  progress.rng_state = "1 2 3";
  for (const auto& p : m.params()) {
    progress.first_moment.push_back(Tensor(p.value.shape(), 0.25));
    progress.second_moment.push_back(Tensor(p.value.shape(), 0.5));
  }
  save_checkpoint(dir / "m.lwck", m, progress);
  auto ck = load_checkpoint(dir / "m.lwck");
  CHECK(ck.model.config() == m.config());
  auto it = ck.model.params().begin();
  for (const auto& p : m.params()) {
    CHECK(it->name == p.name);
    CHECK(it->value == p.value);
    ++it;
  }
  CHECK(ck.progress.step == 17);
  CHECK(ck.progress.epoch == 3);
  CHECK(ck.progress.best_auc == 0.875);
  CHECK(ck.progress.rng_state == "1 2 3");
  CHECK(ck.progress.first_moment == progress.first_moment);
  CHECK(ck.progress.second_moment == progress.second_moment);
}

TEST_CASE("checkpoint load rejects config mismatches and corruption") {
  TempDir dir("ckpt_bad");
  Model m(small_config(10), 5);
  save_checkpoint(dir / "m.lwck", m);
  ModelConfig other = m.config();
  other.hfc.shape = HeadShape::Conventional;
  try {
    load_checkpoint(dir / "m.lwck", &other);
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("hfc.shape") != std::string::npos);
  }
  const ModelConfig same = m.config();
  CHECK_NOTHROW(load_checkpoint(dir / "m.lwck", &same));

  {
    std::ofstream out(dir / "junk.lwck", std::ios::binary);
    out << "LWCX-not-a-checkpoint";
  }
  CHECK_THROWS_AS(load_checkpoint(dir / "junk.lwck"), FormatError);
  std::filesystem::resize_file(dir / "m.lwck", std::filesystem::file_size(dir / "m.lwck") / 2);
  CHECK_THROWS_AS(load_checkpoint(dir / "m.lwck"), FormatError);
}

TEST_CASE("model config key-value round trip") {
  ModelConfig cfg = small_config(33, MtaMode::Pure);
  cfg.mta.k_max = 7;
  cfg.hfc.dropout = 0.25;
  CHECK(ModelConfig::from_kv(cfg.to_kv()) == cfg);
}
