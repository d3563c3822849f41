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
#include <functional>

#include "doctest.h"
#include "lightvad/errors.hpp"
#include "lightvad/graph.hpp"
#include "test_support.hpp"

using namespace lightvad;
using testing::numeric_gradient;
using testing::random_tensor;
using testing::rel_error;

namespace {

std::vector<double> eval(const std::function<Var(Graph&)>& f) {
  Graph g;
  return f(g).value().values();
}

void check_close(const std::vector<double>& got, const std::vector<double>& want, double tol = 1e-12) {
  REQUIRE(got.size() == want.size());
  for (std::size_t i = 0; i < got.size(); ++i) CHECK(got[i] == doctest::Approx(want[i]).epsilon(tol));
}

}  // namespace

TEST_CASE("tensor shape bookkeeping") {
  Tensor t({2, 3}, 1.5);
  CHECK(t.rank() == 2);
  CHECK(t.size() == 6);
  CHECK(t.at(1, 2) == 1.5);
  CHECK_THROWS_AS(Tensor({0, 3}), DimensionError);
  CHECK_THROWS_AS(Tensor({2, 2}, std::vector<double>{1, 2, 3}), DimensionError);
  Tensor m = Tensor::matrix({{1, 2}, {3, 4}});
  CHECK(m.row(1)[0] == 3);
}

TEST_CASE("parameter store rejects duplicate names and zeroes grads") {
  ParameterStore store;
  auto& p = store.add("w", Tensor({3}, 1.0));
  CHECK_THROWS_AS(store.add("w", Tensor({1})), ConfigError);
  CHECK(p.grad.shape() == p.value.shape());
  p.grad.fill(4.0);
  store.zero_grads();
  for (double v : p.grad.data()) CHECK(v == 0.0);
  CHECK(store.num_scalars() == 3);
}

TEST_CASE("linear examples") {
  auto run = [](Tensor x, Tensor w, Tensor b) {
    return eval([&](Graph& g) { return ops::linear(g.constant(x), g.constant(w), g.constant(b)); });
  };
  check_close(run(Tensor::matrix({{1, 2}}), Tensor::matrix({{1, 0}, {0, 1}}), Tensor::vector({0, 0})), {1, 2});
  check_close(run(Tensor::matrix({{1, 2}}), Tensor::matrix({{1, 0}, {0, 1}}), Tensor::vector({3, 4})), {4, 6});
  check_close(run(Tensor::matrix({{2, 3}}), Tensor::matrix({{1, 1}, {1, -1}}), Tensor::vector({0, 0})), {5, -1});
}

TEST_CASE("linear shape mismatch names both shapes") {
  Graph g;
  auto x = g.constant(Tensor({1, 3}));
  auto w = g.constant(Tensor({2, 2}));
  auto b = g.constant(Tensor({2}));
  try {
    ops::linear(x, w, b);
    FAIL("expected DimensionError");
  } catch (const DimensionError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("linear") != std::string::npos);
    CHECK(msg.find("[1x3]") != std::string::npos);
    CHECK(msg.find("[2x2]") != std::string::npos);
  }
}

TEST_CASE("linear is linear in x when the bias is zero") {
  const Tensor w = random_tensor({5, 4}, 1);
  const Tensor b({4}, 0.0);
  const Tensor x = random_tensor({3, 5}, 2);
  const Tensor y = random_tensor({3, 5}, 3);
  const double alpha = 0.7, beta = -1.3;
  Tensor mix({3, 5});
  for (std::size_t i = 0; i < mix.size(); ++i) mix[i] = alpha * x[i] + beta * y[i];
  auto lin = [&](const Tensor& in) {
    return eval([&](Graph& g) { return ops::linear(g.constant(in), g.constant(w), g.constant(b)); });
  };
  const auto lx = lin(x), ly = lin(y), lm = lin(mix);
  for (std::size_t i = 0; i < lm.size(); ++i) CHECK(std::abs(lm[i] - (alpha * lx[i] + beta * ly[i])) < 1e-12);
}

TEST_CASE("conv1d_same examples") {
  auto conv = [](std::vector<double> x, std::vector<double> w, double b) {
    return eval([&](Graph& g) {
      return ops::conv1d_same(g.constant(Tensor::vector(x)), g.constant(Tensor::vector(w)),
                              g.constant(Tensor::scalar(b)));
    });
  };
  check_close(conv({1, 2, 3, 4}, {0, 1, 0}, 0), {1, 2, 3, 4});
  check_close(conv({1, 2, 3, 4}, {1, 0, -1}, 0), {-2, -2, -2, 3});
  check_close(conv({5, 5, 5}, {0, 0, 0}, 2), {2, 2, 2});
}

TEST_CASE("conv1d_same rejects even or oversized kernels") {
  Graph g;
  auto x = g.constant(Tensor::vector({1, 2, 3, 4}));
  auto b = g.constant(Tensor::scalar(0));
  CHECK_THROWS_AS(ops::conv1d_same(x, g.constant(Tensor::vector({1, 1})), b), ConfigError);
  CHECK_THROWS_AS(ops::conv1d_same(x, g.constant(Tensor({5}, 1.0)), b), ConfigError);
}

TEST_CASE("conv1d_same with a centred unit kernel is the identity") {
  for (std::size_t k = 3; k <= 9; k += 2) {
    for (std::size_t t = k; t <= 12; ++t) {
      Tensor w({k}, 0.0);
      w[k / 2] = 1.0;
      const Tensor x = random_tensor({t}, 10 * k + t);
      const auto y = eval([&](Graph& g) {
        return ops::conv1d_same(g.constant(x), g.constant(w), g.constant(Tensor::scalar(0)));
      });
      CHECK(y == x.values());
    }
  }
}

TEST_CASE("global_avg_pool examples") {
  auto pool = [](Tensor x) { return eval([&](Graph& g) { return ops::global_avg_pool(g.constant(x)); }); };
  check_close(pool(Tensor::matrix({{1, 3}, {2, 2}, {0, 0}})), {2, 2, 0});
  check_close(pool(Tensor::matrix({{4.25, 4.25, 4.25}})), {4.25});
  check_close(pool(Tensor::matrix({{1, 2, 3, 6}})), {3});
}

TEST_CASE("leaky_relu examples") {
  const auto y = eval([](Graph& g) { return ops::leaky_relu(g.constant(Tensor::vector({3, -2, 0})), 0.5); });
  check_close(y, {3, -1, 0});
}

TEST_CASE("sigmoid examples and saturation") {
  const auto y =
      eval([](Graph& g) { return ops::sigmoid(g.constant(Tensor::vector({0, 800, std::log(3.0), -800}))); });
  CHECK(y[0] == 0.5);
  CHECK(y[1] == 1.0);
  CHECK(y[2] == doctest::Approx(0.75).epsilon(1e-15));
  CHECK(y[3] >= 0.0);
  CHECK(std::isfinite(y[3]));
}

TEST_CASE("dropout identity cases and keep fraction") {
  Rng rng(5);
  const Tensor x = random_tensor({4, 4}, 9);
  Graph g;
  CHECK(ops::dropout(g.constant(x), 0.5, false, rng).value() == x);
  CHECK(ops::dropout(g.constant(x), 0.0, true, rng).value() == x);
  CHECK_THROWS_AS(ops::dropout(g.constant(x), 1.0, true, rng), ConfigError);

  const std::size_t n = 1000000;
  Graph big;
  Rng r1(42);
  const Tensor ones({n}, 1.0);
  const auto& y = ops::dropout(big.constant(ones), 0.5, true, r1).value();
  std::size_t kept = 0;
  for (double v : y.data()) {
    if (v != 0.0) {
      CHECK(v == 2.0);
      ++kept;
    }
  }
  const double frac = static_cast<double>(kept) / static_cast<double>(n);
  CHECK(frac > 0.49);
  CHECK(frac < 0.51);

  Graph again;
  Rng r2(42);
  CHECK(ops::dropout(again.constant(ones), 0.5, true, r2).value() == y);
}

TEST_CASE("backward of sum(x W) has outer-product structure") {
  ParameterStore store;
  auto& w = store.add("w", random_tensor({3, 2}, 4));
  auto& b = store.add("b", Tensor({2}, 0.0));
  const Tensor x = Tensor::matrix({{1, 2, 3}, {-1, 0.5, 2}});
  Graph g;
  g.backward(ops::sum(ops::linear(g.constant(x), g.parameter(w), g.parameter(b))));
  // d/dW[i][o] sum_n,o (x W)[n,o] = sum_n x[n,i]
  for (std::size_t i = 0; i < 3; ++i) {
    const double col = x.at(0, i) + x.at(1, i);
    for (std::size_t o = 0; o < 2; ++o) CHECK(w.grad.at(i, o) == doctest::Approx(col));
  }
  CHECK(b.grad[0] == 2.0);
  CHECK(b.grad[1] == 2.0);
}

TEST_CASE("unused parameters get zero gradients and backward accumulates") {
  ParameterStore store;
  auto& used = store.add("used", Tensor::vector({1, 2}));
  auto& dead = store.add("dead", Tensor::vector({3}));
  auto run = [&] {
    Graph g;
    g.parameter(dead);
    g.backward(ops::sum(ops::square(g.parameter(used))));
  };
  run();
  CHECK(used.grad[0] == 2.0);
  CHECK(dead.grad[0] == 0.0);
  run();
  CHECK(used.grad[1] == 8.0);
}

TEST_CASE("every op matches central differences on random inputs") {
  // Each builder maps the parameter store to a scalar loss exercising one op.
  struct Case {
    const char* name;
    std::function<Var(Graph&, ParameterStore&)> build;
  };
  const std::vector<Case> cases = {
      {"linear",
       [](Graph& g, ParameterStore& s) {
         return ops::sum(ops::square(ops::linear(g.parameter(s.get("x")), g.parameter(s.get("w")),
                                                 g.parameter(s.get("b")))));
       }},
      {"conv1d_same",
       [](Graph& g, ParameterStore& s) {
         return ops::sum(ops::square(ops::conv1d_same(g.parameter(s.get("v")), g.parameter(s.get("k")),
                                                      g.parameter(s.get("c")))));
       }},
      {"global_avg_pool",
       [](Graph& g, ParameterStore& s) {
         return ops::sum(ops::square(ops::global_avg_pool(g.parameter(s.get("x")))));
       }},
      {"leaky_relu",
       [](Graph& g, ParameterStore& s) { return ops::sum(ops::square(ops::leaky_relu(g.parameter(s.get("v")), 0.5))); }},
      {"sigmoid", [](Graph& g, ParameterStore& s) { return ops::sum(ops::sigmoid(g.parameter(s.get("v")))); }},
      {"mul",
       [](Graph& g, ParameterStore& s) {
         return ops::sum(ops::mul(g.parameter(s.get("v")), g.parameter(s.get("u"))));
       }},
      {"sub_scale_add_scalar",
       [](Graph& g, ParameterStore& s) {
         auto d = ops::sub(g.parameter(s.get("v")), ops::scale(g.parameter(s.get("u")), 1.7));
         return ops::sum(ops::square(ops::add_scalar(d, 0.3)));
       }},
      {"log",
       [](Graph& g, ParameterStore& s) {
         return ops::sum(ops::log(ops::add_scalar(ops::sigmoid(g.parameter(s.get("v"))), 0.1)));
       }},
      {"row_scale",
       [](Graph& g, ParameterStore& s) {
         return ops::sum(ops::square(ops::row_scale(g.parameter(s.get("x")), g.parameter(s.get("r")))));
       }},
      {"reshape_gather",
       [](Graph& g, ParameterStore& s) {
         const std::vector<std::size_t> idx = {4, 0, 2, 2};
         auto flat = ops::reshape(g.parameter(s.get("x")), {s.get("x").value.size()});
         return ops::sum(ops::square(ops::gather(flat, idx)));
       }},
      {"mean_max",
       [](Graph& g, ParameterStore& s) {
         return ops::add(ops::mean(ops::square(g.parameter(s.get("v")))), ops::max(g.parameter(s.get("v"))));
       }},
      {"adjacent_diff",
       [](Graph& g, ParameterStore& s) {
         return ops::sum(ops::square(ops::adjacent_diff(g.parameter(s.get("v")))));
       }},
  };

  for (const auto& c : cases) {
    CAPTURE(c.name);
    ParameterStore store;
    store.add("x", random_tensor({4, 3}, 11));
    store.add("w", random_tensor({3, 2}, 12));
    store.add("b", random_tensor({2}, 13));
    store.add("v", random_tensor({7}, 14));
    store.add("u", random_tensor({7}, 15));
    store.add("k", random_tensor({5}, 16));
    store.add("c", random_tensor({1}, 17));
    store.add("r", random_tensor({4}, 18));

    store.zero_grads();
    {
      Graph g;
      g.backward(c.build(g, store));
    }
    auto loss = [&] {
      Graph g;
      return c.build(g, store).value()[0];
    };
    for (auto& p : store) {
      const auto numeric = numeric_gradient(p, loss);
      for (std::size_t i = 0; i < numeric.size(); ++i) {
        CAPTURE(p.name);
        CAPTURE(i);
        CHECK(rel_error(p.grad[i], numeric[i]) < 1e-4);
      }
    }
  }
}

TEST_CASE("max picks the lowest index on ties") {
  ParameterStore store;
  auto& v = store.add("v", Tensor::vector({1, 3, 3, 2}));
  Graph g;
  auto m = ops::max(g.parameter(v));
  CHECK(m.value()[0] == 3);
  g.backward(m);
  CHECK(v.grad[1] == 1.0);
  CHECK(v.grad[2] == 0.0);
}

TEST_CASE("grad_check on a linear graph is tight") {
  ParameterStore store;
  store.add("w", random_tensor({4, 3}, 21));
  store.add("b", random_tensor({3}, 22));
  store.add("dead", random_tensor({2}, 23));
  const Tensor x = random_tensor({5, 4}, 24);
  auto report = grad_check(store, [&](Graph& g, ParameterStore& s) {
    return ops::sum(ops::linear(g.constant(x), g.parameter(s.get("w")), g.parameter(s.get("b"))));
  });
  CHECK(report.passed);
  CHECK(report.max_rel_error < 1e-6);
  CHECK(report.entries_checked == 12 + 3 + 2);
}

TEST_CASE("grad_check compares against the matching side of a kink") {
  // relu(p) at p = 0 is not differentiable; the tape uses the x >= 0 branch.
  ParameterStore store;
  store.add("p", Tensor::vector({0.0, 0.4e-5}));
  auto report = grad_check(store, [](Graph& g, ParameterStore& s) {
    return ops::sum(ops::leaky_relu(g.parameter(s.get("p")), 0.5));
  });
  CHECK(report.kinks == 2);
  CHECK(report.passed);
}

TEST_CASE("grad_check reports the parameter behind a non-finite loss") {
  ParameterStore store;
  store.add("p", Tensor::vector({1e-6}));
  try {
    grad_check(
        store, [](Graph& g, ParameterStore& s) { return ops::log(g.parameter(s.get("p"))); }, 1e-5);
    FAIL("expected NumericError");
  } catch (const NumericError& e) {
    CHECK(std::string(e.what()).find("p") != std::string::npos);
  }
}

TEST_CASE("forward and backward are bit-identical across runs") {
  auto run = [] {
    ParameterStore store;
    auto& w = store.add("w", random_tensor({6, 4}, 31));
    auto& b = store.add("b", random_tensor({4}, 32));
    Rng rng(77);
    Graph g;
    auto h = ops::dropout(ops::leaky_relu(ops::linear(g.constant(random_tensor({5, 6}, 33)), g.parameter(w),
                                                      g.parameter(b)),
                                          0.5),
                          0.5, true, rng);
    auto loss = ops::sum(ops::sigmoid(h));
    g.backward(loss);
    std::vector<double> out = {loss.value()[0]};
    out.insert(out.end(), w.grad.values().begin(), w.grad.values().end());
    return out;
  };
  CHECK(run() == run());
}
