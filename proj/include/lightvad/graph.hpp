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

#pragma once

#include <cstddef>
#include <deque>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "lightvad/tensor.hpp"

namespace lightvad {

class Graph;

/// Handle to a node on a Graph tape.
struct Var {
  Graph* graph = nullptr;
  std::size_t id = 0;

  const Tensor& value() const;
  const Tensor& grad() const;
};

/// Reverse-mode tape. Nodes are appended in evaluation order, so a reverse
/// sweep over the tape visits every node after all of its consumers.
///
/// A graph is single-threaded. Parameters bound with `parameter()` receive
/// their gradient on `backward()`; repeated backward calls accumulate.
class Graph {
 public:
  using Backprop = std::function<void(Graph&, std::size_t self)>;

  struct Node {
    Tensor value;
    Tensor grad;
    bool requires_grad = false;
    Parameter* param = nullptr;
    Backprop backprop;
  };

  Var constant(Tensor value);
  /// A leaf that tracks its own gradient without being a Parameter.
  Var variable(Tensor value);
  Var parameter(Parameter& p);

  Var emit(Tensor value, std::initializer_list<Var> inputs, Backprop backprop);

  Node& node(std::size_t id) { return nodes_[id]; }
  const Node& node(std::size_t id) const { return nodes_[id]; }
  std::size_t size() const noexcept { return nodes_.size(); }

  /// Seeds d(loss)/d(loss) = scale and propagates to every reachable node.
  /// Parameter gradients are added to Parameter::grad.
  void backward(Var loss, double scale = 1.0);

 private:
  std::deque<Node> nodes_;  // stable references while ops append
};

using Rng = std::mt19937_64;

namespace ops {

Var linear(Var x, Var weight, Var bias);
Var conv1d_same(Var x, Var kernel, Var bias);
Var global_avg_pool(Var x);
Var leaky_relu(Var x, double slope);
Var sigmoid(Var x);
Var dropout(Var x, double rate, bool training, Rng& rng);

Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double c);
Var add_scalar(Var a, double c);
Var log(Var a);
Var square(Var a);

/// out[t, d] = x[t, d] * s[t]
Var row_scale(Var x, Var s);
Var reshape(Var x, Shape shape);
Var gather(Var x, std::span<const std::size_t> indices);
Var sum(Var x);
Var mean(Var x);
/// Largest entry; the lowest index wins ties.
Var max(Var x);
/// out[i] = x[i + 1] - x[i]
Var adjacent_diff(Var x);

}  // namespace ops

double sigmoid_scalar(double x) noexcept;

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::string worst_parameter;
  std::size_t worst_index = 0;
  std::size_t entries_checked = 0;
  std::size_t kinks = 0;  // entries whose stencil straddled a kink
  bool passed = false;
};

/// Builds a scalar loss over the given store. Must be deterministic.
using GraphBuilder = std::function<Var(Graph&, ParameterStore&)>;

/// Compares analytic gradients against central differences for every
/// parameter entry. Relative error is |a - n| / max(|a|, |n|, floor); the
/// floor keeps sub-roundoff gradients from producing spurious failures and
/// makes an exact 0 vs 0 comparison pass.
GradCheckReport grad_check(ParameterStore& store, const GraphBuilder& build,
                           double eps = 1e-5, double tol = 1e-4,
                           double floor = 1e-6);

}  // namespace lightvad
