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

#include "lightvad/diagnostics.hpp"

#include <algorithm>

#include "lightvad/losses.hpp"
#include "lightvad/selection.hpp"

namespace lightvad {

GradCheckReport check_model_gradients(ModelConfig cfg, std::size_t clips, std::size_t dims,
                                      std::uint64_t seed, double eps, double tol) {
  cfg.hfc.input_dim = dims;
  Model model(cfg, seed);
  Rng rng(seed + 1);
  auto uniform = [&](double lo, double hi) {
    return lo + (hi - lo) * static_cast<double>(rng() >> 11) * 0x1.0p-53;
  };
  for (auto& p : model.params()) {
    if (p.name.starts_with("mta.")) {
      for (auto& v : p.value.data()) v = uniform(-0.5, 0.5);
    }
  }
  Tensor pos({clips, dims}), neg({clips, dims});
  for (auto& v : pos.data()) v = uniform(-2.0, 2.0);
  for (auto& v : neg.data()) v = uniform(-2.0, 2.0);

  SelectionResult sel;
  {
    Graph g;
    auto op = model.forward(g, pos);
    auto on = model.forward(g, neg);
    sel.omega = confidence(op.scores.value().values(), on.scores.value().values());
    sel.k = std::min<std::size_t>(3, clips);
    sel.pos_topk = topk_by_magnitude(op.features.value(), sel.k);
    sel.neg_topk = topk_by_magnitude(on.features.value(), sel.k);
  }

  LossConfig loss_cfg;
  loss_cfg.extra = ExtraLoss::Antagonistic;
  loss_cfg.smooth_on_both = true;
  auto build = [&](Graph& g, ParameterStore&) {
    Rng unused(0);
    auto op = model.forward(g, pos, false, unused);
    auto on = model.forward(g, neg, false, unused);
    auto total = total_loss(op.scores, on.scores, sel, loss_cfg);
    return ops::add(total.total, sparsity_loss(op.scores));
  };
  return grad_check(model.params(), build, eps, tol);
}

}  // namespace lightvad
