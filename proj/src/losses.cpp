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

#include "lightvad/losses.hpp"

#include <vector>

#include "lightvad/errors.hpp"

namespace lightvad {

std::string to_string(ExtraLoss e) {
  switch (e) {
    case ExtraLoss::None: return "none";
    case ExtraLoss::Antagonistic: return "antagonistic";
    case ExtraLoss::Sparsity: return "sparsity";
  }
  return "none";
}

ExtraLoss parse_extra_loss(const std::string& s) {
  if (s == "none") return ExtraLoss::None;
  if (s == "antagonistic") return ExtraLoss::Antagonistic;
  if (s == "sparsity") return ExtraLoss::Sparsity;
  throw ConfigError("unknown extra loss '" + s + "' (expected none, antagonistic or sparsity)");
}

LossBreakdown& LossBreakdown::operator+=(const LossBreakdown& o) {
  ais += o.ais;
  smooth += o.smooth;
  antagonistic += o.antagonistic;
  sparsity += o.sparsity;
  total += o.total;
  return *this;
}

LossBreakdown LossBreakdown::scaled(double c) const {
  return {ais * c, smooth * c, antagonistic * c, sparsity * c, total * c};
}

Var smooth_loss(Var scores) {
  const std::size_t t = scores.value().size();
  if (t < 2) throw DimensionError("smooth_loss: need at least 2 scores");
  return ops::scale(ops::sum(ops::square(ops::adjacent_diff(scores))), 1.0 / static_cast<double>(t - 1));
}

Var antagonistic_loss(Var pos_scores, Var neg_scores) {
  Var p = ops::max(pos_scores);
  Var n = ops::max(neg_scores);
  // [1 - (p - n)] + n + (1 - p), kept term by term.
  Var gap = ops::add_scalar(ops::scale(ops::sub(p, n), -1.0), 1.0);
  Var miss = ops::add_scalar(ops::scale(p, -1.0), 1.0);
  return ops::add(ops::add(gap, n), miss);
}

Var sparsity_loss(Var pos_scores) { return ops::mean(pos_scores); }

namespace {

template <typename F>
double eval_scalar(F&& f, std::initializer_list<std::span<const double>> inputs) {
  Graph g;
  std::vector<Var> vars;
  for (auto in : inputs) {
    if (in.empty()) throw DimensionError("loss: empty score vector");
    vars.push_back(g.constant(Tensor::vector({in.begin(), in.end()})));
  }
  return f(vars).value()[0];
}

}  // namespace

double smooth_loss(std::span<const double> scores) {
  return eval_scalar([](auto& v) { return smooth_loss(v[0]); }, {scores});
}

double antagonistic_loss(std::span<const double> pos, std::span<const double> neg) {
  return eval_scalar([](auto& v) { return antagonistic_loss(v[0], v[1]); }, {pos, neg});
}

double sparsity_loss(std::span<const double> pos) {
  return eval_scalar([](auto& v) { return sparsity_loss(v[0]); }, {pos});
}

TotalLoss total_loss(Var pos_scores, Var neg_scores, const SelectionResult& sel,
                     const LossConfig& cfg) {
  Var ais = ais_loss(pos_scores, neg_scores, sel, cfg.eps);
  Var smooth = smooth_loss(pos_scores);
  if (cfg.smooth_on_both) smooth = ops::scale(ops::add(smooth, smooth_loss(neg_scores)), 0.5);
  Var antagonistic = antagonistic_loss(pos_scores, neg_scores);
  Var sparsity = sparsity_loss(pos_scores);

  Var total = ops::add(ais, smooth);
  if (cfg.extra == ExtraLoss::Antagonistic) total = ops::add(total, antagonistic);
  if (cfg.extra == ExtraLoss::Sparsity) total = ops::add(total, sparsity);

  LossBreakdown parts{ais.value()[0], smooth.value()[0], antagonistic.value()[0],
                      sparsity.value()[0], total.value()[0]};
  return {total, parts};
}

LossBreakdown total_loss(const ScoreBagPair& pair, const SelectionResult& sel,
                         const LossConfig& cfg) {
  Graph g;
  Var p = g.constant(Tensor::vector(pair.pos_scores));
  Var n = g.constant(Tensor::vector(pair.neg_scores));
  return total_loss(p, n, sel, cfg).parts;
}

}  // namespace lightvad
