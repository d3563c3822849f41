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

#include "lightvad/selection.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "lightvad/errors.hpp"

namespace lightvad {

void ScoreBagPair::validate() const {
  if (pos_scores.size() != neg_scores.size()) {
    throw DimensionError("score pair: positive bag has " + std::to_string(pos_scores.size()) +
                         " instances, negative bag has " + std::to_string(neg_scores.size()));
  }
  for (const Tensor* f : {&pos_features, &neg_features}) {
    if (f->rank() != 2 || f->dim(0) != pos_scores.size()) {
      throw DimensionError("score pair: features " + shape_to_string(f->shape()) +
                           " do not match " + std::to_string(pos_scores.size()) + " scores");
    }
  }
}

double confidence_raw(std::span<const double> pos, std::span<const double> neg) {
  if (pos.size() != neg.size()) throw DimensionError("confidence: bag lengths differ");
  const std::size_t t = neg.size();
  if (t < 2) throw DimensionError("confidence: need at least 2 instances per bag");
  const double mean_neg = std::accumulate(neg.begin(), neg.end(), 0.0) / static_cast<double>(t);
  double jitter = 0.0;
  for (std::size_t i = 0; i + 1 < t; ++i) {
    jitter += std::abs(neg[i + 1] - neg[i]) + std::abs(pos[i + 1] - pos[i]);
  }
  return 1.0 - mean_neg - jitter / static_cast<double>(2 * t - 2);
}

double confidence(std::span<const double> pos, std::span<const double> neg) {
  return std::clamp(confidence_raw(pos, neg), 0.0, 1.0);
}

std::size_t adaptive_k(double omega, std::span<const double> pos_scores, double threshold) {
  if (!(omega >= 0.0 && omega <= 1.0)) {
    throw ConfigError("adaptive_k: omega must lie in [0, 1], got " + std::to_string(omega));
  }
  const std::size_t t = pos_scores.size();
  if (t == 0) throw DimensionError("adaptive_k: empty bag");
  const auto count = static_cast<double>(
      std::count_if(pos_scores.begin(), pos_scores.end(), [&](double s) { return s >= threshold; }));
  const auto k = static_cast<std::size_t>(std::floor(omega * count + 0.5));
  return std::clamp<std::size_t>(k, 1, t);
}

std::vector<std::size_t> topk_by_magnitude(const Tensor& features, std::size_t k) {
  if (features.rank() != 2) {
    throw DimensionError("topk_by_magnitude: expected [T x D], got " +
                         shape_to_string(features.shape()));
  }
  const std::size_t t = features.dim(0);
  if (k < 1 || k > t) {
    throw ConfigError("topk_by_magnitude: K=" + std::to_string(k) + " outside [1, " +
                      std::to_string(t) + "]");
  }
  std::vector<double> norms(t);
  for (std::size_t r = 0; r < t; ++r) {
    double s = 0.0;
    for (double v : features.row(r)) s += v * v;
    norms[r] = std::sqrt(s);
  }
  std::vector<std::size_t> idx(t);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return norms[a] > norms[b]; });
  idx.resize(k);
  return idx;
}

SelectionResult select_instances(const ScoreBagPair& pair, const SelectionConfig& cfg) {
  pair.validate();
  SelectionResult sel;
  sel.omega = confidence(pair.pos_scores, pair.neg_scores);
  sel.k = cfg.adaptive ? adaptive_k(sel.omega, pair.pos_scores, cfg.threshold) : 1;
  sel.pos_topk = topk_by_magnitude(pair.pos_features, sel.k);
  sel.neg_topk = topk_by_magnitude(pair.neg_features, sel.k);
  return sel;
}

Var ais_loss(Var pos_scores, Var neg_scores, const SelectionResult& sel, double eps) {
  if (sel.pos_topk.size() != sel.k || sel.neg_topk.size() != sel.k) {
    throw DimensionError("ais_loss: selection index lists must both have K entries");
  }
  Var mp = ops::mean(ops::gather(pos_scores, sel.pos_topk));
  Var mn = ops::mean(ops::gather(neg_scores, sel.neg_topk));
  Var pos_term = ops::log(ops::add_scalar(mp, eps));
  Var neg_term = ops::log(ops::add_scalar(ops::scale(mn, -1.0), 1.0 + eps));
  return ops::scale(ops::add(pos_term, neg_term), -1.0);
}

double ais_loss(const ScoreBagPair& pair, const SelectionResult& sel, double eps) {
  Graph g;
  Var p = g.constant(Tensor::vector(pair.pos_scores));
  Var n = g.constant(Tensor::vector(pair.neg_scores));
  return ais_loss(p, n, sel, eps).value()[0];
}

}  // namespace lightvad
