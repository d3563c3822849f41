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
#include <span>
#include <vector>

#include "lightvad/graph.hpp"
#include "lightvad/tensor.hpp"

namespace lightvad {

/// Scores and attention-weighted features for one positive/negative bag pair.
struct ScoreBagPair {
  std::vector<double> pos_scores;
  std::vector<double> neg_scores;
  Tensor pos_features;  // [T x D]
  Tensor neg_features;  // [T x D]

  void validate() const;
};

struct SelectionResult {
  double omega = 0.0;
  std::size_t k = 1;
  std::vector<std::size_t> pos_topk;
  std::vector<std::size_t> neg_topk;
};

struct SelectionConfig {
  bool adaptive = true;    // false pins K to 1 (plain top-1 MIL)
  double threshold = 0.9;  // score above which a positive instance counts
  bool raw_magnitude = false;  // rank by input features instead of attention output
};

/// Model maturity from the negative-bag mean score and the temporal jitter
/// of both bags, clamped to [0, 1].
double confidence(std::span<const double> pos_scores, std::span<const double> neg_scores);
/// The same quantity before clamping; may be negative.
double confidence_raw(std::span<const double> pos_scores, std::span<const double> neg_scores);

/// K = clamp(round(omega * #{S^P_i >= threshold}), 1, T), rounding half up.
std::size_t adaptive_k(double omega, std::span<const double> pos_scores, double threshold = 0.9);

/// Indices of the K rows with the largest L2 norm, largest first; ties go to
/// the lower index.
std::vector<std::size_t> topk_by_magnitude(const Tensor& features, std::size_t k);

SelectionResult select_instances(const ScoreBagPair& pair, const SelectionConfig& cfg = {});

/// -[log(mean S^P[pos_topk] + eps) + log(1 - mean S^N[neg_topk] + eps)]
Var ais_loss(Var pos_scores, Var neg_scores, const SelectionResult& sel, double eps = 1e-7);
double ais_loss(const ScoreBagPair& pair, const SelectionResult& sel, double eps = 1e-7);

}  // namespace lightvad
