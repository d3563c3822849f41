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

#include <span>

#include "lightvad/graph.hpp"
#include "lightvad/selection.hpp"

namespace lightvad {

/// Which extra term joins the AIS and smooth losses.
enum class ExtraLoss { None, Antagonistic, Sparsity };

std::string to_string(ExtraLoss e);
ExtraLoss parse_extra_loss(const std::string& s);

struct LossConfig {
  ExtraLoss extra = ExtraLoss::Antagonistic;
  bool smooth_on_both = false;
  double eps = 1e-7;
};

struct LossBreakdown {
  double ais = 0.0;
  double smooth = 0.0;
  double antagonistic = 0.0;
  double sparsity = 0.0;  // always reported, summed only for ExtraLoss::Sparsity
  double total = 0.0;

  LossBreakdown& operator+=(const LossBreakdown& o);
  LossBreakdown scaled(double c) const;
};

/// Mean squared difference between consecutive scores.
Var smooth_loss(Var scores);
/// [1 - (p - n)] + n + (1 - p) with p, n the top-1 positive/negative scores.
Var antagonistic_loss(Var pos_scores, Var neg_scores);
/// Mean positive-bag score.
Var sparsity_loss(Var pos_scores);

double smooth_loss(std::span<const double> scores);
double antagonistic_loss(std::span<const double> pos_scores, std::span<const double> neg_scores);
double sparsity_loss(std::span<const double> pos_scores);

struct TotalLoss {
  Var total;
  LossBreakdown parts;
};

TotalLoss total_loss(Var pos_scores, Var neg_scores, const SelectionResult& sel,
                     const LossConfig& cfg);
LossBreakdown total_loss(const ScoreBagPair& pair, const SelectionResult& sel,
                         const LossConfig& cfg);

}  // namespace lightvad
