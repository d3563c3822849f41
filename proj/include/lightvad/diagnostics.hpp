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

#include <cstdint>

#include "lightvad/graph.hpp"
#include "lightvad/model.hpp"

namespace lightvad {

/// Gradient check over the full scoring graph: attention, head and every loss
/// term on a random positive/negative pair. Attention kernels are randomized
/// so the attention path carries gradient; dropout is off and the instance
/// selection is frozen so the loss is smooth in the parameters.
GradCheckReport check_model_gradients(ModelConfig cfg, std::size_t clips, std::size_t dims,
                                      std::uint64_t seed, double eps = 1e-5,
                                      double tol = 1e-4);

}  // namespace lightvad
