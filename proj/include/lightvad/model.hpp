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
#include <filesystem>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include "lightvad/graph.hpp"
#include "lightvad/tensor.hpp"

namespace lightvad {

enum class MtaMode { Residual, Pure };
enum class HeadShape { Hourglass, Conventional };

std::string to_string(MtaMode mode);
std::string to_string(HeadShape shape);
MtaMode parse_mta_mode(const std::string& s);
HeadShape parse_head_shape(const std::string& s);

/// Multi-level temporal attention. Kernel sizes are k_max, k_max-2, ..., 3.
struct MtaConfig {
  bool enabled = true;
  std::size_t k_max = 5;
  double lambda1 = 0.1;
  double slope = 0.5;
  MtaMode mode = MtaMode::Residual;

  std::vector<std::size_t> kernel_sizes() const;
  void validate() const;
  bool operator==(const MtaConfig&) const = default;
};

/// Scoring head. Hourglass widths run input -> narrow -> wide -> 1;
/// conventional runs input -> wide -> narrow -> 1.
struct HfcConfig {
  std::size_t input_dim = 2048;
  std::size_t narrow = 64;
  std::size_t wide = 128;
  HeadShape shape = HeadShape::Hourglass;
  double dropout = 0.5;
  double slope = 0.5;

  std::vector<std::size_t> dims() const;
  void validate() const;
  bool operator==(const HfcConfig&) const = default;
};

struct ModelConfig {
  MtaConfig mta;
  HfcConfig hfc;

  void validate() const;
  bool operator==(const ModelConfig&) const = default;

  std::map<std::string, std::string> to_kv() const;
  static ModelConfig from_kv(const std::map<std::string, std::string>& kv);
};

/// Closed-form trainable-parameter count.
std::size_t count_parameters(const ModelConfig& cfg);

struct ModelOutput {
  Var features;  // MTA output, [T x D]
  Var scores;    // per-instance anomaly scores, [T]
};

class Model {
 public:
  /// Linear layers start uniform in +-1/sqrt(fan_in); attention kernels
  /// start at zero so the residual attention path is the identity.
  Model(ModelConfig cfg, std::uint64_t seed);

  const ModelConfig& config() const noexcept { return cfg_; }
  ParameterStore& params() noexcept { return params_; }
  const ParameterStore& params() const noexcept { return params_; }

  /// With `track_grads` false the parameters enter the graph as constants,
  /// so the call only reads them.
  ModelOutput forward(Graph& g, const Tensor& x, bool training, Rng& rng,
                      bool track_grads = true);
  ModelOutput forward(Graph& g, const Tensor& x) const;

  Var mta_forward(Graph& g, Var x, bool track_grads = true);
  Var hfc_forward(Graph& g, Var y, bool training, Rng& rng, bool track_grads = true);

  /// Inference-mode clip scores.
  std::vector<double> score(const Tensor& x) const;

 private:
  Var bind(Graph& g, const std::string& name, bool track);

  ModelConfig cfg_;
  ParameterStore params_;
};

/// Optimizer bookkeeping stored alongside the weights so a run can resume.
struct TrainProgress {
  std::uint64_t step = 0;
  std::uint64_t epoch = 0;
  double best_auc = std::numeric_limits<double>::quiet_NaN();
  std::string rng_state;
  std::vector<Tensor> first_moment;
  std::vector<Tensor> second_moment;
};

// LWCK: "LWCK" | u16 version | u32 len | config text | u32 count |
//       per parameter: u16 name len | name | u32 rank | u32 dims | f64 LE data |
//       progress block.
void save_checkpoint(const std::filesystem::path& path, const Model& model,
                     const TrainProgress& progress = {});

struct Checkpoint {
  Model model;
  TrainProgress progress;
};

/// Rejects the file if `expected` is given and the stored config differs.
Checkpoint load_checkpoint(const std::filesystem::path& path,
                           const ModelConfig* expected = nullptr);

}  // namespace lightvad
