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
#include <optional>
#include <vector>

#include "lightvad/data_io.hpp"
#include "lightvad/eval.hpp"
#include "lightvad/losses.hpp"
#include "lightvad/model.hpp"
#include "lightvad/selection.hpp"

namespace lightvad {

struct TrainConfig {
  double lr = 1e-3;
  double weight_decay = 5e-4;
  std::size_t batch_pairs = 32;
  std::size_t epochs = 200;
  std::uint64_t seed = 7;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  std::size_t eval_every = 1;

  void validate() const;
};

/// Everything that decides what a training run computes.
struct ExperimentConfig {
  ModelConfig model;
  TrainConfig train;
  SelectionConfig selection;
  LossConfig loss;
  Pooling pooling = Pooling::Global;
};

struct TrainState {
  std::uint64_t step = 0;
  std::uint64_t epoch = 0;
  std::vector<Tensor> first_moment;
  std::vector<Tensor> second_moment;
  double best_auc = std::numeric_limits<double>::quiet_NaN();
  Rng rng;

  static TrainState fresh(const ParameterStore& params, std::uint64_t seed);
  static TrainState from_progress(const ParameterStore& params, const TrainProgress& progress);
  TrainProgress progress() const;
};

/// Adam with bias correction; weight decay enters as an L2 term added to the
/// gradient before the moment update.
void adam_step(ParameterStore& params, TrainState& state, const TrainConfig& cfg);

struct EpochStats {
  LossBreakdown loss;  // mean over pairs
  double mean_omega = 0.0;
  double mean_k = 0.0;
  std::size_t pairs = 0;
};

/// One pass over shuffled abnormal/normal bags, paired positionally within
/// each batch of `batch_pairs`; one Adam step per batch.
EpochStats train_epoch(const std::vector<const Video*>& abnormal,
                       const std::vector<const Video*>& normal, Model& model,
                       TrainState& state, const ExperimentConfig& cfg);

struct LogRow {
  std::uint64_t epoch = 0;
  LossBreakdown loss;
  std::optional<double> auc;
  double omega = 0.0;
  double k = 0.0;
};

/// `epoch,ais,smooth,antagonistic,sparsity,total,auc,omega,k`
std::string log_header();
std::string format_log_row(const LogRow& row);
std::vector<LogRow> read_log(const std::filesystem::path& path);

struct FitOptions {
  std::filesystem::path out_dir;
  std::optional<std::filesystem::path> resume_from;
};

struct FitResult {
  Model model;
  TrainState state;
  std::vector<LogRow> log;
  std::optional<double> final_auc;
  std::filesystem::path checkpoint;       // state after the last epoch
  std::filesystem::path best_checkpoint;  // highest evaluated AUC
  std::filesystem::path log_file;
};

/// Trains for cfg.train.epochs epochs, evaluating on `test` every
/// eval_every epochs and after the last one. Writes model.lwck, best.lwck and
/// train_log.csv into opts.out_dir. The model's input width is taken from the
/// training bags.
FitResult fit(const std::vector<Video>& train, const std::vector<Video>& test,
              const ExperimentConfig& cfg, const FitOptions& opts);

}  // namespace lightvad
