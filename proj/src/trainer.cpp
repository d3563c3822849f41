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

#include "lightvad/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "lightvad/errors.hpp"

namespace lightvad {

namespace {

constexpr std::uint64_t kTrainStream = 0x9E3779B97F4A7C15ULL;

std::string fmt(double v) {
  std::ostringstream ss;
  ss.precision(17);
  ss << v;
  return ss.str();
}

}  // namespace

void TrainConfig::validate() const {
  if (!(lr >= 0.0)) throw ConfigError("train.lr must be non-negative");
  if (!(weight_decay >= 0.0)) throw ConfigError("train.weight_decay must be non-negative");
  if (batch_pairs == 0) throw ConfigError("train.batch_pairs must be positive");
  if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0) || !(adam_beta2 >= 0.0 && adam_beta2 < 1.0)) {
    throw ConfigError("train.adam_beta1/adam_beta2 must lie in [0, 1)");
  }
  if (!(adam_eps > 0.0)) throw ConfigError("train.adam_eps must be positive");
  if (eval_every == 0) throw ConfigError("train.eval_every must be positive");
}

TrainState TrainState::fresh(const ParameterStore& params, std::uint64_t seed) {
  TrainState s;
  for (const auto& p : params) {
    s.first_moment.emplace_back(p.value.shape(), 0.0);
    s.second_moment.emplace_back(p.value.shape(), 0.0);
  }
  s.rng.seed(seed ^ kTrainStream);
  return s;
}

TrainState TrainState::from_progress(const ParameterStore& params, const TrainProgress& progress) {
  TrainState s = fresh(params, 0);
  s.step = progress.step;
  s.epoch = progress.epoch;
  s.best_auc = progress.best_auc;
  if (!progress.first_moment.empty()) {
    s.first_moment = progress.first_moment;
    s.second_moment = progress.second_moment;
  }
  if (!progress.rng_state.empty()) {
    std::istringstream in(progress.rng_state);
    in >> s.rng;
    if (!in) throw FormatError("corrupt generator state in checkpoint", 0);
  }
  return s;
}

TrainProgress TrainState::progress() const {
  TrainProgress p;
  p.step = step;
  p.epoch = epoch;
  p.best_auc = best_auc;
  std::ostringstream out;
  out << rng;
  p.rng_state = out.str();
  p.first_moment = first_moment;
  p.second_moment = second_moment;
  return p;
}

void adam_step(ParameterStore& params, TrainState& state, const TrainConfig& cfg) {
  if (state.first_moment.size() != params.count()) {
    throw DimensionError("adam_step: optimizer state does not match the parameter store");
  }
  for (const auto& p : params) {
    if (!p.grad.all_finite()) throw NumericError("adam_step: non-finite gradient in " + p.name);
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(cfg.adam_beta1, t);
  const double c2 = 1.0 - std::pow(cfg.adam_beta2, t);
  std::size_t idx = 0;
  for (auto& p : params) {
    Tensor& m = state.first_moment[idx];
    Tensor& v = state.second_moment[idx];
    ++idx;
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      const double g = p.grad[i] + cfg.weight_decay * p.value[i];
      m[i] = cfg.adam_beta1 * m[i] + (1.0 - cfg.adam_beta1) * g;
      v[i] = cfg.adam_beta2 * v[i] + (1.0 - cfg.adam_beta2) * g * g;
      p.value[i] -= cfg.lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + cfg.adam_eps);
    }
  }
}

EpochStats train_epoch(const std::vector<const Video*>& abnormal,
                       const std::vector<const Video*>& normal, Model& model,
                       TrainState& state, const ExperimentConfig& cfg) {
  const std::size_t batch = cfg.train.batch_pairs;
  if (abnormal.size() < batch || normal.size() < batch) {
    throw ConfigError("train_epoch: batch of " + std::to_string(batch) + " pairs needs at least " +
                      std::to_string(batch) + " abnormal and normal videos (have " +
                      std::to_string(abnormal.size()) + " and " + std::to_string(normal.size()) + ")");
  }
  std::vector<const Video*> pos = abnormal, neg = normal;
  std::shuffle(pos.begin(), pos.end(), state.rng);
  std::shuffle(neg.begin(), neg.end(), state.rng);

  EpochStats stats;
  const std::size_t batches = std::min(pos.size(), neg.size()) / batch;
  for (std::size_t b = 0; b < batches; ++b) {
    model.params().zero_grads();
    for (std::size_t i = b * batch; i < (b + 1) * batch; ++i) {
      const Tensor& xp = pos[i]->bag.features;
      const Tensor& xn = neg[i]->bag.features;

      // Selection runs on an inference pass (dropout off).
      ScoreBagPair pair;
      {
        Graph g;
        auto op = model.forward(g, xp);
        auto on = model.forward(g, xn);
        pair.pos_scores = op.scores.value().values();
        pair.neg_scores = on.scores.value().values();
        pair.pos_features = cfg.selection.raw_magnitude ? xp : op.features.value();
        pair.neg_features = cfg.selection.raw_magnitude ? xn : on.features.value();
      }
      const SelectionResult sel = select_instances(pair, cfg.selection);

      Graph g;
      auto op = model.forward(g, xp, true, state.rng);
      auto on = model.forward(g, xn, true, state.rng);
      TotalLoss loss = total_loss(op.scores, on.scores, sel, cfg.loss);
      g.backward(loss.total, 1.0 / static_cast<double>(batch));

      stats.loss += loss.parts;
      stats.mean_omega += sel.omega;
      stats.mean_k += static_cast<double>(sel.k);
      ++stats.pairs;
    }
    adam_step(model.params(), state, cfg.train);
  }
  const double inv = 1.0 / static_cast<double>(stats.pairs);
  stats.loss = stats.loss.scaled(inv);
  stats.mean_omega *= inv;
  stats.mean_k *= inv;
  return stats;
}

std::string log_header() { return "epoch,ais,smooth,antagonistic,sparsity,total,auc,omega,k"; }

std::string format_log_row(const LogRow& row) {
  std::string s = std::to_string(row.epoch);
  for (double v : {row.loss.ais, row.loss.smooth, row.loss.antagonistic, row.loss.sparsity, row.loss.total}) {
    s += "," + fmt(v);
  }
  s += ",";
  if (row.auc) s += fmt(*row.auc);
  s += "," + fmt(row.omega) + "," + fmt(row.k);
  return s;
}

std::vector<LogRow> read_log(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open training log " + path.string());
  std::vector<LogRow> rows;
  std::string line;
  std::size_t offset = 0;
  if (!std::getline(in, line) || line != log_header()) {
    throw FormatError("training log header must be '" + log_header() + "' in " + path.string(), 0);
  }
  offset += line.size() + 1;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::istringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) f.push_back(cell);
    if (line.back() == ',') f.emplace_back();
    if (f.size() != 9) throw FormatError("training log row needs 9 fields in " + path.string(), offset);
    try {
      LogRow r;
      r.epoch = std::stoull(f[0]);
      r.loss = {std::stod(f[1]), std::stod(f[2]), std::stod(f[3]), std::stod(f[4]), std::stod(f[5])};
      if (!f[6].empty()) r.auc = std::stod(f[6]);
      r.omega = std::stod(f[7]);
      r.k = std::stod(f[8]);
      rows.push_back(r);
    } catch (const std::exception&) {
      throw FormatError("bad number in training log " + path.string(), offset);
    }
    offset += line.size() + 1;
  }
  return rows;
}

FitResult fit(const std::vector<Video>& train, const std::vector<Video>& test,
              const ExperimentConfig& cfg_in, const FitOptions& opts) {
  if (train.empty()) throw ConfigError("fit: empty training set");
  ExperimentConfig cfg = cfg_in;
  cfg.model.hfc.input_dim = train.front().bag.dims();
  cfg.train.validate();

  std::vector<const Video*> abnormal, normal;
  for (const auto& v : train) (v.bag.label ? abnormal : normal).push_back(&v);
  if (abnormal.size() < cfg.train.batch_pairs || normal.size() < cfg.train.batch_pairs) {
    throw ConfigError("fit: train.batch_pairs=" + std::to_string(cfg.train.batch_pairs) +
                      " exceeds the available videos (" + std::to_string(abnormal.size()) +
                      " abnormal, " + std::to_string(normal.size()) + " normal)");
  }

  std::optional<Model> model;
  TrainState state;
  if (opts.resume_from) {
    auto ck = load_checkpoint(*opts.resume_from, &cfg.model);
    state = TrainState::from_progress(ck.model.params(), ck.progress);
    model.emplace(std::move(ck.model));
  } else {
    model.emplace(cfg.model, cfg.train.seed);
    state = TrainState::fresh(model->params(), cfg.train.seed);
  }

  std::filesystem::create_directories(opts.out_dir);
  FitResult result{*model, state, {}, std::nullopt, opts.out_dir / "model.lwck",
                   opts.out_dir / "best.lwck", opts.out_dir / "train_log.csv"};

  const bool append = opts.resume_from && std::filesystem::exists(result.log_file);
  std::ofstream log(result.log_file, append ? std::ios::app : std::ios::trunc);
  if (!log) throw IoError("cannot write training log " + result.log_file.string());
  if (!append) log << log_header() << '\n';

  auto evaluate = [&]() -> std::optional<double> {
    if (test.empty()) return std::nullopt;
    return pooled_auc(score_videos(*model, test), cfg.pooling);
  };
  auto consider_best = [&](double auc) {
    if (std::isnan(state.best_auc) || auc > state.best_auc) {
      state.best_auc = auc;
      save_checkpoint(result.best_checkpoint, *model, state.progress());
    }
  };

  if (cfg.train.epochs == 0) {
    result.final_auc = evaluate();
    if (result.final_auc) consider_best(*result.final_auc);
  }
  for (std::size_t e = 1; e <= cfg.train.epochs; ++e) {
    EpochStats stats = train_epoch(abnormal, normal, *model, state, cfg);
    ++state.epoch;
    LogRow row{state.epoch, stats.loss, std::nullopt, stats.mean_omega, stats.mean_k};
    if (e % cfg.train.eval_every == 0 || e == cfg.train.epochs) {
      row.auc = evaluate();
      if (row.auc) {
        result.final_auc = row.auc;
        consider_best(*row.auc);
      }
    }
    log << format_log_row(row) << '\n' << std::flush;
    result.log.push_back(row);
  }
  if (!log) throw IoError("write failed: " + result.log_file.string());

  save_checkpoint(result.checkpoint, *model, state.progress());
  result.model = std::move(*model);
  result.state = std::move(state);
  return result;
}

}  // namespace lightvad
