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

// Command-line front end. Talks to the library only through lightvad.h.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "lightvad/lightvad.h"

namespace {

// 0 ok, 1 internal or numeric failure, 2 bad usage or input.
int exit_code(lv_status s) {
  switch (s) {
    case LV_OK:
      return 0;
    case LV_ERR_NUMERIC:
    case LV_ERR_INTERNAL:
      return 1;
    default:
      return 2;
  }
}

struct Failure {
  int code;
};

void check(lv_status s, const char* what) {
  if (s == LV_OK) return;
  std::fprintf(stderr, "error: %s: %s (%s)\n", what, lv_last_error(), lv_status_name(s));
  throw Failure{exit_code(s)};
}

class Config {
 public:
  Config() { check(lv_config_create(&cfg_), "config"); }
  ~Config() { lv_config_destroy(cfg_); }
  Config(const Config&) = delete;
  Config& operator=(const Config&) = delete;

  void set(const std::string& key, const std::string& value) {
    check(lv_config_set(cfg_, key.c_str(), value.c_str()), ("--set " + key).c_str());
  }
  void assign(const std::string& kv) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) {
      std::fprintf(stderr, "error: --set expects key=value, got '%s'\n", kv.c_str());
      throw Failure{2};
    }
    set(kv.substr(0, eq), kv.substr(eq + 1));
  }
  void apply_file(const std::string& path) { check(lv_config_apply_file(cfg_, path.c_str()), path.c_str()); }

  std::string get(const std::string& key) const {
    std::size_t needed = 0;
    check(lv_config_get(cfg_, key.c_str(), nullptr, 0, &needed), key.c_str());
    std::string out(needed, '\0');
    check(lv_config_get(cfg_, key.c_str(), out.data(), out.size(), nullptr), key.c_str());
    out.resize(needed - 1);
    return out;
  }

  lv_config* get() { return cfg_; }

 private:
  lv_config* cfg_ = nullptr;
};

class Model {
 public:
  explicit Model(const std::string& path) { check(lv_model_load(path.c_str(), &m_), path.c_str()); }
  ~Model() { lv_model_destroy(m_); }
  Model(const Model&) = delete;
  Model& operator=(const Model&) = delete;
  const lv_model* get() const { return m_; }

 private:
  lv_model* m_ = nullptr;
};

// Options every subcommand shares: a config file, then --set overrides,
// then the subcommand's own convenience flags.
struct Common {
  std::string config_file;
  std::vector<std::string> sets;
  std::vector<std::pair<std::string, std::string>> flags;

  void attach(CLI::App* app) {
    app->add_option("-c,--config", config_file, "key=value config file")->check(CLI::ExistingFile);
    app->add_option("-s,--set", sets, "override a config key (key=value), repeatable");
  }

  // Registers a flag that maps straight onto a config key.
  void alias(CLI::App* app, const std::string& flag, const std::string& key, const std::string& help) {
    app->add_option_function<std::string>(
        flag, [this, key](const std::string& v) { flags.emplace_back(key, v); }, help);
  }

  void apply(Config& cfg) const {
    if (!config_file.empty()) cfg.apply_file(config_file);
    for (const auto& s : sets) cfg.assign(s);
    for (const auto& [k, v] : flags) cfg.set(k, v);
  }
};

std::string with_commas(std::size_t n) {
  std::string digits = std::to_string(n);
  std::string out;
  for (std::size_t i = 0; i < digits.size(); ++i) {
    if (i > 0 && (digits.size() - i) % 3 == 0) out += ',';
    out += digits[i];
  }
  return out;
}

int cmd_gen_synth(const Common& common, const std::string& out_dir) {
  Config cfg;
  common.apply(cfg);
  lv_synth_summary summary{};
  check(lv_gen_synth(cfg.get(), out_dir.c_str(), &summary), "gen-synth");
  if (summary.non_separable) {
    std::fprintf(stderr, "warning: non-separable: some anomaly class has separation 0\n");
  }
  const std::filesystem::path dir(out_dir);
  std::printf("train manifest: %s\n", (dir / "train.csv").string().c_str());
  std::printf("test manifest:  %s\n", (dir / "test.csv").string().c_str());
  std::printf("truth:          %s\n", (dir / "truth.csv").string().c_str());
  std::printf("config:         %s\n", (dir / "config.txt").string().c_str());
  std::printf("videos: %zu train, %zu test; mean planted run %.3f (train) %.3f (test) clips\n",
              summary.train_videos, summary.test_videos, summary.mean_planted_train,
              summary.mean_planted_test);
  return 0;
}

int cmd_train(const Common& common, const std::string& data_dir) {
  Config cfg;
  if (!data_dir.empty()) {
    const std::filesystem::path dir(data_dir);
    cfg.set("data.train_manifest", (dir / "train.csv").string());
    cfg.set("data.test_manifest", (dir / "test.csv").string());
  }
  common.apply(cfg);
  for (const char* key : {"data.train_manifest", "data.test_manifest"}) {
    const std::string path = cfg.get(key);
    if (!path.empty() && !std::filesystem::exists(path)) {
      std::fprintf(stderr, "error: manifest not found: %s\n", path.c_str());
      return 2;
    }
  }
  lv_train_summary s{};
  check(lv_train(cfg.get(), &s), "train");
  const std::filesystem::path out(cfg.get("out_dir"));
  std::printf("epochs %llu, steps %llu\n", static_cast<unsigned long long>(s.epochs),
              static_cast<unsigned long long>(s.steps));
  std::printf("final loss %.6f  omega %.4f  K %.3f\n", s.final_total_loss, s.final_omega, s.final_k);
  if (!std::isnan(s.final_auc)) std::printf("final AUC %.6f  best AUC %.6f\n", s.final_auc, s.best_auc);
  std::printf("checkpoint: %s\n", (out / "model.lwck").string().c_str());
  std::printf("log:        %s\n", (out / "train_log.csv").string().c_str());
  return 0;
}

int cmd_eval(const Common& common, const std::string& checkpoint, const std::string& manifest,
             const std::string& scores_dir) {
  if (!std::filesystem::exists(manifest)) {
    std::fprintf(stderr, "error: manifest not found: %s\n", manifest.c_str());
    return 2;
  }
  Config cfg;
  common.apply(cfg);
  Model model(checkpoint);
  lv_eval_result* raw = nullptr;
  check(lv_evaluate(model.get(), cfg.get(), manifest.c_str(), scores_dir.empty() ? nullptr : scores_dir.c_str(),
                    &raw),
        "eval");
  std::unique_ptr<lv_eval_result, void (*)(lv_eval_result*)> result(raw, lv_eval_destroy);
  std::printf("frames %zu\n", lv_eval_frame_count(raw));
  std::printf("AUC %.17g\n", lv_eval_auc(raw));
  const std::size_t n = lv_eval_class_count(raw);
  if (n > 0) {
    std::printf("%-24s %10s %8s\n", "class", "AUC", "videos");
    for (std::size_t i = 0; i < n; ++i) {
      const char* name = nullptr;
      double auc = 0;
      std::size_t videos = 0;
      check(lv_eval_class(raw, i, &name, &auc, &videos), "eval");
      std::printf("%-24s %10.6f %8zu\n", name, auc, videos);
    }
  }
  for (std::size_t i = 0; i < lv_eval_warning_count(raw); ++i) {
    std::fprintf(stderr, "warning: %s\n", lv_eval_warning(raw, i));
  }
  return 0;
}

int cmd_score(const std::string& checkpoint, const std::string& features, std::size_t num_frames,
              const std::string& labels, const std::string& csv) {
  Model model(checkpoint);
  std::size_t frames = 0;
  check(lv_model_score_file(model.get(), features.c_str(), num_frames, labels.empty() ? nullptr : labels.c_str(),
                            csv.empty() ? nullptr : csv.c_str(), nullptr, 0, &frames),
        "score");
  std::vector<double> scores(frames);
  check(lv_model_score_file(model.get(), features.c_str(), num_frames, labels.empty() ? nullptr : labels.c_str(),
                            nullptr, scores.data(), scores.size(), &frames),
        "score");
  if (csv.empty()) {
    std::printf("frame_index,score\n");
    for (std::size_t i = 0; i < scores.size(); ++i) std::printf("%zu,%.17g\n", i, scores[i]);
  } else {
    std::printf("wrote %zu frame scores to %s\n", frames, csv.c_str());
  }
  return 0;
}

int cmd_params(const Common& common) {
  Config cfg;
  common.apply(cfg);
  lv_param_report r{};
  check(lv_param_report_compute(cfg.get(), &r), "params");
  std::printf("head shape:        %s\n", cfg.get("hfc.shape").c_str());
  std::printf("trainable params:  %s (\xE2\x89\x88%.2fM)\n", with_commas(r.total).c_str(),
              static_cast<double>(r.total) / 1e6);
  std::printf("  attention:       %s\n", with_commas(r.attention).c_str());
  std::printf("  scoring head:    %s\n", with_commas(r.head).c_str());
  std::printf("registered:        %s%s\n", with_commas(r.registered).c_str(),
              r.registered == r.total ? "" : "  (MISMATCH)");
  std::printf("hourglass:         %s\n", with_commas(r.hourglass).c_str());
  std::printf("conventional:      %s\n", with_commas(r.conventional).c_str());
  std::printf("ratio hourglass/conventional: %.4f\n", r.ratio);
  return r.registered == r.total ? 0 : 1;
}

int cmd_grad_check(const Common& common, std::size_t clips, std::size_t dims, std::uint64_t seed, double eps,
                   double tol) {
  Config cfg;
  common.apply(cfg);
  lv_grad_report r{};
  check(lv_grad_check(cfg.get(), clips, dims, seed, eps, tol, &r), "grad-check");
  std::printf("mta.mode %s, T=%zu, D=%zu: %zu entries (%zu one-sided at kinks), max rel error %.3e (worst %s[%zu]) %s\n",
              cfg.get("mta.mode").c_str(), clips, dims, r.entries_checked, r.kinks, r.max_rel_error, r.worst_parameter,
              r.worst_index, r.passed ? "PASS" : "FAIL");
  return r.passed ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"lightvad: weakly supervised video anomaly detection"};
  app.set_version_flag("--version", lv_version());
  app.require_subcommand(1);

  Common gen_common, train_common, eval_common, params_common, grad_common;

  auto* gen = app.add_subcommand("gen-synth", "generate a synthetic weakly labelled dataset");
  std::string gen_out = "synth";
  gen_common.attach(gen);
  gen->add_option("-o,--out", gen_out, "output directory");
  gen_common.alias(gen, "--seed", "seed", "random seed");
  gen_common.alias(gen, "--separation", "synth.separation", "anomaly shift in noise-sigma units");
  gen_common.alias(gen, "--dims", "synth.dims", "feature dimension");
  gen_common.alias(gen, "--clips", "clips", "clips per video");

  auto* train = app.add_subcommand("train", "train a model");
  std::string train_data;
  train_common.attach(train);
  train->add_option("-d,--data", train_data, "dataset directory holding train.csv and test.csv");
  train_common.alias(train, "--seed", "seed", "random seed");
  train_common.alias(train, "--epochs", "train.epochs", "number of epochs");
  train_common.alias(train, "-o,--out", "out_dir", "output directory");
  train_common.alias(train, "--resume", "resume_from", "checkpoint to resume from");
  train_common.alias(train, "--mta", "mta.enabled", "temporal attention on/off (1/0)");
  train_common.alias(train, "--mta-mode", "mta.mode", "residual or pure");
  train_common.alias(train, "--head-shape", "hfc.shape", "hourglass or conventional");
  train_common.alias(train, "--ais", "ais.enabled", "adaptive instance selection on/off (1/0)");
  train_common.alias(train, "--extra-loss", "loss.extra", "antagonistic, sparsity or none");

  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint on a manifest");
  std::string eval_ckpt, eval_manifest, eval_scores;
  eval_common.attach(eval);
  eval->add_option("checkpoint", eval_ckpt, "checkpoint file")->required();
  eval->add_option("manifest", eval_manifest, "manifest CSV")->required();
  eval->add_option("--scores-dir", eval_scores, "write one frame-score CSV per video here");
  eval_common.alias(eval, "--pooling", "eval.pooling", "global or per_video");

  auto* score = app.add_subcommand("score", "score one feature file");
  std::string score_ckpt, score_features, score_labels, score_csv;
  std::size_t score_frames = 0;
  score->add_option("checkpoint", score_ckpt, "checkpoint file")->required();
  score->add_option("features", score_features, "feature file (.lwvf or CSV)")->required();
  score->add_option("-n,--frames", score_frames, "number of frames in the video")->required();
  score->add_option("--labels", score_labels, "frame-label file");
  score->add_option("--csv", score_csv, "write frame_index,score,label here");

  auto* params = app.add_subcommand("params", "report trainable parameter counts");
  params_common.attach(params);
  params_common.alias(params, "--head-shape", "hfc.shape", "hourglass or conventional");
  params_common.alias(params, "--input-dim", "hfc.input_dim", "feature dimension");

  auto* grad = app.add_subcommand("grad-check", "compare analytic gradients with finite differences");
  std::size_t grad_clips = 8, grad_dims = 16;
  std::uint64_t grad_seed = 1;
  double grad_eps = 1e-5, grad_tol = 1e-4;
  grad_common.attach(grad);
  grad->add_option("--clips", grad_clips, "clips per bag");
  grad->add_option("--dims", grad_dims, "feature dimension");
  grad->add_option("--seed", grad_seed, "random seed");
  grad->add_option("--eps", grad_eps, "finite-difference step");
  grad->add_option("--tol", grad_tol, "relative error tolerance");
  grad_common.alias(grad, "--mta-mode", "mta.mode", "residual or pure");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (*gen) return cmd_gen_synth(gen_common, gen_out);
    if (*train) return cmd_train(train_common, train_data);
    if (*eval) return cmd_eval(eval_common, eval_ckpt, eval_manifest, eval_scores);
    if (*score) return cmd_score(score_ckpt, score_features, score_frames, score_labels, score_csv);
    if (*params) return cmd_params(params_common);
    if (*grad) return cmd_grad_check(grad_common, grad_clips, grad_dims, grad_seed, grad_eps, grad_tol);
  } catch (const Failure& f) {
    return f.code;
  }
  return 2;
}
