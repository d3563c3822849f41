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

#include "lightvad/lightvad.h"

#include <cmath>
#include <cstring>
#include <limits>
#include <string>

#include "lightvad/config.hpp"
#include "lightvad/diagnostics.hpp"
#include "lightvad/errors.hpp"
#include "lightvad/eval.hpp"
#include "lightvad/trainer.hpp"

struct lv_config {
  lightvad::RunConfig cfg;
};

struct lv_model {
  lightvad::Model model;
};

struct lv_eval_result {
  double auc = 0.0;
  std::size_t frames = 0;
  lightvad::PerClassReport per_class;
};

namespace {

thread_local std::string g_last_error;

lv_status status_for(lightvad::ErrorKind kind) {
  using lightvad::ErrorKind;
  switch (kind) {
    case ErrorKind::Config: return LV_ERR_CONFIG;
    case ErrorKind::Dimension: return LV_ERR_DIMENSION;
    case ErrorKind::Format: return LV_ERR_FORMAT;
    case ErrorKind::Io: return LV_ERR_IO;
    case ErrorKind::Numeric: return LV_ERR_NUMERIC;
    case ErrorKind::UndefinedMetric: return LV_ERR_UNDEFINED_METRIC;
  }
  return LV_ERR_INTERNAL;
}

lv_status fail(lv_status s, std::string message) {
  g_last_error = std::move(message);
  return s;
}

template <typename F>
lv_status guarded(F&& f) {
  try {
    f();
    g_last_error.clear();
    return LV_OK;
  } catch (const lightvad::Error& e) {
    return fail(status_for(e.kind()), e.what());
  } catch (const std::filesystem::filesystem_error& e) {
    return fail(LV_ERR_IO, e.what());
  } catch (const std::bad_alloc&) {
    return fail(LV_ERR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return fail(LV_ERR_INTERNAL, e.what());
  } catch (...) {
    return fail(LV_ERR_INTERNAL, "unknown error");
  }
}

lv_status copy_out(const std::string& s, char* buf, std::size_t buf_len, std::size_t* needed) {
  if (needed) *needed = s.size() + 1;
  if (buf && buf_len) {
    const std::size_t n = std::min(s.size(), buf_len - 1);
    std::memcpy(buf, s.data(), n);
    buf[n] = '\0';
  }
  return LV_OK;
}

#define LV_REQUIRE(cond, what) \
  if (!(cond)) return fail(LV_ERR_INVALID_ARGUMENT, what)

}  // namespace

extern "C" {

const char* lv_version(void) { return "0.1.0"; }

const char* lv_last_error(void) { return g_last_error.c_str(); }

const char* lv_status_name(lv_status status) {
  switch (status) {
    case LV_OK: return "ok";
    case LV_ERR_INVALID_ARGUMENT: return "invalid argument";
    case LV_ERR_CONFIG: return "configuration error";
    case LV_ERR_DIMENSION: return "dimension error";
    case LV_ERR_FORMAT: return "format error";
    case LV_ERR_IO: return "i/o error";
    case LV_ERR_NUMERIC: return "numeric error";
    case LV_ERR_UNDEFINED_METRIC: return "undefined metric";
    case LV_ERR_INTERNAL: return "internal error";
  }
  return "unknown status";
}

lv_status lv_config_create(lv_config** out) {
  LV_REQUIRE(out, "lv_config_create: null output pointer");
  return guarded([&] { *out = new lv_config{}; });
}

void lv_config_destroy(lv_config* cfg) { delete cfg; }

lv_status lv_config_set(lv_config* cfg, const char* key, const char* value) {
  LV_REQUIRE(cfg && key && value, "lv_config_set: null argument");
  return guarded([&] { cfg->cfg.set(key, value); });
}

lv_status lv_config_apply_file(lv_config* cfg, const char* path) {
  LV_REQUIRE(cfg && path, "lv_config_apply_file: null argument");
  return guarded([&] { cfg->cfg.apply_file(path); });
}

lv_status lv_config_get(const lv_config* cfg, const char* key, char* buf, size_t buf_len,
                        size_t* needed) {
  LV_REQUIRE(cfg && key, "lv_config_get: null argument");
  std::string value;
  const lv_status s = guarded([&] { value = cfg->cfg.get(key); });
  return s == LV_OK ? copy_out(value, buf, buf_len, needed) : s;
}

lv_status lv_config_dump(const lv_config* cfg, char* buf, size_t buf_len, size_t* needed) {
  LV_REQUIRE(cfg, "lv_config_dump: null config");
  return copy_out(cfg->cfg.dump(), buf, buf_len, needed);
}

lv_status lv_config_write(const lv_config* cfg, const char* path) {
  LV_REQUIRE(cfg && path, "lv_config_write: null argument");
  return guarded([&] { cfg->cfg.write(path); });
}

lv_status lv_gen_synth(const lv_config* cfg, const char* out_dir, lv_synth_summary* out) {
  LV_REQUIRE(cfg && out_dir, "lv_gen_synth: null argument");
  return guarded([&] {
    cfg->cfg.synth.validate();
    const std::filesystem::path dir(out_dir);
    auto ds = lightvad::make_synthetic(cfg->cfg.synth, dir);
    lightvad::RunConfig echo = cfg->cfg;
    echo.train_manifest = ds.train_manifest.string();
    echo.test_manifest = ds.test_manifest.string();
    echo.write(dir / "config.txt");
    if (out) {
      out->train_videos = cfg->cfg.synth.n_normal + cfg->cfg.synth.n_abnormal;
      out->test_videos = cfg->cfg.synth.n_test_normal + cfg->cfg.synth.n_test_abnormal;
      out->mean_planted_train = ds.mean_planted_length("train");
      out->mean_planted_test = ds.mean_planted_length("test");
      out->non_separable = ds.warnings.empty() ? 0 : 1;
    }
  });
}

lv_status lv_train(const lv_config* cfg, lv_train_summary* out) {
  LV_REQUIRE(cfg, "lv_train: null config");
  return guarded([&] {
    const auto& rc = cfg->cfg;
    rc.validate();
    if (rc.train_manifest.empty()) throw lightvad::ConfigError("data.train_manifest is not set");
    auto train = lightvad::load_videos(lightvad::read_manifest(rc.train_manifest), rc.clips);
    std::vector<lightvad::Video> test;
    if (!rc.test_manifest.empty()) {
      test = lightvad::load_videos(lightvad::read_manifest(rc.test_manifest), rc.clips);
    }
    lightvad::FitOptions opts;
    opts.out_dir = rc.out_dir;
    if (!rc.resume_from.empty()) opts.resume_from = rc.resume_from;

    lightvad::RunConfig echo = rc;
    if (!train.empty()) echo.experiment.model.hfc.input_dim = train.front().bag.dims();
    echo.write(std::filesystem::path(rc.out_dir) / "config.txt");

    auto result = lightvad::fit(train, test, rc.experiment, opts);
    if (out) {
      const double nan = std::numeric_limits<double>::quiet_NaN();
      out->epochs = result.state.epoch;
      out->steps = result.state.step;
      out->final_auc = result.final_auc.value_or(nan);
      out->best_auc = result.state.best_auc;
      out->final_total_loss = result.log.empty() ? nan : result.log.back().loss.total;
      out->final_omega = result.log.empty() ? nan : result.log.back().omega;
      out->final_k = result.log.empty() ? nan : result.log.back().k;
    }
  });
}

lv_status lv_model_load(const char* checkpoint_path, lv_model** out) {
  LV_REQUIRE(checkpoint_path && out, "lv_model_load: null argument");
  return guarded([&] {
    auto ck = lightvad::load_checkpoint(checkpoint_path);
    *out = new lv_model{std::move(ck.model)};
  });
}

void lv_model_destroy(lv_model* model) { delete model; }

size_t lv_model_num_parameters(const lv_model* model) {
  return model ? model->model.params().num_scalars() : 0;
}

size_t lv_model_input_dim(const lv_model* model) {
  return model ? model->model.config().hfc.input_dim : 0;
}

lv_status lv_model_score_file(const lv_model* model, const char* feature_path, size_t num_frames,
                              const char* frame_labels_path, const char* csv_path,
                              double* frame_scores, size_t capacity, size_t* num_frames_out) {
  LV_REQUIRE(model && feature_path, "lv_model_score_file: null argument");
  return guarded([&] {
    lightvad::Video video;
    video.bag = lightvad::load_bag(feature_path, frame_labels_path ? 1 : 0, num_frames);
    if (video.bag.num_frames < video.bag.clips()) {
      throw lightvad::ConfigError("num_frames " + std::to_string(num_frames) +
                                  " is smaller than the clip count " +
                                  std::to_string(video.bag.clips()));
    }
    if (frame_labels_path) {
      video.frame_labels = lightvad::read_frame_labels(frame_labels_path, video.bag.num_frames);
    }
    auto record = lightvad::score_video(model->model, video);
    if (csv_path) lightvad::write_score_csv(csv_path, record);
    if (frame_scores) {
      const std::size_t n = std::min(capacity, record.frame_scores.size());
      std::copy_n(record.frame_scores.begin(), n, frame_scores);
    }
    if (num_frames_out) *num_frames_out = record.frame_scores.size();
  });
}

lv_status lv_evaluate(const lv_model* model, const lv_config* cfg, const char* manifest,
                      const char* scores_dir, lv_eval_result** out) {
  LV_REQUIRE(model && cfg && manifest && out, "lv_evaluate: null argument");
  return guarded([&] {
    auto videos = lightvad::load_videos(lightvad::read_manifest(manifest), cfg->cfg.clips);
    auto records = lightvad::score_videos(model->model, videos);
    auto result = std::make_unique<lv_eval_result>();
    result->auc = lightvad::pooled_auc(records, cfg->cfg.experiment.pooling);
    for (const auto& r : records) result->frames += r.frame_scores.size();
    result->per_class = lightvad::per_class_auc(records);
    if (scores_dir) {
      const std::filesystem::path dir(scores_dir);
      for (const auto& r : records) lightvad::write_score_csv(dir / (r.video_id + ".csv"), r);
    }
    *out = result.release();
  });
}

void lv_eval_destroy(lv_eval_result* result) { delete result; }

lv_status lv_auc(const double* scores, const uint8_t* labels, size_t n, double* out) {
  LV_REQUIRE(out, "lv_auc: null output");
  LV_REQUIRE(n == 0 || (scores && labels), "lv_auc: null input arrays");
  return guarded([&] {
    *out = lightvad::auc(std::span<const double>(scores, n), std::span<const std::uint8_t>(labels, n));
  });
}

double lv_eval_auc(const lv_eval_result* result) {
  return result ? result->auc : std::numeric_limits<double>::quiet_NaN();
}

size_t lv_eval_frame_count(const lv_eval_result* result) { return result ? result->frames : 0; }

size_t lv_eval_class_count(const lv_eval_result* result) {
  return result ? result->per_class.classes.size() : 0;
}

lv_status lv_eval_class(const lv_eval_result* result, size_t index, const char** name, double* auc,
                        size_t* anomalous_videos) {
  LV_REQUIRE(result, "lv_eval_class: null result");
  LV_REQUIRE(index < result->per_class.classes.size(), "lv_eval_class: index out of range");
  const auto& c = result->per_class.classes[index];
  if (name) *name = c.class_name.c_str();
  if (auc) *auc = c.auc;
  if (anomalous_videos) *anomalous_videos = c.anomalous_videos;
  return LV_OK;
}

size_t lv_eval_warning_count(const lv_eval_result* result) {
  return result ? result->per_class.warnings.size() : 0;
}

const char* lv_eval_warning(const lv_eval_result* result, size_t index) {
  if (!result || index >= result->per_class.warnings.size()) return nullptr;
  return result->per_class.warnings[index].c_str();
}

lv_status lv_param_report_compute(const lv_config* cfg, lv_param_report* out) {
  LV_REQUIRE(cfg && out, "lv_param_report_compute: null argument");
  return guarded([&] {
    auto model_cfg = cfg->cfg.experiment.model;
    model_cfg.validate();
    out->total = lightvad::count_parameters(model_cfg);
    auto no_attention = model_cfg;
    no_attention.mta.enabled = false;
    out->head = lightvad::count_parameters(no_attention);
    out->attention = out->total - out->head;
    out->registered = lightvad::Model(model_cfg, 0).params().num_scalars();
    auto variant = model_cfg;
    variant.hfc.shape = lightvad::HeadShape::Hourglass;
    out->hourglass = lightvad::count_parameters(variant);
    variant.hfc.shape = lightvad::HeadShape::Conventional;
    out->conventional = lightvad::count_parameters(variant);
    out->ratio = static_cast<double>(out->hourglass) / static_cast<double>(out->conventional);
  });
}

lv_status lv_grad_check(const lv_config* cfg, size_t clips, size_t dims, uint64_t seed, double eps,
                        double tol, lv_grad_report* out) {
  LV_REQUIRE(cfg && out, "lv_grad_check: null argument");
  LV_REQUIRE(clips >= 2 && dims >= 1, "lv_grad_check: need clips >= 2 and dims >= 1");
  LV_REQUIRE(eps > 0 && tol > 0, "lv_grad_check: eps and tol must be positive");
  return guarded([&] {
    auto report = lightvad::check_model_gradients(cfg->cfg.experiment.model, clips, dims, seed, eps, tol);
    out->max_rel_error = report.max_rel_error;
    out->entries_checked = report.entries_checked;
    out->kinks = report.kinks;
    out->passed = report.passed ? 1 : 0;
    out->worst_index = report.worst_index;
    std::memset(out->worst_parameter, 0, sizeof(out->worst_parameter));
    std::strncpy(out->worst_parameter, report.worst_parameter.c_str(), sizeof(out->worst_parameter) - 1);
  });
}

}  // extern "C"
