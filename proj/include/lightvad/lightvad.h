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

#ifndef LIGHTVAD_H
#define LIGHTVAD_H

/* C interface to the lightvad library.
 *
 * All objects are opaque handles created and destroyed through this API.
 * Every fallible call returns an lv_status; on failure a human-readable
 * message is available from lv_last_error() on the same thread until the
 * next failing call. Handles are not thread-safe; a loaded lv_model may be
 * shared by several threads for scoring only. */

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define LV_API __declspec(dllexport)
#else
#define LV_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum lv_status {
  LV_OK = 0,
  LV_ERR_INVALID_ARGUMENT = 1,
  LV_ERR_CONFIG = 2,
  LV_ERR_DIMENSION = 3,
  LV_ERR_FORMAT = 4,
  LV_ERR_IO = 5,
  LV_ERR_NUMERIC = 6,
  LV_ERR_UNDEFINED_METRIC = 7,
  LV_ERR_INTERNAL = 8
} lv_status;

typedef struct lv_config lv_config;
typedef struct lv_model lv_model;
typedef struct lv_eval_result lv_eval_result;

LV_API const char* lv_version(void);
LV_API const char* lv_last_error(void);
LV_API const char* lv_status_name(lv_status status);

/* ---- configuration ---------------------------------------------------- */

LV_API lv_status lv_config_create(lv_config** out);
LV_API void lv_config_destroy(lv_config* cfg);
LV_API lv_status lv_config_set(lv_config* cfg, const char* key, const char* value);
LV_API lv_status lv_config_apply_file(lv_config* cfg, const char* path);
/* Copies the value into buf (NUL-terminated, truncated to buf_len). *needed,
 * when non-null, receives the full length including the terminator. */
LV_API lv_status lv_config_get(const lv_config* cfg, const char* key, char* buf, size_t buf_len,
                               size_t* needed);
/* Writes every key as sorted `key=value` lines. */
LV_API lv_status lv_config_dump(const lv_config* cfg, char* buf, size_t buf_len, size_t* needed);
LV_API lv_status lv_config_write(const lv_config* cfg, const char* path);

/* ---- synthetic data ----------------------------------------------------- */

typedef struct lv_synth_summary {
  size_t train_videos;
  size_t test_videos;
  double mean_planted_train; /* mean anomalous run length, in clips */
  double mean_planted_test;
  int non_separable;         /* some class has separation 0 */
} lv_synth_summary;

/* Writes train.csv, test.csv, truth.csv, features/, labels/ and the
 * effective config.txt under out_dir. */
LV_API lv_status lv_gen_synth(const lv_config* cfg, const char* out_dir, lv_synth_summary* out);

/* ---- training ----------------------------------------------------------- */

typedef struct lv_train_summary {
  uint64_t epochs;
  uint64_t steps;
  double final_auc; /* NaN when no evaluation ran */
  double best_auc;
  double final_total_loss;
  double final_omega;
  double final_k;
} lv_train_summary;

/* Trains with data.train_manifest / data.test_manifest, writing model.lwck,
 * best.lwck, train_log.csv and config.txt into out_dir. */
LV_API lv_status lv_train(const lv_config* cfg, lv_train_summary* out);

/* ---- models ------------------------------------------------------------- */

LV_API lv_status lv_model_load(const char* checkpoint_path, lv_model** out);
LV_API void lv_model_destroy(lv_model* model);
LV_API size_t lv_model_num_parameters(const lv_model* model);
LV_API size_t lv_model_input_dim(const lv_model* model);

/* Scores one feature file. Frame scores go to frame_scores (up to capacity
 * entries); *num_frames_out receives num_frames. When csv_path is non-null a
 * `frame_index,score,label` file is written, using frame_labels_path (may be
 * null for all-normal). */
LV_API lv_status lv_model_score_file(const lv_model* model, const char* feature_path,
                                     size_t num_frames, const char* frame_labels_path,
                                     const char* csv_path, double* frame_scores,
                                     size_t capacity, size_t* num_frames_out);

/* ---- evaluation --------------------------------------------------------- */

/* Scores every manifest entry; cfg supplies clips and eval.pooling. When
 * scores_dir is non-null one CSV per video is written there. */
LV_API lv_status lv_evaluate(const lv_model* model, const lv_config* cfg, const char* manifest,
                             const char* scores_dir, lv_eval_result** out);
LV_API void lv_eval_destroy(lv_eval_result* result);
/* Frame-level ROC AUC of n scores against 0/1 labels (threshold sweep,
 * trapezoidal). Fails with LV_ERR_UNDEFINED_METRIC unless both labels occur. */
LV_API lv_status lv_auc(const double* scores, const uint8_t* labels, size_t n, double* out);
LV_API double lv_eval_auc(const lv_eval_result* result);
LV_API size_t lv_eval_frame_count(const lv_eval_result* result);
LV_API size_t lv_eval_class_count(const lv_eval_result* result);
LV_API lv_status lv_eval_class(const lv_eval_result* result, size_t index, const char** name,
                               double* auc, size_t* anomalous_videos);
LV_API size_t lv_eval_warning_count(const lv_eval_result* result);
LV_API const char* lv_eval_warning(const lv_eval_result* result, size_t index);

/* ---- audits ------------------------------------------------------------- */

typedef struct lv_param_report {
  size_t total;        /* closed-form count for the configured head shape */
  size_t attention;    /* attention kernels and biases */
  size_t head;         /* scoring head */
  size_t registered;   /* entries actually allocated by a live model */
  size_t hourglass;    /* same config with an hourglass head */
  size_t conventional; /* same config with a conventional head */
  double ratio;        /* hourglass / conventional */
} lv_param_report;

LV_API lv_status lv_param_report_compute(const lv_config* cfg, lv_param_report* out);

typedef struct lv_grad_report {
  double max_rel_error;
  size_t entries_checked;
  size_t kinks; /* entries compared one-sided across a kink */
  int passed;
  char worst_parameter[64];
  size_t worst_index;
} lv_grad_report;

/* Central-difference check of the full scoring graph and losses for a
 * random clips x dims pair, using the config's model settings. */
LV_API lv_status lv_grad_check(const lv_config* cfg, size_t clips, size_t dims, uint64_t seed,
                               double eps, double tol, lv_grad_report* out);

#ifdef __cplusplus
}
#endif

#endif /* LIGHTVAD_H */
