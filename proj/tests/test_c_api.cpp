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

#include <cmath>
#include <fstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "lightvad/lightvad.h"
#include "test_support.hpp"

namespace {

struct ConfigHandle {
  lv_config* cfg = nullptr;
  ConfigHandle() { REQUIRE(lv_config_create(&cfg) == LV_OK); }
  ~ConfigHandle() { lv_config_destroy(cfg); }
  void set(const char* key, const char* value) { REQUIRE(lv_config_set(cfg, key, value) == LV_OK); }
};

}  // namespace

TEST_CASE("status names and the last error message") {
  CHECK(std::string(lv_status_name(LV_OK)) == "ok");
  CHECK(std::string(lv_version()).size() > 0);
  ConfigHandle c;
  CHECK(lv_config_set(c.cfg, "no.such.key", "1") == LV_ERR_CONFIG);
  CHECK(std::string(lv_last_error()).find("no.such.key") != std::string::npos);
  CHECK(lv_config_set(nullptr, "seed", "1") == LV_ERR_INVALID_ARGUMENT);
  CHECK(lv_config_create(nullptr) == LV_ERR_INVALID_ARGUMENT);
}

TEST_CASE("config get reports the needed length and truncates") {
  ConfigHandle c;
  c.set("eval.pooling", "per_video");
  size_t needed = 0;
  CHECK(lv_config_get(c.cfg, "eval.pooling", nullptr, 0, &needed) == LV_OK);
  CHECK(needed == std::string("per_video").size() + 1);
  char small[4];
  CHECK(lv_config_get(c.cfg, "eval.pooling", small, sizeof small, nullptr) == LV_OK);
  CHECK(std::string(small) == "per");
  std::vector<char> buf(needed);
  CHECK(lv_config_get(c.cfg, "eval.pooling", buf.data(), buf.size(), nullptr) == LV_OK);
  CHECK(std::string(buf.data()) == "per_video");
}

TEST_CASE("parameter report on defaults") {
  ConfigHandle c;
  lv_param_report r{};
  REQUIRE(lv_param_report_compute(c.cfg, &r) == LV_OK);
  CHECK(r.total == 139595);
  CHECK(r.registered == r.total);
  CHECK(r.attention + r.head == r.total);
  CHECK(r.conventional == 270603);
  CHECK(std::abs(r.ratio - 0.516) < 0.001);
}

TEST_CASE("grad check through the C interface") {
  ConfigHandle c;
  c.set("hfc.dropout", "0");
  lv_grad_report r{};
  REQUIRE(lv_grad_check(c.cfg, 8, 16, 1, 1e-5, 1e-4, &r) == LV_OK);
  CHECK(r.passed == 1);
  CHECK(r.entries_checked > 0);
  CHECK(r.max_rel_error < 1e-4);
}

TEST_CASE("generate, train, load and evaluate") {
  testing::TempDir dir("capi");
  ConfigHandle c;
  c.set("synth.n_normal", "6");
  c.set("synth.n_abnormal", "6");
  c.set("synth.n_test_normal", "3");
  c.set("synth.n_test_abnormal", "3");
  c.set("synth.dims", "8");
  c.set("train.batch_pairs", "3");
  c.set("train.epochs", "2");

  lv_synth_summary synth{};
  REQUIRE(lv_gen_synth(c.cfg, dir.path().c_str(), &synth) == LV_OK);
  CHECK(synth.train_videos == 12);
  CHECK(synth.test_videos == 6);
  CHECK(synth.non_separable == 0);

  c.set("data.train_manifest", (dir / "train.csv").c_str());
  c.set("data.test_manifest", (dir / "test.csv").c_str());
  c.set("out_dir", (dir / "run").c_str());
  lv_train_summary train{};
  REQUIRE(lv_train(c.cfg, &train) == LV_OK);
  CHECK(train.epochs == 2);
  CHECK(train.steps == 4);
  CHECK(std::isfinite(train.final_auc));

  lv_model* model = nullptr;
  REQUIRE(lv_model_load((dir / "run" / "model.lwck").c_str(), &model) == LV_OK);
  CHECK(lv_model_input_dim(model) == 8);
  lv_eval_result* result = nullptr;
  REQUIRE(lv_evaluate(model, c.cfg, (dir / "test.csv").c_str(), nullptr, &result) == LV_OK);
  CHECK(lv_eval_auc(result) == train.final_auc);
  CHECK(lv_eval_frame_count(result) > 0);
  CHECK(lv_eval_class_count(result) >= 1);
  const char* name = nullptr;
  double auc = 0.0;
  size_t videos = 0;
  CHECK(lv_eval_class(result, 0, &name, &auc, &videos) == LV_OK);
  CHECK(videos == 3);
  CHECK(lv_eval_class(result, 99, &name, &auc, &videos) == LV_ERR_INVALID_ARGUMENT);
  lv_eval_destroy(result);

  {
    std::ofstream out(dir / "normal_only.csv");
    out << "feature_path,label,num_frames,frame_labels,class\n"
        << "features/test_normal_0000.lwvf,0,64,,\n";
  }
  result = nullptr;
  CHECK(lv_evaluate(model, c.cfg, (dir / "normal_only.csv").c_str(), nullptr, &result) ==
        LV_ERR_UNDEFINED_METRIC);
  CHECK(result == nullptr);
  lv_model_destroy(model);

  CHECK(lv_model_load((dir / "missing.lwck").c_str(), &model) == LV_ERR_IO);
  CHECK(std::string(lv_last_error()).find("missing.lwck") != std::string::npos);
}
