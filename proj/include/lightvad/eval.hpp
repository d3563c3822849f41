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
#include <span>
#include <string>
#include <vector>

#include "lightvad/data_io.hpp"
#include "lightvad/model.hpp"

namespace lightvad {

struct EvalRecord {
  std::string video_id;
  int video_label = 0;
  std::string class_name;
  std::vector<double> frame_scores;
  std::vector<std::uint8_t> frame_labels;
};

/// Frame-level ROC AUC from a threshold sweep over the distinct scores with
/// trapezoidal integration. Throws UndefinedMetricError unless both classes
/// are present.
double auc(std::span<const double> scores, std::span<const std::uint8_t> labels);

enum class Pooling {
  Global,    // concatenate every test frame into one ROC
  PerVideo,  // mean of per-video AUCs over videos containing both classes
};

std::string to_string(Pooling p);
Pooling parse_pooling(const std::string& s);

/// Inference-mode clip scores broadcast onto the video's frames.
EvalRecord score_video(const Model& model, const Video& video);
std::vector<EvalRecord> score_videos(const Model& model, const std::vector<Video>& videos);

double pooled_auc(const std::vector<EvalRecord>& records, Pooling pooling = Pooling::Global);

struct ClassAuc {
  std::string class_name;
  double auc = 0.0;
  std::size_t anomalous_videos = 0;
};

struct PerClassReport {
  std::vector<ClassAuc> classes;  // in order of first appearance
  std::vector<std::string> warnings;
};

/// For each anomalous class: AUC over that class's anomalous videos pooled
/// with every normal video.
PerClassReport per_class_auc(const std::vector<EvalRecord>& records);

/// `frame_index,score,label` per frame.
void write_score_csv(const std::filesystem::path& path, const EvalRecord& record);

}  // namespace lightvad
