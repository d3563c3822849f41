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

#include "lightvad/eval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "lightvad/errors.hpp"

namespace lightvad {

double auc(std::span<const double> scores, std::span<const std::uint8_t> labels) {
  if (scores.size() != labels.size()) {
    throw DimensionError("auc: " + std::to_string(scores.size()) + " scores but " +
                         std::to_string(labels.size()) + " labels");
  }
  if (!std::all_of(scores.begin(), scores.end(), [](double s) { return std::isfinite(s); })) {
    throw NumericError("auc: non-finite score");
  }
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

  const auto positives = static_cast<std::uint64_t>(std::count_if(
      labels.begin(), labels.end(), [](std::uint8_t l) { return l != 0; }));
  const std::uint64_t negatives = labels.size() - positives;
  if (positives == 0 || negatives == 0) {
    throw UndefinedMetricError("auc: undefined with only one class present (" +
                               std::to_string(positives) + " positive, " +
                               std::to_string(negatives) + " negative frames)");
  }

  // Lower the threshold one distinct score at a time. Twice the trapezoid
  // area stays integral: sum of dFP * (TP_prev + TP_next).
  std::uint64_t tp = 0, fp = 0;
  unsigned __int128 twice_area = 0;
  for (std::size_t i = 0; i < order.size();) {
    std::uint64_t dtp = 0, dfp = 0;
    const double s = scores[order[i]];
    for (; i < order.size() && scores[order[i]] == s; ++i) {
      if (labels[order[i]]) ++dtp;
      else ++dfp;
    }
    twice_area += static_cast<unsigned __int128>(dfp) * (2 * tp + dtp);
    tp += dtp;
    fp += dfp;
  }
  return static_cast<double>(static_cast<long double>(twice_area) /
                             (2.0L * static_cast<long double>(positives) *
                              static_cast<long double>(negatives)));
}

std::string to_string(Pooling p) { return p == Pooling::Global ? "global" : "per_video"; }

Pooling parse_pooling(const std::string& s) {
  if (s == "global") return Pooling::Global;
  if (s == "per_video") return Pooling::PerVideo;
  throw ConfigError("unknown pooling '" + s + "' (expected global or per_video)");
}

EvalRecord score_video(const Model& model, const Video& video) {
  const auto& bag = video.bag;
  if (bag.dims() != model.config().hfc.input_dim) {
    throw DimensionError("score_video: " + bag.video_id + " has feature dimension " +
                         std::to_string(bag.dims()) + " but the model expects " +
                         std::to_string(model.config().hfc.input_dim));
  }
  EvalRecord r;
  r.video_id = bag.video_id;
  r.video_label = bag.label;
  r.class_name = video.class_name;
  r.frame_scores = expand_clip_scores(model.score(bag.features), bag.num_frames);
  r.frame_labels = video.frame_labels.empty() ? std::vector<std::uint8_t>(bag.num_frames, 0)
                                              : video.frame_labels;
  if (r.frame_labels.size() != r.frame_scores.size()) {
    throw DimensionError("score_video: " + bag.video_id + " has " +
                         std::to_string(r.frame_labels.size()) + " frame labels for " +
                         std::to_string(r.frame_scores.size()) + " frames");
  }
  return r;
}

std::vector<EvalRecord> score_videos(const Model& model, const std::vector<Video>& videos) {
  std::vector<EvalRecord> out;
  out.reserve(videos.size());
  for (const auto& v : videos) out.push_back(score_video(model, v));
  return out;
}

namespace {

double pooled_over(const std::vector<const EvalRecord*>& records) {
  std::vector<double> scores;
  std::vector<std::uint8_t> labels;
  for (const auto* r : records) {
    scores.insert(scores.end(), r->frame_scores.begin(), r->frame_scores.end());
    labels.insert(labels.end(), r->frame_labels.begin(), r->frame_labels.end());
  }
  return auc(scores, labels);
}

bool has_both_classes(const EvalRecord& r) {
  const bool any_pos = std::any_of(r.frame_labels.begin(), r.frame_labels.end(), [](auto l) { return l != 0; });
  const bool any_neg = std::any_of(r.frame_labels.begin(), r.frame_labels.end(), [](auto l) { return l == 0; });
  return any_pos && any_neg;
}

}  // namespace

double pooled_auc(const std::vector<EvalRecord>& records, Pooling pooling) {
  if (pooling == Pooling::Global) {
    std::vector<const EvalRecord*> all;
    for (const auto& r : records) all.push_back(&r);
    return pooled_over(all);
  }
  double total = 0.0;
  std::size_t n = 0;
  for (const auto& r : records) {
    if (!has_both_classes(r)) continue;
    total += auc(r.frame_scores, r.frame_labels);
    ++n;
  }
  if (n == 0) throw UndefinedMetricError("per-video AUC: no video contains both normal and anomalous frames");
  return total / static_cast<double>(n);
}

PerClassReport per_class_auc(const std::vector<EvalRecord>& records) {
  PerClassReport report;
  std::vector<const EvalRecord*> normals;
  std::vector<std::string> names;
  for (const auto& r : records) {
    if (r.video_label == 0) {
      normals.push_back(&r);
    } else if (!r.class_name.empty() &&
               std::find(names.begin(), names.end(), r.class_name) == names.end()) {
      names.push_back(r.class_name);
    }
  }
  for (const auto& name : names) {
    std::vector<const EvalRecord*> pool = normals;
    std::size_t videos = 0;
    bool any_anomalous = false;
    for (const auto& r : records) {
      if (r.video_label != 1 || r.class_name != name) continue;
      pool.push_back(&r);
      ++videos;
      any_anomalous = any_anomalous || std::any_of(r.frame_labels.begin(), r.frame_labels.end(),
                                                   [](auto l) { return l != 0; });
    }
    if (!any_anomalous) {
      report.warnings.push_back("class '" + name + "' has no anomalous frames; skipped");
      continue;
    }
    try {
      report.classes.push_back({name, pooled_over(pool), videos});
    } catch (const UndefinedMetricError&) {
      report.warnings.push_back("class '" + name + "' has no normal frames to compare against; skipped");
    }
  }
  return report;
}

void write_score_csv(const std::filesystem::path& path, const EvalRecord& record) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out.precision(17);
  out << "frame_index,score,label\n";
  for (std::size_t i = 0; i < record.frame_scores.size(); ++i) {
    out << i << ',' << record.frame_scores[i] << ',' << int(record.frame_labels[i]) << '\n';
  }
  if (!out) throw IoError("write failed: " + path.string());
}

}  // namespace lightvad
