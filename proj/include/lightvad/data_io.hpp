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
#include <string>
#include <vector>

#include "lightvad/tensor.hpp"

namespace lightvad {

namespace fs = std::filesystem;

inline constexpr std::size_t kDefaultClips = 32;

/// One video as a multiple-instance bag: T clip features plus the
/// video-level weak label.
struct ClipFeatureBag {
  Tensor features;  // [T x D]
  int label = 0;
  std::string video_id;
  std::size_t num_frames = 0;

  std::size_t clips() const { return features.dim(0); }
  std::size_t dims() const { return features.dim(1); }
};

struct ManifestEntry {
  fs::path feature_path;
  int label = 0;
  std::size_t num_frames = 0;
  std::optional<fs::path> frame_label_path;
  std::optional<std::string> class_name;
};

struct Manifest {
  std::vector<ManifestEntry> entries;
};

/// A manifest entry with everything resolved in memory. Videos without a
/// frame-label file are labelled all-normal.
struct Video {
  ClipFeatureBag bag;
  std::vector<std::uint8_t> frame_labels;
  std::string class_name;
};

// LWVF binary: "LWVF" | u16 version=1 | u32 T | u32 D | T*D f32 LE row-major.
void save_bag_lwvf(const fs::path& path, const Tensor& features);
void save_bag_csv(const fs::path& path, const Tensor& features);

/// Reads features from an LWVF or CSV file; the format is detected from the
/// leading magic bytes.
Tensor load_features(const fs::path& path);
ClipFeatureBag load_bag(const fs::path& path, int label = 0, std::size_t num_frames = 0);

/// Relative paths in the CSV resolve against the manifest's directory.
Manifest read_manifest(const fs::path& path);
void write_manifest(const fs::path& path, const Manifest& manifest);

std::vector<std::uint8_t> read_frame_labels(const fs::path& path, std::size_t num_frames);
void write_frame_labels(const fs::path& path, const std::vector<std::uint8_t>& labels);

/// Loads every entry in manifest order and checks each bag has `clips`
/// instances (0 accepts any T).
std::vector<Video> load_videos(const Manifest& manifest, std::size_t clips = kDefaultClips);

/// Clip i covers frames [floor(i*N/T), floor((i+1)*N/T)).
std::pair<std::size_t, std::size_t> clip_frame_range(std::size_t clip, std::size_t clips,
                                                     std::size_t num_frames);

/// Broadcasts one value per clip to every frame the clip covers.
std::vector<double> expand_clip_scores(const std::vector<double>& clip_scores,
                                       std::size_t num_frames);

std::vector<std::uint8_t> expand_clip_labels(const std::vector<std::uint8_t>& clip_flags,
                                             std::size_t num_frames);

struct AnomalyClass {
  std::string name;
  double separation = 4.0;
};

struct SyntheticSpec {
  std::size_t n_normal = 100;
  std::size_t n_abnormal = 100;
  std::size_t n_test_normal = 30;
  std::size_t n_test_abnormal = 30;
  std::size_t clips = kDefaultClips;
  std::size_t dims = 64;
  std::size_t span_min = 4;
  std::size_t span_max = 12;
  /// Prototype shift in units of noise_sigma; used when `classes` is empty.
  double separation = 4.0;
  double noise_sigma = 1.0;
  std::size_t frames_min = 64;
  std::size_t frames_max = 256;
  std::uint64_t seed = 7;
  std::vector<AnomalyClass> classes;

  void validate() const;
  std::vector<AnomalyClass> effective_classes() const;
};

/// Where an anomaly was planted in one synthetic video.
struct PlantedAnomaly {
  std::string video_id;
  std::string split;
  std::string class_name;
  std::size_t start = 0;
  std::size_t length = 0;
};

struct SyntheticDataset {
  fs::path train_manifest;
  fs::path test_manifest;
  fs::path truth_file;
  std::vector<PlantedAnomaly> planted;
  std::vector<std::string> warnings;

  double mean_planted_length(const std::string& split) const;
};

/// Writes features/, labels/, train.csv, test.csv and truth.csv under
/// `out_dir`. A pure function of `spec`.
SyntheticDataset make_synthetic(const SyntheticSpec& spec, const fs::path& out_dir);

/// Builds the in-memory bags without touching disk; same draws as
/// make_synthetic.
struct SyntheticVideo {
  Video video;
  std::string split;
  std::size_t start = 0;
  std::size_t length = 0;
};
std::vector<SyntheticVideo> generate_synthetic(const SyntheticSpec& spec);

}  // namespace lightvad
