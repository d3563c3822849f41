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

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "lightvad/data_io.hpp"
#include "lightvad/trainer.hpp"

namespace lightvad {

/// Every knob of a run, addressable as flat `key=value` pairs.
///
/// File syntax: one `key = value` per line; `#` starts a comment. Unknown
/// keys are rejected. `seed` drives both data generation and training.
struct RunConfig {
  ExperimentConfig experiment;
  SyntheticSpec synth;
  std::size_t clips = kDefaultClips;
  std::string train_manifest;
  std::string test_manifest;
  std::string out_dir = "run";
  std::string resume_from;

  void set(const std::string& key, const std::string& value);
  std::string get(const std::string& key) const;
  static const std::vector<std::string>& keys();

  void apply_file(const std::filesystem::path& path);
  /// Parses `key=value`.
  void apply_assignment(const std::string& assignment);

  std::map<std::string, std::string> to_kv() const;
  std::string dump() const;
  void write(const std::filesystem::path& path) const;

  /// Cross-field checks; called before a command runs.
  void validate() const;
};

}  // namespace lightvad
