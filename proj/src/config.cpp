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

#include "lightvad/config.hpp"

#include <algorithm>
#include <fstream>
#include <functional>
#include <sstream>

#include "lightvad/errors.hpp"

namespace lightvad {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::string fmt(double v) {
  std::ostringstream ss;
  ss.precision(17);
  ss << v;
  return ss.str();
}

double parse_double(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const double d = std::stod(v, &pos);
    if (pos == v.size()) return d;
  } catch (const std::exception&) {
  }
  throw ConfigError("'" + key + "' expects a number, got '" + v + "'");
}

std::size_t parse_size(const std::string& key, const std::string& v) {
  if (!v.empty() && v[0] != '-') {
    try {
      std::size_t pos = 0;
      const auto n = std::stoull(v, &pos);
      if (pos == v.size()) return static_cast<std::size_t>(n);
    } catch (const std::exception&) {
    }
  }
  throw ConfigError("'" + key + "' expects a non-negative integer, got '" + v + "'");
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "1" || v == "true" || v == "on" || v == "yes") return true;
  if (v == "0" || v == "false" || v == "off" || v == "no") return false;
  throw ConfigError("'" + key + "' expects a boolean (0/1), got '" + v + "'");
}

std::vector<AnomalyClass> parse_classes(const std::string& key, const std::string& v) {
  std::vector<AnomalyClass> out;
  if (v.empty()) return out;
  std::istringstream ss(v);
  for (std::string item; std::getline(ss, item, ';');) {
    item = trim(item);
    const auto colon = item.find(':');
    if (colon == std::string::npos || colon == 0) {
      throw ConfigError("'" + key + "' expects name:separation entries separated by ';', got '" + v + "'");
    }
    out.push_back({item.substr(0, colon), parse_double(key, item.substr(colon + 1))});
  }
  return out;
}

std::string format_classes(const std::vector<AnomalyClass>& classes) {
  std::string s;
  for (const auto& c : classes) {
    if (!s.empty()) s += ";";
    s += c.name + ":" + fmt(c.separation);
  }
  return s;
}

struct Field {
  std::function<std::string(const RunConfig&)> get;
  std::function<void(RunConfig&, const std::string& key, const std::string&)> set;
};

template <typename M>
Field size_field(M member) {
  return {[member](const RunConfig& c) { return std::to_string(member(const_cast<RunConfig&>(c))); },
          [member](RunConfig& c, const std::string& k, const std::string& v) { member(c) = parse_size(k, v); }};
}

template <typename M>
Field double_field(M member) {
  return {[member](const RunConfig& c) { return fmt(member(const_cast<RunConfig&>(c))); },
          [member](RunConfig& c, const std::string& k, const std::string& v) { member(c) = parse_double(k, v); }};
}

template <typename M>
Field bool_field(M member) {
  return {[member](const RunConfig& c) { return std::string(member(const_cast<RunConfig&>(c)) ? "1" : "0"); },
          [member](RunConfig& c, const std::string& k, const std::string& v) { member(c) = parse_bool(k, v); }};
}

template <typename M>
Field string_field(M member) {
  return {[member](const RunConfig& c) { return member(const_cast<RunConfig&>(c)); },
          [member](RunConfig& c, const std::string&, const std::string& v) { member(c) = v; }};
}

#define REF(expr) [](RunConfig& c) -> auto& { return c.expr; }

const std::map<std::string, Field>& fields() {
  static const std::map<std::string, Field> table = {
      {"seed",
       {[](const RunConfig& c) { return std::to_string(c.experiment.train.seed); },
        [](RunConfig& c, const std::string& k, const std::string& v) {
          c.experiment.train.seed = parse_size(k, v);
          c.synth.seed = c.experiment.train.seed;
        }}},
      {"clips",
       {[](const RunConfig& c) { return std::to_string(c.clips); },
        [](RunConfig& c, const std::string& k, const std::string& v) {
          c.clips = parse_size(k, v);
          c.synth.clips = c.clips;
        }}},

      {"mta.enabled", bool_field(REF(experiment.model.mta.enabled))},
      {"mta.k_max", size_field(REF(experiment.model.mta.k_max))},
      {"mta.lambda1", double_field(REF(experiment.model.mta.lambda1))},
      {"mta.slope", double_field(REF(experiment.model.mta.slope))},
      {"mta.mode",
       {[](const RunConfig& c) { return to_string(c.experiment.model.mta.mode); },
        [](RunConfig& c, const std::string&, const std::string& v) {
          c.experiment.model.mta.mode = parse_mta_mode(v);
        }}},

      {"hfc.input_dim", size_field(REF(experiment.model.hfc.input_dim))},
      {"hfc.narrow", size_field(REF(experiment.model.hfc.narrow))},
      {"hfc.wide", size_field(REF(experiment.model.hfc.wide))},
      {"hfc.dropout", double_field(REF(experiment.model.hfc.dropout))},
      {"hfc.slope", double_field(REF(experiment.model.hfc.slope))},
      {"hfc.shape",
       {[](const RunConfig& c) { return to_string(c.experiment.model.hfc.shape); },
        [](RunConfig& c, const std::string&, const std::string& v) {
          c.experiment.model.hfc.shape = parse_head_shape(v);
        }}},

      {"ais.enabled", bool_field(REF(experiment.selection.adaptive))},
      {"ais.threshold", double_field(REF(experiment.selection.threshold))},
      {"ais.magnitude",
       {[](const RunConfig& c) {
          return std::string(c.experiment.selection.raw_magnitude ? "raw" : "attention");
        },
        [](RunConfig& c, const std::string& k, const std::string& v) {
          if (v != "raw" && v != "attention") {
            throw ConfigError("'" + k + "' expects attention or raw, got '" + v + "'");
          }
          c.experiment.selection.raw_magnitude = v == "raw";
        }}},

      {"loss.extra",
       {[](const RunConfig& c) { return to_string(c.experiment.loss.extra); },
        [](RunConfig& c, const std::string&, const std::string& v) {
          c.experiment.loss.extra = parse_extra_loss(v);
        }}},
      {"loss.smooth_on_both", bool_field(REF(experiment.loss.smooth_on_both))},
      {"loss.eps", double_field(REF(experiment.loss.eps))},

      {"train.lr", double_field(REF(experiment.train.lr))},
      {"train.weight_decay", double_field(REF(experiment.train.weight_decay))},
      {"train.batch_pairs", size_field(REF(experiment.train.batch_pairs))},
      {"train.epochs", size_field(REF(experiment.train.epochs))},
      {"train.adam_beta1", double_field(REF(experiment.train.adam_beta1))},
      {"train.adam_beta2", double_field(REF(experiment.train.adam_beta2))},
      {"train.adam_eps", double_field(REF(experiment.train.adam_eps))},
      {"train.eval_every", size_field(REF(experiment.train.eval_every))},

      {"eval.pooling",
       {[](const RunConfig& c) { return to_string(c.experiment.pooling); },
        [](RunConfig& c, const std::string&, const std::string& v) {
          c.experiment.pooling = parse_pooling(v);
        }}},

      {"synth.n_normal", size_field(REF(synth.n_normal))},
      {"synth.n_abnormal", size_field(REF(synth.n_abnormal))},
      {"synth.n_test_normal", size_field(REF(synth.n_test_normal))},
      {"synth.n_test_abnormal", size_field(REF(synth.n_test_abnormal))},
      {"synth.dims", size_field(REF(synth.dims))},
      {"synth.span_min", size_field(REF(synth.span_min))},
      {"synth.span_max", size_field(REF(synth.span_max))},
      {"synth.separation", double_field(REF(synth.separation))},
      {"synth.noise_sigma", double_field(REF(synth.noise_sigma))},
      {"synth.frames_min", size_field(REF(synth.frames_min))},
      {"synth.frames_max", size_field(REF(synth.frames_max))},
      {"synth.classes",
       {[](const RunConfig& c) { return format_classes(c.synth.classes); },
        [](RunConfig& c, const std::string& k, const std::string& v) {
          c.synth.classes = parse_classes(k, v);
        }}},

      {"data.train_manifest", string_field(REF(train_manifest))},
      {"data.test_manifest", string_field(REF(test_manifest))},
      {"out_dir", string_field(REF(out_dir))},
      {"resume_from", string_field(REF(resume_from))},
  };
  return table;
}

#undef REF

const Field& field(const std::string& key) {
  const auto& table = fields();
  auto it = table.find(key);
  if (it == table.end()) throw ConfigError("unknown config key '" + key + "'");
  return it->second;
}

}  // namespace

void RunConfig::set(const std::string& key, const std::string& value) {
  field(key).set(*this, key, trim(value));
}

std::string RunConfig::get(const std::string& key) const { return field(key).get(*this); }

const std::vector<std::string>& RunConfig::keys() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> out;
    for (const auto& [k, _] : fields()) out.push_back(k);
    return out;
  }();
  return names;
}

void RunConfig::apply_assignment(const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) {
    throw ConfigError("expected key=value, got '" + assignment + "'");
  }
  set(trim(assignment.substr(0, eq)), assignment.substr(eq + 1));
}

void RunConfig::apply_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file " + path.string());
  std::size_t line_no = 0;
  for (std::string line; std::getline(in, line);) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    if (trim(line).empty()) continue;
    try {
      apply_assignment(line);
    } catch (const ConfigError& e) {
      throw ConfigError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
}

std::map<std::string, std::string> RunConfig::to_kv() const {
  std::map<std::string, std::string> kv;
  for (const auto& [k, f] : fields()) kv[k] = f.get(*this);
  return kv;
}

std::string RunConfig::dump() const {
  std::string s;
  for (const auto& [k, v] : to_kv()) s += k + "=" + v + "\n";
  return s;
}

void RunConfig::write(const std::filesystem::path& path) const {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << dump();
  if (!out) throw IoError("write failed: " + path.string());
}

void RunConfig::validate() const {
  experiment.model.validate();
  experiment.train.validate();
  synth.validate();
  if (experiment.model.mta.enabled && clips < experiment.model.mta.k_max) {
    throw ConfigError("clips=" + std::to_string(clips) + " is smaller than mta.k_max=" +
                      std::to_string(experiment.model.mta.k_max));
  }
  if (!(experiment.loss.eps > 0.0)) throw ConfigError("loss.eps must be positive");
  if (!(experiment.selection.threshold > 0.0 && experiment.selection.threshold <= 1.0)) {
    throw ConfigError("ais.threshold must lie in (0, 1]");
  }
}

}  // namespace lightvad
