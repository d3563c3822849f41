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

#include "lightvad/model.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "lightvad/errors.hpp"

namespace lightvad {

std::string to_string(MtaMode mode) { return mode == MtaMode::Residual ? "residual" : "pure"; }
std::string to_string(HeadShape shape) {
  return shape == HeadShape::Hourglass ? "hourglass" : "conventional";
}

MtaMode parse_mta_mode(const std::string& s) {
  if (s == "residual") return MtaMode::Residual;
  if (s == "pure") return MtaMode::Pure;
  throw ConfigError("unknown MTA mode '" + s + "' (expected residual or pure)");
}

HeadShape parse_head_shape(const std::string& s) {
  if (s == "hourglass") return HeadShape::Hourglass;
  if (s == "conventional") return HeadShape::Conventional;
  throw ConfigError("unknown head shape '" + s + "' (expected hourglass or conventional)");
}

std::vector<std::size_t> MtaConfig::kernel_sizes() const {
  std::vector<std::size_t> ks;
  for (std::size_t k = k_max; k >= 3; k -= 2) ks.push_back(k);
  return ks;
}

void MtaConfig::validate() const {
  if (k_max < 3 || k_max % 2 == 0) {
    throw ConfigError("mta.k_max must be an odd integer >= 3, got " + std::to_string(k_max));
  }
  if (!(lambda1 > 0.0)) throw ConfigError("mta.lambda1 must be positive");
  if (!(slope >= 0.0 && slope < 1.0)) throw ConfigError("mta.slope must lie in [0, 1)");
}

std::vector<std::size_t> HfcConfig::dims() const {
  if (shape == HeadShape::Hourglass) return {input_dim, narrow, wide, 1};
  return {input_dim, wide, narrow, 1};
}

void HfcConfig::validate() const {
  if (input_dim == 0 || narrow == 0 || wide == 0) throw ConfigError("hfc widths must be positive");
  if (narrow >= wide) {
    throw ConfigError("hfc.narrow (" + std::to_string(narrow) + ") must be smaller than hfc.wide (" +
                      std::to_string(wide) + ")");
  }
  if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("hfc.dropout must lie in [0, 1)");
  if (!(slope >= 0.0 && slope < 1.0)) throw ConfigError("hfc.slope must lie in [0, 1)");
}

void ModelConfig::validate() const {
  mta.validate();
  hfc.validate();
}

namespace {

std::string fmt_double(double v) {
  std::ostringstream ss;
  ss.precision(17);
  ss << v;
  return ss.str();
}

const std::string& require(const std::map<std::string, std::string>& kv, const std::string& key) {
  auto it = kv.find(key);
  if (it == kv.end()) throw ConfigError("model config is missing '" + key + "'");
  return it->second;
}

std::size_t to_size(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const auto n = std::stoull(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return static_cast<std::size_t>(n);
  } catch (const std::exception&) {
    throw ConfigError("'" + key + "' expects a non-negative integer, got '" + v + "'");
  }
}

double to_double(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const double d = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw ConfigError("'" + key + "' expects a number, got '" + v + "'");
  }
}

}  // namespace

std::map<std::string, std::string> ModelConfig::to_kv() const {
  return {
      {"mta.enabled", mta.enabled ? "1" : "0"},
      {"mta.k_max", std::to_string(mta.k_max)},
      {"mta.lambda1", fmt_double(mta.lambda1)},
      {"mta.slope", fmt_double(mta.slope)},
      {"mta.mode", to_string(mta.mode)},
      {"hfc.input_dim", std::to_string(hfc.input_dim)},
      {"hfc.narrow", std::to_string(hfc.narrow)},
      {"hfc.wide", std::to_string(hfc.wide)},
      {"hfc.shape", to_string(hfc.shape)},
      {"hfc.dropout", fmt_double(hfc.dropout)},
      {"hfc.slope", fmt_double(hfc.slope)},
  };
}

ModelConfig ModelConfig::from_kv(const std::map<std::string, std::string>& kv) {
  ModelConfig c;
  const auto& en = require(kv, "mta.enabled");
  if (en != "0" && en != "1") throw ConfigError("'mta.enabled' expects 0 or 1");
  c.mta.enabled = en == "1";
  c.mta.k_max = to_size("mta.k_max", require(kv, "mta.k_max"));
  c.mta.lambda1 = to_double("mta.lambda1", require(kv, "mta.lambda1"));
  c.mta.slope = to_double("mta.slope", require(kv, "mta.slope"));
  c.mta.mode = parse_mta_mode(require(kv, "mta.mode"));
  c.hfc.input_dim = to_size("hfc.input_dim", require(kv, "hfc.input_dim"));
  c.hfc.narrow = to_size("hfc.narrow", require(kv, "hfc.narrow"));
  c.hfc.wide = to_size("hfc.wide", require(kv, "hfc.wide"));
  c.hfc.shape = parse_head_shape(require(kv, "hfc.shape"));
  c.hfc.dropout = to_double("hfc.dropout", require(kv, "hfc.dropout"));
  c.hfc.slope = to_double("hfc.slope", require(kv, "hfc.slope"));
  c.validate();
  return c;
}

std::size_t count_parameters(const ModelConfig& cfg) {
  std::size_t n = 0;
  if (cfg.mta.enabled) {
    for (auto k : cfg.mta.kernel_sizes()) n += k + 1;
  }
  const auto dims = cfg.hfc.dims();
  for (std::size_t i = 0; i + 1 < dims.size(); ++i) n += dims[i] * dims[i + 1] + dims[i + 1];
  return n;
}

Model::Model(ModelConfig cfg, std::uint64_t seed) : cfg_(std::move(cfg)) {
  cfg_.validate();
  Rng rng(seed);
  if (cfg_.mta.enabled) {
    for (auto k : cfg_.mta.kernel_sizes()) {
      params_.add("mta.conv" + std::to_string(k) + ".weight", Tensor({k}, 0.0));
      params_.add("mta.conv" + std::to_string(k) + ".bias", Tensor({1}, 0.0));
    }
  }
  const auto dims = cfg_.hfc.dims();
  for (std::size_t i = 0; i + 1 < dims.size(); ++i) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(dims[i]));
    auto uniform = [&] { return (2.0 * static_cast<double>(rng() >> 11) * 0x1.0p-53 - 1.0) * bound; };
    Tensor w({dims[i], dims[i + 1]});
    for (auto& v : w.data()) v = uniform();
    Tensor b({dims[i + 1]});
    for (auto& v : b.data()) v = uniform();
    const std::string layer = "hfc.fc" + std::to_string(i + 1);
    params_.add(layer + ".weight", std::move(w));
    params_.add(layer + ".bias", std::move(b));
  }
}

Var Model::bind(Graph& g, const std::string& name, bool track) {
  Parameter& p = params_.get(name);
  return track ? g.parameter(p) : g.constant(p.value);
}

Var Model::mta_forward(Graph& g, Var x, bool track_grads) {
  if (!cfg_.mta.enabled) return x;
  const Tensor& xv = x.value();
  if (xv.rank() != 2) {
    throw DimensionError("mta_forward: expected [T x D], got " + shape_to_string(xv.shape()));
  }
  if (xv.dim(0) < cfg_.mta.k_max) {
    throw ConfigError("mta_forward: T=" + std::to_string(xv.dim(0)) + " is smaller than k_max=" +
                      std::to_string(cfg_.mta.k_max));
  }
  Var pooled = ops::global_avg_pool(x);
  Var total{};
  bool first = true;
  for (auto k : cfg_.mta.kernel_sizes()) {
    const std::string base = "mta.conv" + std::to_string(k);
    Var c = ops::conv1d_same(pooled, bind(g, base + ".weight", track_grads),
                             bind(g, base + ".bias", track_grads));
    Var a = ops::leaky_relu(c, cfg_.mta.slope);
    total = first ? a : ops::add(total, a);
    first = false;
  }
  Var s = ops::scale(total, cfg_.mta.lambda1);
  if (cfg_.mta.mode == MtaMode::Residual) s = ops::add_scalar(s, 1.0);
  return ops::row_scale(x, s);
}

Var Model::hfc_forward(Graph& g, Var y, bool training, Rng& rng, bool track_grads) {
  const Tensor& yv = y.value();
  if (yv.rank() != 2 || yv.dim(1) != cfg_.hfc.input_dim) {
    throw DimensionError("hfc_forward: expected [T x " + std::to_string(cfg_.hfc.input_dim) +
                         "], got " + shape_to_string(yv.shape()));
  }
  Var h = y;
  const std::size_t layers = cfg_.hfc.dims().size() - 1;
  for (std::size_t i = 1; i <= layers; ++i) {
    const std::string layer = "hfc.fc" + std::to_string(i);
    h = ops::linear(h, bind(g, layer + ".weight", track_grads), bind(g, layer + ".bias", track_grads));
    if (i < layers) {
      h = ops::leaky_relu(h, cfg_.hfc.slope);
      h = ops::dropout(h, cfg_.hfc.dropout, training, rng);
    }
  }
  return ops::reshape(ops::sigmoid(h), {yv.dim(0)});
}

ModelOutput Model::forward(Graph& g, const Tensor& x, bool training, Rng& rng, bool track_grads) {
  Var input = g.constant(x);
  Var features = mta_forward(g, input, track_grads);
  Var scores = hfc_forward(g, features, training, rng, track_grads);
  return {features, scores};
}

ModelOutput Model::forward(Graph& g, const Tensor& x) const {
  // Without gradient tracking no parameter is modified.
  Rng unused(0);
  return const_cast<Model*>(this)->forward(g, x, false, unused, false);
}

std::vector<double> Model::score(const Tensor& x) const {
  Graph g;
  return forward(g, x).scores.value().values();
}

// ---------------------------------------------------------------------------
// Checkpoint file

namespace {

constexpr char kCkptMagic[4] = {'L', 'W', 'C', 'K'};
constexpr std::uint16_t kCkptVersion = 1;

class Writer {
 public:
  template <typename U>
  void le(U v) {
    for (std::size_t i = 0; i < sizeof(U); ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
  }
  void f64(double v) { le(std::bit_cast<std::uint64_t>(v)); }
  void bytes(const std::string& s) { buf += s; }
  void tensor(const Tensor& t) {
    le<std::uint32_t>(static_cast<std::uint32_t>(t.rank()));
    for (auto d : t.shape()) le<std::uint32_t>(static_cast<std::uint32_t>(d));
    for (double v : t.data()) f64(v);
  }
  std::string buf;
};

class Reader {
 public:
  Reader(std::string data, std::string where) : buf(std::move(data)), where_(std::move(where)) {}

  template <typename U>
  U le() {
    need(sizeof(U));
    U v = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i)
      v |= static_cast<U>(static_cast<unsigned char>(buf[pos + i])) << (8 * i);
    pos += sizeof(U);
    return v;
  }
  double f64() { return std::bit_cast<double>(le<std::uint64_t>()); }
  std::string bytes(std::size_t n) {
    need(n);
    std::string s = buf.substr(pos, n);
    pos += n;
    return s;
  }
  Tensor tensor() {
    const std::size_t at = pos;
    const auto rank = le<std::uint32_t>();
    if (rank == 0 || rank > 8) fail("bad tensor rank " + std::to_string(rank), at);
    Shape shape(rank);
    std::size_t n = 1;
    for (auto& d : shape) {
      d = le<std::uint32_t>();
      if (d == 0) fail("zero tensor dimension", pos - 4);
      n *= d;
    }
    if (n > (buf.size() - pos) / 8) fail("tensor payload truncated", buf.size());
    std::vector<double> data(n);
    for (auto& v : data) v = f64();
    return Tensor(std::move(shape), std::move(data));
  }
  [[noreturn]] void fail(const std::string& what, std::size_t at) const {
    throw FormatError(what + " in " + where_, at);
  }
  void need(std::size_t n) const {
    if (buf.size() - pos < n) fail("checkpoint truncated", buf.size());
  }

  std::string buf;
  std::size_t pos = 0;

 private:
  std::string where_;
};

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const Model& model,
                     const TrainProgress& progress) {
  Writer w;
  w.bytes(std::string(kCkptMagic, 4));
  w.le<std::uint16_t>(kCkptVersion);
  std::string cfg;
  for (const auto& [k, v] : model.config().to_kv()) cfg += k + "=" + v + "\n";
  w.le<std::uint32_t>(static_cast<std::uint32_t>(cfg.size()));
  w.bytes(cfg);
  w.le<std::uint32_t>(static_cast<std::uint32_t>(model.params().count()));
  for (const auto& p : model.params()) {
    w.le<std::uint16_t>(static_cast<std::uint16_t>(p.name.size()));
    w.bytes(p.name);
    w.tensor(p.value);
  }
  w.le<std::uint64_t>(progress.step);
  w.le<std::uint64_t>(progress.epoch);
  w.f64(progress.best_auc);
  w.le<std::uint32_t>(static_cast<std::uint32_t>(progress.rng_state.size()));
  w.bytes(progress.rng_state);
  const bool moments = !progress.first_moment.empty();
  w.le<std::uint8_t>(moments ? 1 : 0);
  if (moments) {
    for (const auto& t : progress.first_moment) w.tensor(t);
    for (const auto& t : progress.second_moment) w.tensor(t);
  }

  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write checkpoint " + path.string());
  out.write(w.buf.data(), static_cast<std::streamsize>(w.buf.size()));
  if (!out) throw IoError("write failed: " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path, const ModelConfig* expected) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  Reader r(ss.str(), path.string());

  if (r.buf.size() < 4 || std::memcmp(r.buf.data(), kCkptMagic, 4) != 0) r.fail("bad LWCK magic", 0);
  r.pos = 4;
  const auto version = r.le<std::uint16_t>();
  if (version != kCkptVersion) r.fail("unsupported checkpoint version " + std::to_string(version), 4);

  const auto cfg_len = r.le<std::uint32_t>();
  const std::size_t cfg_at = r.pos;
  std::map<std::string, std::string> kv;
  std::istringstream cfg_text(r.bytes(cfg_len));
  for (std::string line; std::getline(cfg_text, line);) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) r.fail("malformed config line '" + line + "'", cfg_at);
    kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  const ModelConfig cfg = ModelConfig::from_kv(kv);
  if (expected && !(*expected == cfg)) {
    std::string diff;
    const auto want = expected->to_kv();
    for (const auto& [k, v] : cfg.to_kv()) {
      if (want.at(k) != v) diff += " " + k + " (checkpoint " + v + ", expected " + want.at(k) + ")";
    }
    throw ConfigError("checkpoint " + path.string() + " config mismatch:" + diff);
  }

  Model model(cfg, 0);
  const auto count = r.le<std::uint32_t>();
  if (count != model.params().count()) {
    r.fail("checkpoint has " + std::to_string(count) + " parameters, config implies " +
               std::to_string(model.params().count()),
           r.pos - 4);
  }
  for (auto& p : model.params()) {
    const std::size_t at = r.pos;
    const auto name = r.bytes(r.le<std::uint16_t>());
    if (name != p.name) r.fail("expected parameter '" + p.name + "', found '" + name + "'", at);
    Tensor t = r.tensor();
    if (t.shape() != p.value.shape()) {
      r.fail("parameter " + name + " has shape " + shape_to_string(t.shape()) + ", expected " +
                 shape_to_string(p.value.shape()),
             at);
    }
    p.value = std::move(t);
  }

  TrainProgress progress;
  progress.step = r.le<std::uint64_t>();
  progress.epoch = r.le<std::uint64_t>();
  progress.best_auc = r.f64();
  progress.rng_state = r.bytes(r.le<std::uint32_t>());
  if (r.le<std::uint8_t>()) {
    for (auto* moments : {&progress.first_moment, &progress.second_moment}) {
      for (const auto& p : model.params()) {
        Tensor t = r.tensor();
        if (t.shape() != p.value.shape()) r.fail("moment shape mismatch for " + p.name, r.pos);
        moments->push_back(std::move(t));
      }
    }
  }
  if (r.pos != r.buf.size()) r.fail("trailing bytes after checkpoint", r.pos);
  return Checkpoint{std::move(model), std::move(progress)};
}

}  // namespace lightvad
