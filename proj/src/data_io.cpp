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

#include "lightvad/data_io.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <random>
#include <sstream>

#include "lightvad/errors.hpp"

namespace lightvad {

namespace {

constexpr char kMagic[4] = {'L', 'W', 'V', 'F'};
constexpr std::uint16_t kVersion = 1;
constexpr std::size_t kHeaderBytes = 4 + 2 + 4 + 4;

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::ofstream open_out(const fs::path& path, std::ios::openmode mode = std::ios::out) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, mode);
  if (!out) throw IoError("cannot write " + path.string());
  return out;
}

template <typename U>
void put_le(std::string& buf, U v) {
  for (std::size_t i = 0; i < sizeof(U); ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

template <typename U>
U get_le(const std::string& buf, std::size_t offset) {
  U v = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i)
    v |= static_cast<U>(static_cast<unsigned char>(buf[offset + i])) << (8 * i);
  return v;
}

double as_stored(double v) { return static_cast<double>(static_cast<float>(v)); }

Tensor parse_lwvf(const std::string& buf, const fs::path& path) {
  const std::string where = " in " + path.string();
  if (buf.size() < kHeaderBytes) throw FormatError("LWVF header truncated" + where, buf.size());
  if (std::memcmp(buf.data(), kMagic, 4) != 0) throw FormatError("bad LWVF magic" + where, 0);
  const auto version = get_le<std::uint16_t>(buf, 4);
  if (version != kVersion) {
    throw FormatError("unsupported LWVF version " + std::to_string(version) + where, 4);
  }
  const auto t = get_le<std::uint32_t>(buf, 6);
  const auto d = get_le<std::uint32_t>(buf, 10);
  if (t == 0) throw FormatError("LWVF clip count is zero" + where, 6);
  if (d == 0) throw FormatError("LWVF feature dimension is zero" + where, 10);
  const std::size_t expected = kHeaderBytes + std::size_t{t} * d * 4;
  if (buf.size() < expected) {
    throw FormatError("LWVF payload truncated: header declares T=" + std::to_string(t) +
                          ", D=" + std::to_string(d) + " (" + std::to_string(expected) +
                          " bytes) but file has " + std::to_string(buf.size()) + where,
                      buf.size());
  }
  if (buf.size() > expected) throw FormatError("trailing bytes after LWVF payload" + where, expected);
  std::vector<double> data(std::size_t{t} * d);
  for (std::size_t i = 0; i < data.size(); ++i) {
    data[i] = std::bit_cast<float>(get_le<std::uint32_t>(buf, kHeaderBytes + 4 * i));
    if (!std::isfinite(data[i])) {
      throw FormatError("non-finite feature value" + where, kHeaderBytes + 4 * i);
    }
  }
  return Tensor({t, d}, std::move(data));
}

Tensor parse_csv_features(const std::string& buf, const fs::path& path) {
  const std::string where = " in " + path.string();
  std::vector<double> data;
  std::size_t cols = 0, rows = 0, pos = 0;
  while (pos < buf.size()) {
    std::size_t eol = buf.find('\n', pos);
    if (eol == std::string::npos) eol = buf.size();
    std::size_t end = eol;
    if (end > pos && buf[end - 1] == '\r') --end;
    if (end == pos) {
      pos = eol + 1;
      continue;
    }
    std::size_t row_cols = 0, field = pos;
    while (field <= end) {
      std::size_t comma = buf.find(',', field);
      if (comma == std::string::npos || comma > end) comma = end;
      double v = 0.0;
      const char* first = buf.data() + field;
      while (first < buf.data() + comma && *first == ' ') ++first;
      auto [ptr, ec] = std::from_chars(first, buf.data() + comma, v);
      if (ec != std::errc() || ptr != buf.data() + comma || !std::isfinite(v)) {
        throw FormatError("bad feature value on row " + std::to_string(rows + 1) + where, field);
      }
      data.push_back(as_stored(v));
      ++row_cols;
      field = comma + 1;
    }
    if (rows == 0) cols = row_cols;
    if (row_cols != cols) {
      throw FormatError("row " + std::to_string(rows + 1) + " has " + std::to_string(row_cols) +
                            " columns, expected " + std::to_string(cols) + where,
                        pos);
    }
    ++rows;
    pos = eol + 1;
  }
  if (rows == 0) throw FormatError("empty feature file" + where, 0);
  return Tensor({rows, cols}, std::move(data));
}

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream ss(line);
  while (std::getline(ss, cur, ',')) out.push_back(cur);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

template <typename T>
T parse_number(const std::string& s, const std::string& what, std::size_t offset) {
  T v{};
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw FormatError("bad " + what + " '" + s + "'", offset);
  }
  return v;
}

// In-memory paths are usable from the working directory; on disk they are
// stored relative to the manifest's directory.
fs::path relative_to(const fs::path& p, const fs::path& base) {
  auto rel = fs::absolute(p).lexically_normal().lexically_relative(fs::absolute(base).lexically_normal());
  return rel.empty() ? p : rel;
}

}  // namespace

void save_bag_lwvf(const fs::path& path, const Tensor& features) {
  if (features.rank() != 2) {
    throw DimensionError("save_bag: features must be [T x D], got " +
                         shape_to_string(features.shape()));
  }
  std::string buf(kMagic, 4);
  put_le<std::uint16_t>(buf, kVersion);
  put_le<std::uint32_t>(buf, static_cast<std::uint32_t>(features.dim(0)));
  put_le<std::uint32_t>(buf, static_cast<std::uint32_t>(features.dim(1)));
  for (double v : features.data()) put_le<std::uint32_t>(buf, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
  auto out = open_out(path, std::ios::binary);
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!out) throw IoError("write failed: " + path.string());
}

void save_bag_csv(const fs::path& path, const Tensor& features) {
  if (features.rank() != 2) {
    throw DimensionError("save_bag: features must be [T x D], got " +
                         shape_to_string(features.shape()));
  }
  auto out = open_out(path);
  out << std::setprecision(9);
  for (std::size_t r = 0; r < features.dim(0); ++r) {
    for (std::size_t c = 0; c < features.dim(1); ++c) {
      if (c) out << ',';
      out << static_cast<float>(features.at(r, c));
    }
    out << '\n';
  }
  if (!out) throw IoError("write failed: " + path.string());
}

Tensor load_features(const fs::path& path) {
  const std::string buf = read_file(path);
  const bool binary_ext = path.extension() == ".lwvf";
  if (binary_ext || (buf.size() >= 4 && std::memcmp(buf.data(), kMagic, 4) == 0)) {
    return parse_lwvf(buf, path);
  }
  return parse_csv_features(buf, path);
}

ClipFeatureBag load_bag(const fs::path& path, int label, std::size_t num_frames) {
  ClipFeatureBag bag;
  bag.features = load_features(path);
  bag.label = label;
  bag.video_id = path.stem().string();
  bag.num_frames = num_frames ? num_frames : bag.features.dim(0);
  return bag;
}

Manifest read_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open manifest " + path.string());
  const fs::path base = path.parent_path();
  Manifest m;
  std::string line;
  std::size_t offset = 0, line_no = 0;
  while (std::getline(in, line)) {
    const std::size_t line_start = offset;
    offset += line.size() + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line_no == 1) {
      if (line != "feature_path,label,num_frames,frame_labels,class") {
        throw FormatError("manifest header must be 'feature_path,label,num_frames,frame_labels,class' in " +
                              path.string(),
                          0);
      }
      continue;
    }
    if (line.empty()) continue;
    auto f = split_fields(line);
    if (f.size() < 3 || f.size() > 5) {
      throw FormatError("manifest line " + std::to_string(line_no) + " needs 3 to 5 fields in " +
                            path.string(),
                        line_start);
    }
    f.resize(5);
    ManifestEntry e;
    if (f[0].empty()) throw FormatError("empty feature_path in " + path.string(), line_start);
    e.feature_path = base / f[0];
    e.label = parse_number<int>(f[1], "label", line_start);
    if (e.label != 0 && e.label != 1) {
      throw FormatError("label must be 0 or 1 on manifest line " + std::to_string(line_no), line_start);
    }
    e.num_frames = parse_number<std::size_t>(f[2], "num_frames", line_start);
    if (e.num_frames == 0) throw FormatError("num_frames must be positive", line_start);
    if (!f[3].empty()) {
      if (e.label == 0) {
        throw FormatError("frame labels given for a normal video on manifest line " +
                              std::to_string(line_no),
                          line_start);
      }
      e.frame_label_path = base / f[3];
    }
    if (!f[4].empty()) e.class_name = f[4];
    m.entries.push_back(std::move(e));
  }
  return m;
}

void write_manifest(const fs::path& path, const Manifest& manifest) {
  auto out = open_out(path);
  const fs::path base = path.parent_path();
  out << "feature_path,label,num_frames,frame_labels,class\n";
  for (const auto& e : manifest.entries) {
    out << relative_to(e.feature_path, base).generic_string() << ',' << e.label << ','
        << e.num_frames << ',';
    if (e.frame_label_path) out << relative_to(*e.frame_label_path, base).generic_string();
    out << ',';
    if (e.class_name) out << *e.class_name;
    out << '\n';
  }
  if (!out) throw IoError("write failed: " + path.string());
}

std::vector<std::uint8_t> read_frame_labels(const fs::path& path, std::size_t num_frames) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open frame labels " + path.string());
  std::vector<std::uint8_t> labels;
  labels.reserve(num_frames);
  std::string line;
  std::size_t offset = 0;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line == "0" || line == "1") {
      labels.push_back(line == "1" ? 1 : 0);
    } else if (!line.empty()) {
      throw FormatError("frame label must be 0 or 1 in " + path.string(), offset);
    }
    offset += line.size() + 1;
  }
  if (labels.size() != num_frames) {
    throw FormatError(path.string() + " has " + std::to_string(labels.size()) +
                          " frame labels, expected " + std::to_string(num_frames),
                      offset);
  }
  return labels;
}

void write_frame_labels(const fs::path& path, const std::vector<std::uint8_t>& labels) {
  auto out = open_out(path);
  for (auto l : labels) out << (l ? '1' : '0') << '\n';
  if (!out) throw IoError("write failed: " + path.string());
}

std::vector<Video> load_videos(const Manifest& manifest, std::size_t clips) {
  std::vector<Video> videos;
  videos.reserve(manifest.entries.size());
  std::size_t dims = 0;
  for (const auto& e : manifest.entries) {
    if (!fs::exists(e.feature_path)) throw IoError("missing feature file " + e.feature_path.string());
    Video v;
    v.bag = load_bag(e.feature_path, e.label, e.num_frames);
    const std::size_t t = v.bag.clips();
    if (clips && t != clips) {
      throw DimensionError(e.feature_path.string() + " has " + std::to_string(t) +
                           " clips, expected " + std::to_string(clips));
    }
    if (dims && v.bag.dims() != dims) {
      throw DimensionError(e.feature_path.string() + " has feature dimension " +
                           std::to_string(v.bag.dims()) + ", expected " + std::to_string(dims));
    }
    dims = v.bag.dims();
    if (e.num_frames < t) {
      throw ConfigError(e.feature_path.string() + ": num_frames " + std::to_string(e.num_frames) +
                        " is smaller than the clip count " + std::to_string(t));
    }
    if (e.frame_label_path) {
      v.frame_labels = read_frame_labels(*e.frame_label_path, e.num_frames);
    } else {
      v.frame_labels.assign(e.num_frames, 0);
    }
    v.class_name = e.class_name.value_or("");
    videos.push_back(std::move(v));
  }
  return videos;
}

std::pair<std::size_t, std::size_t> clip_frame_range(std::size_t clip, std::size_t clips,
                                                     std::size_t num_frames) {
  return {clip * num_frames / clips, (clip + 1) * num_frames / clips};
}

std::vector<double> expand_clip_scores(const std::vector<double>& clip_scores,
                                       std::size_t num_frames) {
  const std::size_t t = clip_scores.size();
  if (t == 0 || num_frames < t) {
    throw ConfigError("cannot expand " + std::to_string(t) + " clips onto " +
                      std::to_string(num_frames) + " frames (need N >= T >= 1)");
  }
  std::vector<double> frames(num_frames);
  for (std::size_t i = 0; i < t; ++i) {
    auto [lo, hi] = clip_frame_range(i, t, num_frames);
    std::fill(frames.begin() + static_cast<std::ptrdiff_t>(lo),
              frames.begin() + static_cast<std::ptrdiff_t>(hi), clip_scores[i]);
  }
  return frames;
}

std::vector<std::uint8_t> expand_clip_labels(const std::vector<std::uint8_t>& clip_flags,
                                             std::size_t num_frames) {
  std::vector<double> as_double(clip_flags.begin(), clip_flags.end());
  auto frames = expand_clip_scores(as_double, num_frames);
  return std::vector<std::uint8_t>(frames.begin(), frames.end());
}

void SyntheticSpec::validate() const {
  if (clips < 3) throw ConfigError("synthetic: clip count must be at least 3");
  if (dims < 1) throw ConfigError("synthetic: feature dimension must be positive");
  if (span_min < 1 || span_max > clips || span_min > span_max) {
    throw ConfigError("synthetic: anomaly span [" + std::to_string(span_min) + ", " +
                      std::to_string(span_max) + "] must lie within [1, " +
                      std::to_string(clips) + "]");
  }
  if (!(noise_sigma > 0.0)) throw ConfigError("synthetic: noise_sigma must be positive");
  for (const auto& c : effective_classes()) {
    if (!(c.separation >= 0.0) || !std::isfinite(c.separation)) {
      throw ConfigError("synthetic: separation must be a non-negative number");
    }
    if (c.name.empty() || c.name.find(',') != std::string::npos) {
      throw ConfigError("synthetic: class names must be non-empty and contain no commas");
    }
  }
  if (frames_min > frames_max || frames_max < clips) {
    throw ConfigError("synthetic: frame range must satisfy frames_min <= frames_max and frames_max >= T");
  }
  if (n_normal + n_abnormal == 0) throw ConfigError("synthetic: empty training split");
}

std::vector<AnomalyClass> SyntheticSpec::effective_classes() const {
  if (!classes.empty()) return classes;
  return {AnomalyClass{"anomaly", separation}};
}

double SyntheticDataset::mean_planted_length(const std::string& split) const {
  double total = 0.0;
  std::size_t n = 0;
  for (const auto& p : planted) {
    if (p.split != split) continue;
    total += static_cast<double>(p.length);
    ++n;
  }
  return n ? total / static_cast<double>(n) : 0.0;
}

std::vector<SyntheticVideo> generate_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  const auto classes = spec.effective_classes();
  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);

  // Normal prototype: random direction with norm 2*sigma*sqrt(D). Anomalies
  // shift it further along its own direction, so anomalous clips have a
  // larger L2 magnitude.
  std::vector<double> direction(spec.dims);
  double norm = 0.0;
  for (auto& v : direction) {
    v = gauss(rng);
    norm += v * v;
  }
  norm = std::sqrt(norm);
  for (auto& v : direction) v /= norm;
  const double base = 2.0 * spec.noise_sigma * std::sqrt(static_cast<double>(spec.dims));

  std::vector<SyntheticVideo> out;
  auto make_split = [&](const std::string& split, std::size_t n_normal, std::size_t n_abnormal) {
    for (std::size_t k = 0; k < n_normal + n_abnormal; ++k) {
      const bool abnormal = k >= n_normal;
      const std::size_t index = abnormal ? k - n_normal : k;
      SyntheticVideo sv;
      sv.split = split;
      auto& bag = sv.video.bag;
      std::ostringstream id;
      id << split << (abnormal ? "_abnormal_" : "_normal_") << std::setw(4) << std::setfill('0')
         << index;
      bag.video_id = id.str();
      bag.label = abnormal ? 1 : 0;
      bag.num_frames = std::uniform_int_distribution<std::size_t>(
          std::max(spec.frames_min, spec.clips), spec.frames_max)(rng);

      double shift = 0.0;
      if (abnormal) {
        const auto& cls = classes[index % classes.size()];
        sv.video.class_name = cls.name;
        shift = cls.separation * spec.noise_sigma;
        sv.length = std::uniform_int_distribution<std::size_t>(spec.span_min, spec.span_max)(rng);
        sv.start = std::uniform_int_distribution<std::size_t>(0, spec.clips - sv.length)(rng);
      }
      bag.features = Tensor({spec.clips, spec.dims});
      std::vector<std::uint8_t> clip_flags(spec.clips, 0);
      for (std::size_t t = 0; t < spec.clips; ++t) {
        const bool anomalous = abnormal && t >= sv.start && t < sv.start + sv.length;
        clip_flags[t] = anomalous ? 1 : 0;
        const double scale = base + (anomalous ? shift : 0.0);
        for (std::size_t d = 0; d < spec.dims; ++d) {
          bag.features.at(t, d) = as_stored(scale * direction[d] + spec.noise_sigma * gauss(rng));
        }
      }
      sv.video.frame_labels = expand_clip_labels(clip_flags, bag.num_frames);
      out.push_back(std::move(sv));
    }
  };
  make_split("train", spec.n_normal, spec.n_abnormal);
  make_split("test", spec.n_test_normal, spec.n_test_abnormal);
  return out;
}

SyntheticDataset make_synthetic(const SyntheticSpec& spec, const fs::path& out_dir) {
  auto videos = generate_synthetic(spec);
  SyntheticDataset ds;
  ds.train_manifest = out_dir / "train.csv";
  ds.test_manifest = out_dir / "test.csv";
  ds.truth_file = out_dir / "truth.csv";
  for (const auto& c : spec.effective_classes()) {
    if (c.separation == 0.0) {
      ds.warnings.push_back("non-separable: class '" + c.name +
                            "' has separation 0, so anomalous and normal clips share one distribution");
    }
  }

  Manifest train, test;
  for (const auto& sv : videos) {
    const auto& bag = sv.video.bag;
    ManifestEntry e;
    e.feature_path = out_dir / "features" / (bag.video_id + ".lwvf");
    e.label = bag.label;
    e.num_frames = bag.num_frames;
    save_bag_lwvf(e.feature_path, bag.features);
    if (bag.label == 1) {
      e.class_name = sv.video.class_name;
      if (sv.split == "test") {
        e.frame_label_path = out_dir / "labels" / (bag.video_id + ".txt");
        write_frame_labels(*e.frame_label_path, sv.video.frame_labels);
      }
      ds.planted.push_back({bag.video_id, sv.split, sv.video.class_name, sv.start, sv.length});
    }
    (sv.split == "train" ? train : test).entries.push_back(std::move(e));
  }
  write_manifest(ds.train_manifest, train);
  write_manifest(ds.test_manifest, test);

  auto truth = std::ofstream(ds.truth_file);
  if (!truth) throw IoError("cannot write " + ds.truth_file.string());
  truth << "video_id,split,class,start_clip,length\n";
  for (const auto& p : ds.planted) {
    truth << p.video_id << ',' << p.split << ',' << p.class_name << ',' << p.start << ','
          << p.length << '\n';
  }
  return ds;
}

}  // namespace lightvad
