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

// Acceptance suite: prints one PASS/FAIL line per criterion and exits
// non-zero if any criterion fails. Everything goes through the C interface.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <map>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "lightvad/lightvad.h"

namespace fs = std::filesystem;

namespace {

struct Failure {
  std::string what;
};

void check(lv_status s, const std::string& what) {
  if (s != LV_OK) throw Failure{what + ": " + lv_last_error() + " (" + lv_status_name(s) + ")"};
}

class Config {
 public:
  Config() { check(lv_config_create(&cfg_), "lv_config_create"); }
  Config(const Config&) = delete;
  Config& operator=(const Config&) = delete;
  ~Config() { lv_config_destroy(cfg_); }
  Config& set(const std::string& key, const std::string& value) {
    check(lv_config_set(cfg_, key.c_str(), value.c_str()), "set " + key);
    return *this;
  }
  lv_config* get() const { return cfg_; }

 private:
  lv_config* cfg_ = nullptr;
};

// Training profile shared by every end-to-end criterion. The remaining
// settings are library defaults.
const std::vector<std::pair<std::string, std::string>> kProfile = {
    {"hfc.dropout", "0"},
    {"train.batch_pairs", "2"},
    {"train.lr", "0.001"},
};

void apply_profile(Config& c, const fs::path& data) {
  for (const auto& [k, v] : kProfile) c.set(k, v);
  c.set("data.train_manifest", (data / "train.csv").string());
  c.set("data.test_manifest", (data / "test.csv").string());
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

using Log = std::vector<std::map<std::string, double>>;

Log read_log(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Failure{"cannot open " + path.string()};
  std::string line;
  std::getline(in, line);
  std::vector<std::string> header;
  std::stringstream hs(line);
  for (std::string col; std::getline(hs, col, ',');) header.push_back(col);
  Log rows;
  while (std::getline(in, line)) {
    std::stringstream ls(line);
    std::map<std::string, double> row;
    std::size_t i = 0;
    for (std::string cell; std::getline(ls, cell, ','); ++i) {
      row[header.at(i)] = cell.empty() ? std::nan("") : std::stod(cell);
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Failure{"cannot open " + path.string()};
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// Ranks with ties sharing their average position.
std::vector<double> ranks(const std::vector<double>& v) {
  std::vector<std::size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](auto a, auto b) { return v[a] < v[b]; });
  std::vector<double> r(v.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
    for (std::size_t k = i; k <= j; ++k) r[idx[k]] = 0.5 * static_cast<double>(i + j) + 1.0;
    i = j + 1;
  }
  return r;
}

double spearman(const std::vector<double>& x, const std::vector<double>& y) {
  const auto rx = ranks(x), ry = ranks(y);
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / n;
  const double my = std::accumulate(ry.begin(), ry.end(), 0.0) / n;
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  return sxy / std::sqrt(sxx * syy);
}

double pairwise_auc(const std::vector<double>& s, const std::vector<std::uint8_t>& l) {
  double wins = 0.0, pairs = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (!l[i]) continue;
    for (std::size_t j = 0; j < s.size(); ++j) {
      if (l[j]) continue;
      pairs += 1.0;
      wins += s[i] > s[j] ? 1.0 : s[i] == s[j] ? 0.5 : 0.0;
    }
  }
  return wins / pairs;
}

bool all_finite(const Log& log) {
  for (const auto& row : log) {
    for (const char* k : {"ais", "smooth", "antagonistic", "sparsity", "total"}) {
      if (!std::isfinite(row.at(k))) return false;
    }
  }
  return true;
}

class Report {
 public:
  void line(int id, bool pass, const std::string& detail) {
    std::printf("criterion %d %s: %s\n", id, pass ? "PASS" : "FAIL", detail.c_str());
    std::fflush(stdout);
    all_ &= pass;
  }
  bool all() const { return all_; }

 private:
  bool all_ = true;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

struct RunOut {
  lv_train_summary summary{};
  Log log;
  double seconds = 0.0;
};

RunOut train(const fs::path& data, const fs::path& out, std::size_t epochs,
             const std::vector<std::pair<std::string, std::string>>& extra = {}) {
  Config c;
  apply_profile(c, data);
  c.set("train.epochs", std::to_string(epochs));
  c.set("out_dir", out.string());
  for (const auto& [k, v] : extra) c.set(k, v);
  RunOut r;
  const auto t0 = std::chrono::steady_clock::now();
  check(lv_train(c.get(), &r.summary), "train " + out.string());
  r.seconds = seconds_since(t0);
  if (epochs > 0) r.log = read_log(out / "train_log.csv");
  return r;
}

void criterion_params(Report& rep) {
  Config c;
  lv_param_report r{};
  check(lv_param_report_compute(c.get(), &r), "params");
  const bool pass = r.total == 139595 && r.registered == r.total && std::abs(r.ratio - 0.516) <= 0.001;
  rep.line(1, pass,
           fmt("%zu trainable parameters (registered %zu), hourglass/conventional %zu/%zu = %.4f",
               r.total, r.registered, r.hourglass, r.conventional, r.ratio));
}

void criterion_grad(Report& rep) {
  const auto t0 = std::chrono::steady_clock::now();
  bool pass = true;
  std::string detail;
  for (const char* mode : {"residual", "pure"}) {
    Config c;
    c.set("hfc.dropout", "0").set("mta.mode", mode);
    lv_grad_report g{};
    check(lv_grad_check(c.get(), 8, 16, 1, 1e-5, 1e-4, &g), "grad-check");
    pass &= g.passed && g.max_rel_error < 1e-4;
    detail += fmt("%s max rel %.2e over %zu entries; ", mode, g.max_rel_error, g.entries_checked);
  }
  const double secs = seconds_since(t0);
  pass &= secs < 10.0;
  rep.line(2, pass, detail + fmt("%.2f s", secs));
}

void criterion_auc_oracle(Report& rep) {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(20240607);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double worst = 0.0;
  std::size_t tied_instances = 0;
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t n = std::uniform_int_distribution<std::size_t>(2, 1000)(rng);
    const int grid = std::uniform_int_distribution<int>(2, 64)(rng);
    const bool snap = trial % 2 == 0;
    tied_instances += snap;
    std::vector<double> s(n);
    std::vector<std::uint8_t> l(n);
    for (std::size_t i = 0; i < n; ++i) {
      s[i] = snap ? std::floor(u(rng) * grid) / grid : u(rng);
      l[i] = u(rng) < 0.35;
    }
    l[0] = 1;
    l[1] = 0;
    double a = 0.0;
    check(lv_auc(s.data(), l.data(), n, &a), "lv_auc");
    worst = std::max(worst, std::abs(a - pairwise_auc(s, l)));
  }
  const double secs = seconds_since(t0);
  rep.line(3, worst <= 1e-12 && secs < 10.0,
           fmt("500 instances (%zu with injected ties), max |trapezoid - pairwise| = %.3g, %.2f s",
               tied_instances, worst, secs));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"lightvad acceptance suite"};
  std::string work = "acceptance_work";
  std::vector<std::string> suites;
  bool keep = false;
  app.add_option("-w,--work", work, "scratch directory (recreated)");
  app.add_option("--suite", suites, "property test executables to run for criterion 9");
  app.add_flag("--keep", keep, "keep the scratch directory");
  CLI11_PARSE(app, argc, argv);

  const fs::path root = fs::absolute(work);
  Report rep;
  try {
    fs::remove_all(root);
    fs::create_directories(root);
    std::printf("training profile:");
    for (const auto& [k, v] : kProfile) std::printf(" %s=%s", k.c_str(), v.c_str());
    std::printf("\n");

    criterion_params(rep);
    criterion_grad(rep);
    criterion_auc_oracle(rep);

    // Default generator settings, seed 7.
    const fs::path data = root / "data";
    Config synth;
    synth.set("seed", "7");
    lv_synth_summary planted{};
    check(lv_gen_synth(synth.get(), data.string().c_str(), &planted), "gen-synth");

    const auto untrained = train(data, root / "untrained", 0);
    const auto run_a = train(data, root / "run_a", 50);
    const double gain = run_a.summary.final_auc - untrained.summary.final_auc;
    rep.line(4,
             run_a.summary.final_auc >= 0.95 && gain >= 0.30 && run_a.seconds < 300.0,
             fmt("held-out AUC %.4f after 50 epochs, untrained %.4f (gain %+.4f), %.1f s",
                 run_a.summary.final_auc, untrained.summary.final_auc, gain, run_a.seconds));

    std::vector<double> epochs, omega;
    for (std::size_t i = 0; i < 10; ++i) {
      epochs.push_back(static_cast<double>(i + 1));
      omega.push_back(run_a.log.at(i).at("omega"));
    }
    const double rho = spearman(epochs, omega);
    const auto full_run = train(data, root / "run_full", 200);
    const double k_final = full_run.log.back().at("k");
    const double k_target = planted.mean_planted_train;
    rep.line(5, rho >= 0.6 && std::abs(k_final - k_target) <= 2.0,
             fmt("omega Spearman over epochs 1-10 %.3f; final mean K %.2f after %zu epochs vs "
                 "planted mean %.2f (K %.2f at epoch 50)",
                 rho, k_final, full_run.log.size(), k_target, run_a.log.back().at("k")));

    const double a1 = run_a.log.at(0).at("antagonistic");
    const double a20 = run_a.log.at(19).at("antagonistic");
    rep.line(6, a20 < 0.5 * a1,
             fmt("antagonistic epoch 1 %.4f, epoch 20 %.4f (ratio %.3f)", a1, a20, a20 / a1));

    struct Row {
      const char* name;
      const char* mta;
      const char* shape;
      const char* ais;
      const char* loss;
    };
    const std::vector<Row> lattice = {
        {"baseline", "0", "conventional", "0", "none"},
        {"+MTA", "1", "conventional", "0", "none"},
        {"+HFC", "0", "hourglass", "0", "none"},
        {"+MTA+HFC", "1", "hourglass", "0", "none"},
        {"+AIS", "0", "conventional", "1", "none"},
        {"+HFC+AIS", "0", "hourglass", "1", "none"},
        {"+MTA+AIS", "1", "conventional", "1", "none"},
        {"+MTA+HFC+AIS", "1", "hourglass", "1", "none"},
        {"+A-Loss", "0", "conventional", "0", "antagonistic"},
        {"full", "1", "hourglass", "1", "antagonistic"},
    };
    bool finite = true;
    double baseline_auc = 0.0, full_auc = 0.0;
    std::string table;
    for (std::size_t i = 0; i < lattice.size(); ++i) {
      const auto& row = lattice[i];
      const auto r = train(data, root / ("ablation_" + std::to_string(i)), 50,
                           {{"mta.enabled", row.mta},
                            {"hfc.shape", row.shape},
                            {"ais.enabled", row.ais},
                            {"loss.extra", row.loss}});
      finite &= all_finite(r.log) && std::isfinite(r.summary.final_auc);
      if (i == 0) baseline_auc = r.summary.final_auc;
      if (i + 1 == lattice.size()) full_auc = r.summary.final_auc;
      table += fmt("%s%s %.4f", i ? ", " : "", row.name, r.summary.final_auc);
    }
    rep.line(7, finite && full_auc >= baseline_auc - 0.02,
             fmt("%zu configurations finite=%s; full %.4f vs baseline %.4f [%s]", lattice.size(),
                 finite ? "yes" : "no", full_auc, baseline_auc, table.c_str()));

    const auto run_b = train(data, root / "run_b", 50);
    bool same = true;
    for (const char* f : {"train_log.csv", "model.lwck", "best.lwck"}) {
      same &= slurp(root / "run_a" / f) == slurp(root / "run_b" / f);
    }
    rep.line(8, same, same ? "two seed-7 runs produced identical train_log.csv, model.lwck, best.lwck"
                           : "the two seed-7 runs differ");

    std::size_t passed = 0;
    for (const auto& suite : suites) {
      const std::string cmd = "\"" + suite + "\" > /dev/null 2>&1";
      if (std::system(cmd.c_str()) == 0) ++passed;
    }
    rep.line(9, !suites.empty() && passed == suites.size(),
             fmt("%zu of %zu property suites passed", passed, suites.size()));
  } catch (const Failure& f) {
    std::printf("error: %s\n", f.what.c_str());
    return 1;
  }
  if (!keep) fs::remove_all(root);
  return rep.all() ? 0 : 1;
}
