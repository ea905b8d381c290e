// Copyright 2026 The scfilter Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// scfilter: command-line front end over the C interface.
//
//   scfilter simulate   --config cfg.toml --out seq/
//   scfilter run        --config cfg.toml --out run/ [--sequence seq/]
//   scfilter suite NAME --config cfg.toml --out suite/
//   scfilter export-ply --maps run/posteriors --lambda 0.05 --out cloud.ply
//
// Exit codes: 0 success, 2 configuration error, 3 runtime failure.

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "scf/scf.h"

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitRuntime = 3;

struct Failure {
  int code;
};

int exit_code(scf_status s) {
  return s == SCF_ERR_CONFIG || s == SCF_ERR_UNKNOWN_SUITE ? kExitConfig : kExitRuntime;
}

void check(scf_status s, const char* what) {
  if (s == SCF_OK) return;
  std::fprintf(stderr, "scfilter: %s: %s\n", what, scf_last_error());
  throw Failure{exit_code(s)};
}

// TOML basic string.
std::string toml_string(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"' || c == '\\') out += '\\';
    out += c;
  }
  return out + "\"";
}

class Config {
 public:
  Config(const std::string& path, const std::vector<std::string>& overrides) {
    if (path.empty()) check(scf_config_default(&cfg_), "default config");
    else check(scf_config_load(path.c_str(), &cfg_), "load config");
    for (const auto& kv : overrides) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos || eq == 0) {
        std::fprintf(stderr, "scfilter: --set expects key=value, got '%s'\n", kv.c_str());
        throw Failure{kExitConfig};
      }
      set(kv.substr(0, eq), kv.substr(eq + 1));
    }
  }
  ~Config() { scf_config_free(cfg_); }
  Config(const Config&) = delete;
  Config& operator=(const Config&) = delete;

  void set(const std::string& key, const std::string& value) {
    check(scf_config_set(cfg_, key.c_str(), value.c_str()), ("set " + key).c_str());
  }
  const scf_config* get() const { return cfg_; }

 private:
  scf_config* cfg_ = nullptr;
};

// Flags shared by the verbs that build a pipeline config.
struct CommonFlags {
  std::string config;
  std::vector<std::string> overrides;
  std::optional<unsigned long long> seed;
  std::optional<double> lambda;
  std::optional<int> ransac_iters;
  std::optional<double> inlier_px;
  std::optional<std::string> mode;

  void add_to(CLI::App* app) {
    app->add_option("--config", config, "TOML or JSON config file")->check(CLI::ExistingFile);
    app->add_option("--set", overrides, "override, section.key=value (repeatable)");
    app->add_option("--seed", seed, "random seed");
    app->add_option("--lambda", lambda, "uncertainty gate in meters");
    app->add_option("--ransac-iters", ransac_iters, "RANSAC iteration budget");
    app->add_option("--inlier-px", inlier_px, "RANSAC inlier threshold in pixels");
    app->add_option("--mode", mode, "fusion mode: kalman, tpooler, sweight, measurement_only");
  }

  void apply(Config& c) const {
    if (seed) c.set("seed", std::to_string(*seed));
    if (lambda) c.set("ransac.lambda_m", CLI::detail::to_string(*lambda));
    if (ransac_iters) c.set("ransac.max_iterations", std::to_string(*ransac_iters));
    if (inlier_px) c.set("ransac.inlier_threshold_px", CLI::detail::to_string(*inlier_px));
    if (mode) c.set("fusion_mode", toml_string(*mode));
  }
};

void print_metrics(const scf_report* r) {
  scf_run_metrics m{};
  check(scf_report_metrics(r, &m), "metrics");
  std::printf("frames %zu (failed %zu)\n", m.frames, m.failed_frames);
  std::printf("median pose error %.4f m / %.3f deg, 5cm-5deg %.1f%%\n", m.median_translation_m,
              m.median_rotation_deg, 100.0 * m.accuracy_5cm_5deg);
  std::printf("mean coordinate error %.4f m (measurement %.4f m)\n", m.mean_coord_error_m,
              m.mean_measurement_error_m);
  std::printf("NIS rejection %.2f%%, flow accuracy %.1f%%, %.1f s\n", 100.0 * m.rejection_rate,
              100.0 * m.flow_accuracy, m.wall_seconds);
}

std::vector<std::string> collect_maps(const std::vector<std::string>& inputs) {
  namespace fs = std::filesystem;
  std::vector<std::string> out;
  for (const auto& in : inputs) {
    if (fs::is_directory(in)) {
      std::vector<std::string> found;
      for (const auto& e : fs::directory_iterator(in)) {
        if (e.path().extension() == ".kfsc") found.push_back(e.path().string());
      }
      std::sort(found.begin(), found.end());
      out.insert(out.end(), found.begin(), found.end());
    } else {
      out.push_back(in);
    }
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Scene-coordinate Kalman filter: simulate, run and evaluate"};
  app.require_subcommand(1);

  std::string out;

  CommonFlags sim_flags;
  CLI::App* sim = app.add_subcommand("simulate", "render a synthetic sequence to disk");
  sim_flags.add_to(sim);
  sim->add_option("--out", out, "output directory")->required();

  CommonFlags run_flags;
  std::string sequence;
  bool dump_diag = false, dump_flow = false, save_maps = false;
  CLI::App* run = app.add_subcommand("run", "filter a sequence and solve poses");
  run_flags.add_to(run);
  run->add_option("--out", out, "output directory")->required();
  run->add_option("--sequence", sequence, "sequence directory written by simulate");
  run->add_flag("--dump-diagnostics", dump_diag, "per-frame NIS / gain CSVs");
  run->add_flag("--dump-flow", dump_flow, "flow/*.ppm visualizations");
  run->add_flag("--save-maps", save_maps, "posteriors/*.kfsc for export-ply");

  CommonFlags suite_flags;
  std::string suite_name;
  CLI::App* suite = app.add_subcommand("suite", "run a named experiment grid");
  suite_flags.add_to(suite);
  suite->add_option("name", suite_name, "motion_blur, tracking_loss, fusion_ablation, calibration")
      ->required();
  suite->add_option("--out", out, "output directory")->required();

  std::vector<std::string> maps;
  double ply_lambda = 0.05;
  CLI::App* ply = app.add_subcommand("export-ply", "point cloud from saved posterior maps");
  ply->add_option("--maps", maps, "KFSC files or directories of them")->required();
  ply->add_option("--lambda", ply_lambda, "keep cells with sqrt(variance) <= lambda (m)");
  ply->add_option("--out", out, "output PLY path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (sim->parsed()) {
      Config cfg(sim_flags.config, sim_flags.overrides);
      sim_flags.apply(cfg);
      size_t n = 0;
      check(scf_simulate(cfg.get(), out.c_str(), &n), "simulate");
      std::printf("wrote %zu frames to %s\n", n, out.c_str());
    } else if (run->parsed()) {
      Config cfg(run_flags.config, run_flags.overrides);
      run_flags.apply(cfg);
      if (!sequence.empty()) cfg.set("sequence", toml_string(sequence));
      scf_run_options opts{out.c_str(), dump_diag, dump_flow, save_maps};
      scf_report* report = nullptr;
      check(scf_run(cfg.get(), &opts, &report), "run");
      print_metrics(report);
      scf_report_free(report);
    } else if (suite->parsed()) {
      Config cfg(suite_flags.config, suite_flags.overrides);
      suite_flags.apply(cfg);
      unsigned long long seed = suite_flags.seed.value_or(1);
      scf_suite* s = nullptr;
      check(scf_suite_run(suite_name.c_str(), cfg.get(), seed, out.c_str(), &s), "suite");
      for (size_t i = 0; i < scf_suite_metric_count(s); ++i) {
        const char* key = nullptr;
        double v = 0.0;
        scf_suite_metric_at(s, i, &key, &v);
        std::printf("%-36s %.6g\n", key, v);
      }
      scf_suite_free(s);
    } else if (ply->parsed()) {
      const std::vector<std::string> paths = collect_maps(maps);
      std::vector<const char*> ptrs;
      for (const auto& p : paths) ptrs.push_back(p.c_str());
      size_t points = 0;
      check(scf_export_ply(ptrs.data(), ptrs.size(), ply_lambda, out.c_str(), &points),
            "export-ply");
      std::printf("wrote %zu points from %zu maps to %s\n", points, paths.size(), out.c_str());
    }
  } catch (const Failure& f) {
    return f.code;
  }
  return 0;
}
