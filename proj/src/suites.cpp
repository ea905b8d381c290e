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

#include "scf/suites.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>

#include "scf/error.hpp"
#include "scf/filtering.hpp"

namespace scf {

namespace fs = std::filesystem;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr int kPostTrimFrames = 5;

PipelineConfig lane_config(const PipelineConfig& base, std::uint64_t seed,
                           const std::string& label) {
  PipelineConfig c = base;
  c.seed = seed;
  if (!base.output_dir.empty()) c.output_dir = (fs::path(base.output_dir) / label).string();
  return c;
}

std::vector<SuiteLane> run_lanes(std::vector<std::pair<std::string, PipelineConfig>> grid,
                                 const RunOptions& opts) {
  std::vector<PipelineConfig> cfgs;
  for (const auto& [label, c] : grid) cfgs.push_back(c);
  std::vector<RunReport> reports = run_sequences(cfgs, opts);
  std::vector<SuiteLane> lanes;
  for (std::size_t i = 0; i < grid.size(); ++i) lanes.push_back({grid[i].first, std::move(reports[i])});
  return lanes;
}

double frame_error(const FrameRecord& f, bool rotation) {
  return rotation ? f.error.rotation_deg : f.error.translation_m;
}

std::size_t restart_index(const RunReport& r) {
  for (std::size_t i = 0; i < r.frames.size(); ++i) {
    if (r.frames[i].trimmed_restart) return i;
  }
  fail(ErrorCode::kEmptyInput, "sequence has no trimmed_restart frame");
}

double mean_error(const RunReport& r, std::size_t begin, std::size_t end) {
  double s = 0.0;
  for (std::size_t i = begin; i < end; ++i) s += r.frames[i].error.translation_m;
  return end > begin ? s / static_cast<double>(end - begin) : kInf;
}

SuiteReport motion_blur(const PipelineConfig& base, std::uint64_t seed, const RunOptions& opts) {
  PipelineConfig blurred = base;
  if (blurred.degradation.blur_kernel_px < 1) {
    blurred.degradation.blur_kernel_px = 30;
    blurred.degradation.blur_every_n = 10;
  }
  PipelineConfig clean = base;
  clean.degradation.blur_kernel_px = 0;

  std::vector<std::pair<std::string, PipelineConfig>> grid;
  for (FusionMode m : {FusionMode::kKalman, FusionMode::kMeasurementOnly}) {
    for (bool blur : {false, true}) {
      const std::string label = to_string(m) + std::string(blur ? "_blur" : "_clean");
      PipelineConfig c = lane_config(blur ? blurred : clean, seed, label);
      c.fusion_mode = m;
      grid.emplace_back(label, c);
    }
  }
  SuiteReport rep;
  rep.lanes = run_lanes(std::move(grid), opts);
  for (FusionMode m : {FusionMode::kKalman, FusionMode::kMeasurementOnly}) {
    const std::string name = to_string(m);
    const RunReport& c = rep.lane(name + "_clean").report;
    const RunReport& b = rep.lane(name + "_blur").report;
    for (bool rot : {false, true}) {
      const char* unit = rot ? "_r" : "_t";
      const double before = blurred_frame_median(c, b, rot);
      const double after = blurred_frame_median(b, b, rot);
      rep.summary.emplace_back(name + "_blurred_median_clean" + unit, before);
      rep.summary.emplace_back(name + "_blurred_median_blur" + unit, after);
      rep.summary.emplace_back(name + "_blur_factor" + unit, after / before);
      const double all_before = rot ? c.metrics.median_rotation_deg : c.metrics.median_translation_m;
      const double all_after = rot ? b.metrics.median_rotation_deg : b.metrics.median_translation_m;
      rep.summary.emplace_back(name + "_all_frame_factor" + unit, all_after / all_before);
    }
  }
  return rep;
}

SuiteReport tracking_loss(const PipelineConfig& base, std::uint64_t seed, const RunOptions& opts) {
  PipelineConfig trimmed = base;
  if (!trimmed.degradation.trim_range) {
    const int n = trimmed.trajectory.frames;
    trimmed.degradation.trim_range = std::make_pair(3 * n / 10, 4 * n / 10 - 1);
  }
  trimmed.fusion_mode = FusionMode::kKalman;
  PipelineConfig gated = lane_config(trimmed, seed, "gated");
  if (!gated.nis_alpha) gated.nis_alpha = 0.05;
  PipelineConfig ungated = lane_config(trimmed, seed, "ungated");
  ungated.nis_alpha.reset();

  SuiteReport rep;
  rep.lanes = run_lanes({{"gated", gated}, {"ungated", ungated}}, opts);
  for (const auto& lane : rep.lanes) {
    const RunReport& r = lane.report;
    const std::size_t k = restart_index(r);
    if (k == 0 || k + kPostTrimFrames > r.frames.size())
      fail(ErrorCode::kInvalidArgument, "trim leaves too few frames around the restart");
    const double pre = mean_error(r, 0, k);
    const double post = mean_error(r, k, k + kPostTrimFrames);
    rep.summary.emplace_back(lane.label + "_restart_frame", static_cast<double>(r.frames[k].index));
    rep.summary.emplace_back(lane.label + "_pre_trim_mean_t", pre);
    rep.summary.emplace_back(lane.label + "_post_trim_mean_t", post);
    rep.summary.emplace_back(lane.label + "_post_pre_ratio", post / pre);
    rep.summary.emplace_back(lane.label + "_restart_nis_rate",
                             r.frames[k].fused ? static_cast<double>(r.frames[k].nis_exceeded) /
                                                     static_cast<double>(r.frames[k].fused)
                                               : 0.0);
    if (k + 1 < r.frames.size()) {
      const FrameRecord& f = r.frames[k + 1];
      rep.summary.emplace_back(lane.label + "_next_nis_rate",
                               f.fused ? static_cast<double>(f.nis_exceeded) / f.fused : 0.0);
    }
  }
  return rep;
}

SuiteReport fusion_ablation(const PipelineConfig& base, std::uint64_t seed, const RunOptions& opts) {
  std::vector<std::pair<std::string, PipelineConfig>> grid;
  for (FusionMode m : {FusionMode::kKalman, FusionMode::kTPooler, FusionMode::kSWeight,
                       FusionMode::kMeasurementOnly}) {
    PipelineConfig c = lane_config(base, seed, to_string(m));
    c.fusion_mode = m;
    grid.emplace_back(to_string(m), c);
  }
  SuiteReport rep;
  rep.lanes = run_lanes(std::move(grid), opts);
  for (const auto& lane : rep.lanes) {
    rep.summary.emplace_back(lane.label + "_coord_err_mean", lane.report.mean_coord_error);
    rep.summary.emplace_back(lane.label + "_median_t", lane.report.metrics.median_translation_m);
    rep.summary.emplace_back(lane.label + "_median_r", lane.report.metrics.median_rotation_deg);
    rep.summary.emplace_back(lane.label + "_acc_5cm_5deg", lane.report.metrics.accuracy_5cm_5deg);
  }
  return rep;
}

SuiteReport calibration(const PipelineConfig& base, std::uint64_t seed, const RunOptions& opts) {
  PipelineConfig c = base;
  c.scene.kind = "plane";
  c.scene.occluders = 0;
  c.trajectory.kind = "translation";
  // One cell of image motion per frame keeps the warp on the grid.
  const double step = c.stride * c.scene.plane_z / c.camera.fx;
  c.trajectory.step = Eigen::Vector3d(step, 0.0, 0.0);
  const double half_view = 0.5 * c.camera.width / c.camera.fx * c.scene.plane_z + 0.5;
  c.scene.plane_x_min = std::min(c.scene.plane_x_min, -half_view);
  c.scene.plane_x_max = std::max(c.scene.plane_x_max, step * (c.trajectory.frames - 1) + half_view);
  c.degradation = DegradationConfig{};
  c.flow.source = FlowSource::kGroundTruth;
  c.process.base_w2 = 0.0;
  c.process.flow_gain = 0.0;
  c.measurement.outlier_ratio = 0.0;
  c.measurement.reported_sigma_mode = SigmaReport::kHonest;
  c.fusion_mode = FusionMode::kKalman;

  const double alpha = base.nis_alpha.value_or(0.05);
  PipelineConfig monitor = lane_config(c, seed, "monitor");
  monitor.nis_alpha.reset();
  PipelineConfig gated = lane_config(c, seed, "gated");
  gated.nis_alpha = alpha;

  SuiteReport rep;
  rep.lanes = run_lanes({{"monitor", monitor}, {"gated", gated}}, opts);
  const RunReport& m = rep.lane("monitor").report;
  // The monitor lane runs ungated, which counts exceedances at 0.05.
  rep.summary.emplace_back("alpha", 0.05);
  rep.summary.emplace_back("chi2_quantile", chi2_quantile(3.0, 0.95));
  rep.summary.emplace_back("monitor_pixels", static_cast<double>(m.fused));
  rep.summary.emplace_back("monitor_nis_rate", m.nis_exceed_rate());
  rep.summary.emplace_back("gated_rejection_rate", rep.lane("gated").report.rejection_rate());
  return rep;
}

void quantile_row(std::ostream& os, std::vector<double> v, double q) {
  std::sort(v.begin(), v.end());
  if (v.empty()) {
    os << "nan";
    return;
  }
  // Nearest rank.
  const std::size_t k =
      std::min(v.size() - 1, static_cast<std::size_t>(std::ceil(q * v.size() - 1e-9)) - 1);
  os << fmt_num(v[k]);
}

}  // namespace

double SuiteReport::value(const std::string& key) const {
  for (const auto& [k, v] : summary) {
    if (k == key) return v;
  }
  fail(ErrorCode::kInvalidArgument, "suite " + name + " has no metric " + key);
}

const SuiteLane& SuiteReport::lane(const std::string& label) const {
  for (const auto& l : lanes) {
    if (l.label == label) return l;
  }
  fail(ErrorCode::kInvalidArgument, "suite " + name + " has no lane " + label);
}

const std::vector<std::string>& suite_names() {
  static const std::vector<std::string> names = {"motion_blur", "tracking_loss", "fusion_ablation",
                                                 "calibration"};
  return names;
}

SuiteReport run_experiment_suite(const std::string& name, const PipelineConfig& base,
                                 std::uint64_t seed, const RunOptions& opts) {
  base.validate();
  SuiteReport rep;
  if (name == "motion_blur") rep = motion_blur(base, seed, opts);
  else if (name == "tracking_loss") rep = tracking_loss(base, seed, opts);
  else if (name == "fusion_ablation") rep = fusion_ablation(base, seed, opts);
  else if (name == "calibration") rep = calibration(base, seed, opts);
  else fail(ErrorCode::kUnknownSuite, "'" + name + "'");
  rep.name = name;
  rep.seed = seed;
  if (!base.output_dir.empty()) write_suite_outputs(base.output_dir, rep);
  return rep;
}

double blurred_frame_median(const RunReport& report, const RunReport& tagged, bool rotation) {
  std::vector<double> v;
  for (std::size_t i = 0; i < tagged.frames.size() && i < report.frames.size(); ++i) {
    if (tagged.frames[i].blurred) v.push_back(frame_error(report.frames[i], rotation));
  }
  if (v.empty()) fail(ErrorCode::kEmptyInput, "no blurred frames");
  return median(v);
}

void write_comparison_csv(std::ostream& os, const SuiteReport& report) {
  os << "suite,seed,lane,fusion_mode,blur_kernel_px,nis_gate,frames,failed_frames,median_t_m,"
        "median_r_deg,acc_5cm_5deg,coord_err_mean_m,meas_err_mean_m,rejection_rate,"
        "nis_exceed_rate,flow_accuracy\n";
  for (const auto& l : report.lanes) {
    const RunReport& r = l.report;
    std::size_t failed = 0;
    for (const auto& f : r.frames) failed += !f.pose_ok;
    os << report.name << ',' << report.seed << ',' << l.label << ','
       << to_string(r.config.fusion_mode) << ',' << r.config.degradation.blur_kernel_px << ','
       << (r.config.nis_alpha ? fmt_num(*r.config.nis_alpha) : "off") << ',' << r.frames.size()
       << ',' << failed << ',' << fmt_num(r.metrics.median_translation_m) << ','
       << fmt_num(r.metrics.median_rotation_deg) << ',' << fmt_num(r.metrics.accuracy_5cm_5deg)
       << ',' << fmt_num(r.mean_coord_error) << ',' << fmt_num(r.mean_measurement_error) << ','
       << fmt_num(r.rejection_rate()) << ',' << fmt_num(r.nis_exceed_rate()) << ','
       << fmt_num(r.flow_accuracy()) << '\n';
  }
}

void write_suite_summary_csv(std::ostream& os, const SuiteReport& report) {
  os << "metric,value\n";
  for (const auto& [k, v] : report.summary) os << k << ',' << fmt_num(v) << '\n';
}

void write_cdf_csv(std::ostream& os, const SuiteReport& report) {
  os << "lane,quantile,t_err_m,r_err_deg\n";
  for (const auto& l : report.lanes) {
    std::vector<double> t, r;
    for (const auto& f : l.report.frames) {
      t.push_back(f.error.translation_m);
      r.push_back(f.error.rotation_deg);
    }
    for (int k = 1; k <= 20; ++k) {
      const double q = 0.05 * k;
      os << l.label << ',' << fmt_num(q) << ',';
      quantile_row(os, t, q);
      os << ',';
      quantile_row(os, r, q);
      os << '\n';
    }
  }
}

void write_suite_outputs(const std::string& dir, const SuiteReport& report) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) fail(ErrorCode::kIo, "cannot create " + dir + ": " + ec.message());
  auto write = [&](const char* file, void (*fn)(std::ostream&, const SuiteReport&)) {
    const fs::path p = fs::path(dir) / file;
    std::ofstream os(p);
    if (!os) fail(ErrorCode::kIo, "cannot write " + p.string());
    fn(os, report);
    if (!os) fail(ErrorCode::kIo, "write failed for " + p.string());
  };
  write("comparison.csv", write_comparison_csv);
  write("suite_summary.csv", write_suite_summary_csv);
  write("cdf.csv", write_cdf_csv);
}

}  // namespace scf
