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

#pragma once

#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "scf/config.hpp"
#include "scf/filtering.hpp"
#include "scf/pose_solver.hpp"

namespace scf {

struct FrameRecord {
  int index = 0;
  double timestamp = 0.0;
  bool blurred = false;
  bool trimmed_restart = false;

  bool pose_ok = false;
  std::string failure;  // error code name when the pose failed
  Pose estimate;
  Pose gt;
  PoseError error{0.0, 0.0};
  int correspondences = 0;
  int inliers = 0;
  int ransac_iterations = 0;
  double reproj_err_px = 0.0;

  CoordErrorStats coord;        // posterior vs ground truth
  CoordErrorStats measurement;  // raw measurement vs ground truth

  std::size_t fused = 0;
  std::size_t rejected = 0;
  // NIS above chi2_quantile(3, 1 - alpha) with alpha = nis_alpha, or 0.05
  // when gating is off; equals rejected when the gate is applied.
  std::size_t nis_exceeded = 0;

  std::size_t flow_cells = 0;   // cells with both flows valid
  std::size_t flow_within = 0;  // of those, error <= stride / 2

  // Mean per-pixel negative log-likelihoods; the prior term is 0 at frame 0.
  double loss_likelihood = 0.0;
  double loss_prior = 0.0;
  double loss_posterior = 0.0;
  double loss_full = 0.0;

  double millis = 0.0;  // wall time, not part of the CSV report

  double rejection_rate() const { return fused ? static_cast<double>(rejected) / fused : 0.0; }
};

struct RunReport {
  PipelineConfig config;
  std::vector<FrameRecord> frames;
  MetricsReport metrics;
  std::size_t fused = 0;
  std::size_t rejected = 0;
  std::size_t nis_exceeded = 0;
  std::size_t flow_cells = 0;
  std::size_t flow_within = 0;
  double mean_coord_error = 0.0;        // pixel-weighted over all frames
  double mean_measurement_error = 0.0;  // same, raw measurements
  double wall_seconds = 0.0;
  std::vector<CoordStateMap> posteriors;  // one per frame, cell resolution

  double rejection_rate() const { return fused ? static_cast<double>(rejected) / fused : 0.0; }
  double nis_exceed_rate() const {
    return fused ? static_cast<double>(nis_exceeded) / fused : 0.0;
  }
  double flow_accuracy() const {
    return flow_cells ? static_cast<double>(flow_within) / flow_cells : 0.0;
  }
};

struct RunOptions {
  bool write_outputs = true;  // only when config.output_dir is set
  bool dump_diagnostics = false;
  bool dump_flow = false;
  bool save_maps = false;  // posteriors/frame_NNNN.kfsc, input for export-ply
};

SceneModel build_scene(const PipelineConfig& cfg);
Trajectory build_trajectory(const PipelineConfig& cfg);

// Renders the configured sequence to dir in the SequenceWriter layout.
// Returns the number of frames written. Throws kIo and simulator errors.
std::size_t simulate_sequence(const PipelineConfig& cfg, const std::string& dir);

// The recursive loop over a live-simulated sequence, or over cfg.sequence
// when set. Frame 0 takes the measurement as its posterior. A frame whose
// pose cannot be solved is recorded as failed and the state still advances.
RunReport run_sequence(const PipelineConfig& cfg, const RunOptions& opts = {});

// Same result per config as run_sequence. Configs that agree on everything
// that shapes the frames and the flow are stepped together over one render.
std::vector<RunReport> run_sequences(std::span<const PipelineConfig> cfgs,
                                     const RunOptions& opts = {});

// Writes every valid cell with sqrt(variance) <= lambda_m across the maps.
// Returns the point count. Throws kEmptyInput, kIo.
std::size_t export_point_cloud(std::span<const CoordStateMap> maps, double lambda_m,
                               const std::string& path);

// --- reports ------------------------------------------------------------------

// Deterministic per-frame CSV (no timings).
void write_report_csv(std::ostream& os, const RunReport& report);
nlohmann::json summary_json(const RunReport& report);
// report.csv, summary.json and cloud.ply under dir.
void write_run_outputs(const std::string& dir, const RunReport& report);

// Compact number formatting shared by every CSV writer.
std::string fmt_num(double v);

}  // namespace scf
