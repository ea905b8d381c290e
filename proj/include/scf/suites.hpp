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

#include <cstdint>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "scf/config.hpp"
#include "scf/pipeline.hpp"

namespace scf {

struct SuiteLane {
  std::string label;
  RunReport report;
};

struct SuiteReport {
  std::string name;
  std::uint64_t seed = 0;
  std::vector<SuiteLane> lanes;
  // Derived comparisons in insertion order, e.g. {"kalman_blur_factor_t", 3.4}.
  std::vector<std::pair<std::string, double>> summary;

  double value(const std::string& key) const;  // throws kInvalidArgument if absent
  const SuiteLane& lane(const std::string& label) const;
};

const std::vector<std::string>& suite_names();

// Grids:
//   motion_blur     {no blur, blur} x {kalman, measurement_only}; blur kernel
//                   and period from base (30 px every 10 frames when unset)
//   tracking_loss   kalman with and without the NIS gate on a trimmed
//                   sequence (frames [0.3 N, 0.4 N) when base has no trim)
//   fusion_ablation kalman, tpooler, sweight, measurement_only
//   calibration     honest noise on a fronto-parallel plane translated one
//                   cell per frame with ground-truth flow and no process
//                   noise; the gate is monitored but not applied, plus a
//                   gated lane for comparison
// seed replaces base.seed. With base.output_dir set, each lane writes its
// run outputs to <output_dir>/<label>. Throws kUnknownSuite.
SuiteReport run_experiment_suite(const std::string& name, const PipelineConfig& base,
                                 std::uint64_t seed, const RunOptions& opts = {});

// Median over the frames tagged blurred in `tagged`, taken from `report`
// (the same indices in a clean run). Failed frames count as +inf.
double blurred_frame_median(const RunReport& report, const RunReport& tagged, bool rotation);

// One row per lane.
void write_comparison_csv(std::ostream& os, const SuiteReport& report);
// metric,value rows of the summary.
void write_suite_summary_csv(std::ostream& os, const SuiteReport& report);
// Pose-error quantiles per lane at q = 0.05, 0.10, ..., 1.00.
void write_cdf_csv(std::ostream& os, const SuiteReport& report);
// comparison.csv, suite_summary.csv and cdf.csv under dir. Throws kIo.
void write_suite_outputs(const std::string& dir, const SuiteReport& report);

}  // namespace scf
