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

#include "scf/state_map.hpp"

namespace scf {

enum class SigmaReport { kHonest, kMisreported };

// Synthetic stand-in for a learned per-pixel scene-coordinate regressor.
struct MeasurementOracleConfig {
  double inlier_sigma = 0.02;          // meters
  double outlier_ratio = 0.0;          // fraction in [0, 1]
  double outlier_spread = 0.5;         // radius of the uniform outlier ball, meters
  double boundary_sigma_boost = 3.0;   // >= 1, applied at depth discontinuities
  double boundary_threshold_m = 0.05;  // second-difference threshold for discontinuities
  SigmaReport reported_sigma_mode = SigmaReport::kHonest;
  double misreport_factor = 1.0;       // reported sigma = factor * true sigma
  // Degradation of frames tagged as blurred.
  double blurred_sigma_boost = 2.0;
  double blurred_outlier_ratio = 0.3;

  void validate() const;
};

using MeasurementMap = CoordStateMap;

// Cells whose 3x3 neighborhood departs from local planarity by more than
// threshold_m (second difference along any of the four directions), or that
// touch an invalid cell.
Grid<std::uint8_t> depth_discontinuities(const CoordStateMap& gt, double threshold_m);

// Per valid pixel: outlier (uniform ball) with probability outlier_ratio,
// else gt + N(0, sigma^2 I). Reported log-variance per reported_sigma_mode.
// Each pixel draws from its own counter-based stream keyed by (seed, index).
// Throws kEmptyMap when gt has no valid pixel.
MeasurementMap synthesize_measurement(const CoordStateMap& gt, const MeasurementOracleConfig& cfg,
                                      std::uint64_t seed, bool blurred = false);

}  // namespace scf
