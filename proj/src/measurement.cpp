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

#include "scf/measurement.hpp"

#include <cmath>

#include "scf/error.hpp"
#include "scf/rng.hpp"

namespace scf {

void MeasurementOracleConfig::validate() const {
  if (!(inlier_sigma > 0.0)) fail(ErrorCode::kConfig, "measurement.inlier_sigma must be > 0");
  if (!(outlier_ratio >= 0.0 && outlier_ratio <= 1.0)) {
    fail(ErrorCode::kConfig, "measurement.outlier_ratio must be in [0, 1]");
  }
  if (!(blurred_outlier_ratio >= 0.0 && blurred_outlier_ratio <= 1.0)) {
    fail(ErrorCode::kConfig, "measurement.blurred_outlier_ratio must be in [0, 1]");
  }
  if (!(outlier_spread >= 0.0)) fail(ErrorCode::kConfig, "measurement.outlier_spread must be >= 0");
  if (!(boundary_sigma_boost >= 1.0) || !(blurred_sigma_boost >= 1.0)) {
    fail(ErrorCode::kConfig, "sigma boosts must be >= 1");
  }
  if (!(misreport_factor > 0.0)) fail(ErrorCode::kConfig, "measurement.misreport_factor must be > 0");
}

Grid<std::uint8_t> depth_discontinuities(const CoordStateMap& gt, double threshold_m) {
  Grid<std::uint8_t> out(gt.rows(), gt.cols(), 0);
  static constexpr int kDirs[4][2] = {{0, 1}, {1, 0}, {1, 1}, {1, -1}};
  for (int r = 0; r < gt.rows(); ++r) {
    for (int c = 0; c < gt.cols(); ++c) {
      const std::size_t i = gt.valid.index(r, c);
      if (!gt.is_valid(i)) continue;
      bool boundary = false;
      for (int dr = -1; dr <= 1 && !boundary; ++dr) {
        for (int dc = -1; dc <= 1; ++dc) {
          if (gt.valid.in_bounds(r + dr, c + dc) && !gt.valid(r + dr, c + dc)) {
            boundary = true;
            break;
          }
        }
      }
      for (const auto& d : kDirs) {
        if (boundary) break;
        const int r0 = r - d[0], c0 = c - d[1], r1 = r + d[0], c1 = c + d[1];
        if (!gt.valid.in_bounds(r0, c0) || !gt.valid.in_bounds(r1, c1)) continue;
        const Eigen::Vector3d second =
            gt.coords(r0, c0) + gt.coords(r1, c1) - 2.0 * gt.coords(r, c);
        boundary = second.norm() > threshold_m;
      }
      out[i] = boundary;
    }
  }
  return out;
}

MeasurementMap synthesize_measurement(const CoordStateMap& gt, const MeasurementOracleConfig& cfg,
                                      std::uint64_t seed, bool blurred) {
  cfg.validate();
  if (gt.valid_count() == 0) fail(ErrorCode::kEmptyMap, "ground truth has no valid pixel");
  const auto boundary = depth_discontinuities(gt, cfg.boundary_threshold_m);
  const double outlier_ratio = blurred ? std::max(cfg.outlier_ratio, cfg.blurred_outlier_ratio)
                                       : cfg.outlier_ratio;
  const double frame_boost = blurred ? cfg.blurred_sigma_boost : 1.0;
  const double report_factor =
      cfg.reported_sigma_mode == SigmaReport::kMisreported ? cfg.misreport_factor : 1.0;

  MeasurementMap z(gt.rows(), gt.cols());
  for (std::size_t i = 0; i < gt.size(); ++i) {
    if (!gt.is_valid(i)) continue;
    CounterRng rng(seed, i);
    const double sigma =
        cfg.inlier_sigma * frame_boost * (boundary[i] ? cfg.boundary_sigma_boost : 1.0);
    Eigen::Vector3d value;
    if (rng.uniform() < outlier_ratio) {
      Eigen::Vector3d dir = rng.normal3();
      while (dir.norm() < 1e-12) dir = rng.normal3();
      const double radius = cfg.outlier_spread * std::cbrt(rng.uniform());
      value = gt.coords[i] + radius * dir.normalized();
    } else {
      value = gt.coords[i] + sigma * rng.normal3();
    }
    const double reported = report_factor * sigma;
    z.set_log(i, value, 2.0 * std::log(reported));
  }
  return z;
}

}  // namespace scf
