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
#include <optional>
#include <span>
#include <vector>

#include "scf/geometry.hpp"
#include "scf/state_map.hpp"

namespace scf {

struct Correspondence {
  Eigen::Vector2d pixel;  // full-resolution pixel
  Eigen::Vector3d point;  // world, meters
  double weight = 1.0;
};

struct RansacConfig {
  int max_iterations = 256;
  double inlier_threshold_px = 10.0;
  double confidence = 0.999;
  int min_inliers = 20;
  double lambda_m = 0.05;  // uncertainty gate on sqrt(variance)

  void validate() const;
};

struct PoseEstimate {
  Pose pose;
  std::vector<std::uint8_t> inlier_mask;
  int inlier_count = 0;
  int iterations_used = 0;
  double mean_reproj_err_px = 0.0;
};

// One correspondence per valid cell with sqrt(variance) <= lambda_m, at the
// cell center ((j+0.5)s, (i+0.5)s) with s = K.width / map width, weight
// 1/variance. Throws kTooFewCorrespondences below 4.
std::vector<Correspondence> gather_correspondences(const CoordStateMap& posterior,
                                                   const CameraIntrinsics& k, double lambda_m);

// Triangle area below which a world triple counts as collinear (m^2).
inline constexpr double kMinTriangleArea = 1e-8;

// All real solutions of the three-point absolute pose problem (distance
// equations reduced to a quartic, roots from the companion matrix and
// polished, then absolute orientation). Throws kDegenerateConfiguration.
std::vector<Pose> p3p_minimal(std::span<const Correspondence> corrs, const CameraIntrinsics& k);

// Squared reprojection error, +inf when the point is behind the camera.
double reprojection_error_sq(const Pose& pose, const Correspondence& c, const CameraIntrinsics& k);

// RANSAC over P3P samples scored by inlier count, ties by mean inlier error
// then iteration, with the confidence-based early exit, followed by a
// weighted refit on the inliers. Deterministic under seed. Throws
// kTooFewCorrespondences, kNoConsensus.
PoseEstimate ransac_pnp(std::span<const Correspondence> corrs, const CameraIntrinsics& k,
                        const RansacConfig& cfg, std::uint64_t seed);

struct RefineOptions {
  int max_iterations = 100;
  double gradient_tolerance = 1e-10;
  double step_tolerance = 1e-12;
};

struct RefineSummary {
  int iterations = 0;
  double initial_cost = 0.0;
  double final_cost = 0.0;
  std::vector<double> accepted_costs;
};

// Levenberg-Marquardt on sum_i w_i |pi(R X_i + t) - x_i|^2 with a left
// rotation increment. Weights are rescaled to unit mean (the minimizer does
// not change). Throws kDiverged.
Pose refine_pose(const Pose& initial, std::span<const Correspondence> inliers,
                 const CameraIntrinsics& k, const RefineOptions& opts = {},
                 RefineSummary* summary = nullptr);

// d(pixel)/d(omega, delta_t) at the given pose for the left increment used
// by retract(). nullopt behind the camera.
std::optional<Eigen::Matrix<double, 2, 6>> reprojection_jacobian(const Pose& pose,
                                                                 const Eigen::Vector3d& point,
                                                                 const CameraIntrinsics& k);

// --- metrics -----------------------------------------------------------------

struct PoseError {
  double translation_m;  // camera-center distance; +inf for a failed frame
  double rotation_deg;
};

PoseError pose_error(const Pose& estimate, const Pose& gt);

struct CoordErrorStats {
  double mean = 0.0;
  double stddev = 0.0;
  std::size_t pixels = 0;
};

// Mean / population stddev of |map - gt| over pixels valid in both.
CoordErrorStats coordinate_error(const CoordStateMap& map, const CoordStateMap& gt);

struct MetricsReport {
  std::vector<PoseError> errors;
  double median_translation_m = 0.0;
  double median_rotation_deg = 0.0;
  double accuracy_5cm_5deg = 0.0;
  std::optional<CoordErrorStats> coords;
};

struct PoseSample {
  std::optional<Pose> estimate;  // nullopt for a failed frame
  Pose gt;
};

// Throws kEmptyInput. Maps, when given, must pair up with the samples.
MetricsReport pose_metrics(std::span<const PoseSample> samples,
                           std::span<const CoordStateMap> maps = {},
                           std::span<const CoordStateMap> gt_maps = {});

double median(std::vector<double> values);

}  // namespace scf
