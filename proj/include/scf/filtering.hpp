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

#include <optional>
#include <span>
#include <vector>

#include "scf/state_map.hpp"

namespace scf {

// --- chi-square ----------------------------------------------------------

// Regularized lower incomplete gamma P(a, x).
double regularized_gamma_p(double a, double x);
double chi2_cdf(double dof, double x);
// x with chi2_cdf(dof, x) = p, by bisection to 1e-12 absolute. Throws
// kBadProbability unless p is in (0, 1).
double chi2_quantile(double dof, double p);

// --- Kalman fusion ---------------------------------------------------------

struct PixelGaussian {
  Eigen::Vector3d mean;
  double variance;
};

struct PixelFusion {
  PixelGaussian posterior;
  Eigen::Vector3d innovation;
  double gain;
  double nis;
};

// e = z - prior, k = r^2 / (v^2 + r^2), mean = prior + k e, var = r^2 (1 - k),
// NIS = |e|^2 / (v^2 + r^2).
PixelFusion fuse_pixel(const PixelGaussian& prior, const PixelGaussian& measurement);

struct FusionDiagnostics {
  Grid<Eigen::Vector3d> innovation;
  Grid<double> kalman_gain;
  Grid<double> nis;
  Grid<std::uint8_t> nis_rejected;
  Grid<std::uint8_t> fused;  // pixels where both inputs were valid

  std::size_t fused_count() const;
  std::size_t rejected_count() const;
  // Fused pixels whose NIS exceeds chi2_quantile(3, 1 - alpha), whether or
  // not the gate was applied.
  std::size_t exceed_count(double alpha) const;
};

struct KalmanResult {
  CoordStateMap posterior;
  FusionDiagnostics diagnostics;
};

// Per-pixel update. With a gate (nis_alpha in (0, 1)), pixels whose NIS
// exceeds chi2_quantile(3, 1 - alpha) drop the prior and take the
// measurement alone. Pixels valid in one input pass through. nullopt
// disables gating. Throws kShapeMismatch, kBadProbability.
KalmanResult kalman_update(const CoordStateMap& prior, const CoordStateMap& measurement,
                           std::optional<double> nis_alpha = 0.05);

// --- temporal aggregation baselines -----------------------------------------

enum class BaselineMode { kTPooler, kSWeight };

// Per pixel over the valid candidates {neighbors..., measurement}:
//   tpooler: plain mean of means, variance = mean variance / count
//   sweight: weights softmax(-|mean_j - z|^2 / sim_temp), convex mean,
//            variance sum_j w_j^2 var_j (tpooler's rule for uniform weights)
// Pixels without a valid measurement pool the neighbors only.
CoordStateMap fuse_baseline(std::span<const CoordStateMap> warped_neighbors,
                            const CoordStateMap& current_measurement, BaselineMode mode,
                            double sim_temp = 1e-3);

}  // namespace scf
