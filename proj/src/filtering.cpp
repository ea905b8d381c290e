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

#include "scf/filtering.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "scf/error.hpp"

namespace scf {

PixelFusion fuse_pixel(const PixelGaussian& prior, const PixelGaussian& meas) {
  PixelFusion f;
  const double r2 = prior.variance;
  const double v2 = meas.variance;
  const double s = v2 + r2;
  f.innovation = meas.mean - prior.mean;
  f.gain = r2 / s;
  f.nis = f.innovation.squaredNorm() / s;
  f.posterior.mean = prior.mean + f.gain * f.innovation;
  // r^2 (1 - k) written without the cancellation in 1 - k.
  f.posterior.variance = r2 * (v2 / s);
  return f;
}

std::size_t FusionDiagnostics::fused_count() const {
  std::size_t n = 0;
  for (auto v : fused.values()) n += v != 0;
  return n;
}

std::size_t FusionDiagnostics::rejected_count() const {
  std::size_t n = 0;
  for (auto v : nis_rejected.values()) n += v != 0;
  return n;
}

std::size_t FusionDiagnostics::exceed_count(double alpha) const {
  const double gate = chi2_quantile(3.0, 1.0 - alpha);
  std::size_t n = 0;
  for (std::size_t i = 0; i < nis.size(); ++i) n += fused[i] && nis[i] > gate;
  return n;
}

KalmanResult kalman_update(const CoordStateMap& prior, const CoordStateMap& meas,
                           std::optional<double> nis_alpha) {
  if (!prior.same_shape(meas)) fail(ErrorCode::kShapeMismatch, "prior and measurement differ in shape");
  double gate = std::numeric_limits<double>::infinity();
  if (nis_alpha) gate = chi2_quantile(3.0, 1.0 - *nis_alpha);

  const int rows = prior.rows(), cols = prior.cols();
  const double nan = std::numeric_limits<double>::quiet_NaN();
  KalmanResult out;
  out.posterior = CoordStateMap(rows, cols);
  auto& d = out.diagnostics;
  d.innovation = Grid<Eigen::Vector3d>(rows, cols, Eigen::Vector3d::Constant(nan));
  d.kalman_gain = Grid<double>(rows, cols, nan);
  d.nis = Grid<double>(rows, cols, nan);
  d.nis_rejected = Grid<std::uint8_t>(rows, cols, 0);
  d.fused = Grid<std::uint8_t>(rows, cols, 0);

  for (std::size_t i = 0; i < prior.size(); ++i) {
    const bool hp = prior.is_valid(i), hm = meas.is_valid(i);
    if (hp && hm) {
      const PixelFusion f = fuse_pixel({prior.coords[i], prior.variance(i)},
                                       {meas.coords[i], meas.variance(i)});
      d.innovation[i] = f.innovation;
      d.kalman_gain[i] = f.gain;
      d.nis[i] = f.nis;
      d.fused[i] = 1;
      if (f.nis > gate) {
        // Prior treated as infinitely uncertain: measurement only.
        d.nis_rejected[i] = 1;
        out.posterior.set_log(i, meas.coords[i], meas.log_variance[i]);
      } else {
        out.posterior.set(i, f.posterior.mean, f.posterior.variance);
      }
    } else if (hm) {
      out.posterior.set_log(i, meas.coords[i], meas.log_variance[i]);
    } else if (hp) {
      out.posterior.set_log(i, prior.coords[i], prior.log_variance[i]);
    }
  }
  return out;
}

CoordStateMap fuse_baseline(std::span<const CoordStateMap> neighbors, const CoordStateMap& meas,
                            BaselineMode mode, double sim_temp) {
  if (neighbors.empty()) fail(ErrorCode::kInvalidArgument, "at least one neighbor is required");
  for (const auto& n : neighbors) {
    if (!n.same_shape(meas)) fail(ErrorCode::kShapeMismatch, "neighbor and measurement differ in shape");
  }
  if (mode == BaselineMode::kSWeight && !(sim_temp > 0.0)) {
    fail(ErrorCode::kInvalidArgument, "sim_temp must be positive");
  }
  CoordStateMap out(meas.rows(), meas.cols());
  std::vector<const CoordStateMap*> cands;
  std::vector<double> logits;
  for (std::size_t i = 0; i < meas.size(); ++i) {
    cands.clear();
    for (const auto& n : neighbors) {
      if (n.is_valid(i)) cands.push_back(&n);
    }
    if (meas.is_valid(i)) cands.push_back(&meas);
    if (cands.empty()) continue;
    if (cands.size() == 1) {
      out.set_log(i, cands[0]->coords[i], cands[0]->log_variance[i]);
      continue;
    }
    const double count = static_cast<double>(cands.size());
    Eigen::Vector3d mean = Eigen::Vector3d::Zero();
    double var = 0.0;
    if (mode == BaselineMode::kTPooler || !meas.is_valid(i)) {
      for (const auto* c : cands) {
        mean += c->coords[i];
        var += c->variance(i);
      }
      mean /= count;
      var /= count * count;
    } else {
      logits.clear();
      double hi = -std::numeric_limits<double>::infinity();
      for (const auto* c : cands) {
        logits.push_back(-(c->coords[i] - meas.coords[i]).squaredNorm() / sim_temp);
        hi = std::max(hi, logits.back());
      }
      double z = 0.0;
      for (auto& l : logits) z += (l = std::exp(l - hi));
      for (std::size_t j = 0; j < cands.size(); ++j) {
        const double w = logits[j] / z;
        mean += w * cands[j]->coords[i];
        var += w * w * cands[j]->variance(i);
      }
    }
    out.set(i, mean, var);
  }
  return out;
}

}  // namespace scf
