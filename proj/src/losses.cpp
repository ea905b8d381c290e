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

#include "scf/losses.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "scf/error.hpp"

namespace scf {

namespace {
void check_shapes(const CoordStateMap& a, const CoordStateMap& b) {
  if (!a.same_shape(b)) {
    fail(ErrorCode::kShapeMismatch, std::to_string(a.rows()) + "x" + std::to_string(a.cols()) +
                                        " vs " + std::to_string(b.rows()) + "x" +
                                        std::to_string(b.cols()));
  }
}
}  // namespace

LossResult gaussian_nll(const CoordStateMap& predicted, const CoordStateMap& gt) {
  check_shapes(predicted, gt);
  LossResult out;
  out.per_pixel = Grid<double>(gt.rows(), gt.cols(), std::numeric_limits<double>::quiet_NaN());
  for (std::size_t i = 0; i < gt.size(); ++i) {
    if (!predicted.is_valid(i) || !gt.is_valid(i)) continue;
    const double s = predicted.log_variance[i];
    const double sq = (predicted.coords[i] - gt.coords[i]).squaredNorm();
    // 3 log v = 1.5 s
    const double term = 1.5 * s + 0.5 * sq * std::exp(-s);
    if (!std::isfinite(term)) {
      fail(ErrorCode::kNonFinite, "loss is not finite at pixel " + std::to_string(i));
    }
    out.per_pixel[i] = term;
    out.total += term;
    ++out.pixels;
  }
  return out;
}

LossGradient gaussian_nll_grad(const CoordStateMap& predicted, const CoordStateMap& gt) {
  check_shapes(predicted, gt);
  LossGradient g;
  g.d_coords = Grid<Eigen::Vector3d>(gt.rows(), gt.cols(), Eigen::Vector3d::Zero());
  g.d_log_variance = Grid<double>(gt.rows(), gt.cols(), 0.0);
  for (std::size_t i = 0; i < gt.size(); ++i) {
    if (!predicted.is_valid(i) || !gt.is_valid(i)) continue;
    const double inv_var = std::exp(-predicted.log_variance[i]);
    const Eigen::Vector3d r = predicted.coords[i] - gt.coords[i];
    g.d_coords[i] = r * inv_var;
    g.d_log_variance[i] = 1.5 - 0.5 * r.squaredNorm() * inv_var;
    if (!g.d_coords[i].allFinite() || !std::isfinite(g.d_log_variance[i])) {
      fail(ErrorCode::kNonFinite, "gradient is not finite at pixel " + std::to_string(i));
    }
  }
  return g;
}

void LossWeights::validate() const {
  if (!(tau1 >= 0.0 && tau2 >= 0.0 && tau3 >= 0.0)) {
    fail(ErrorCode::kConfig, "loss weights must be nonnegative");
  }
  if (!(tau1 > 0.0 || tau2 > 0.0 || tau3 > 0.0)) {
    fail(ErrorCode::kConfig, "at least one loss weight must be positive");
  }
}

double full_loss(double likelihood, double prior, double posterior, const LossWeights& w) {
  if (!std::isfinite(likelihood) || !std::isfinite(prior) || !std::isfinite(posterior)) {
    fail(ErrorCode::kNonFinite, "component loss is not finite");
  }
  return w.tau1 * likelihood + w.tau2 * prior + w.tau3 * posterior;
}

}  // namespace scf
