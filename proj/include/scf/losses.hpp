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

#include "scf/state_map.hpp"

namespace scf {

// Isotropic 3D Gaussian negative log-likelihood of labels under a predicted
// (mean, variance) map, up to the constant term:
//   sum_i 3 log v_i + |mean_i - y_i|^2 / (2 v_i^2),  v_i^2 = exp(log_variance_i)
// over pixels valid in both maps. The measurement (likelihood), prior and
// posterior losses all share this evaluator.
struct LossResult {
  double total = 0.0;
  Grid<double> per_pixel;  // NaN where not evaluated
  std::size_t pixels = 0;
};

struct LossGradient {
  Grid<Eigen::Vector3d> d_coords;  // dL/d mean
  Grid<double> d_log_variance;     // dL/d s, s = log v^2
};

// Throws kShapeMismatch, or kNonFinite when a valid pixel evaluates to NaN/Inf.
LossResult gaussian_nll(const CoordStateMap& predicted, const CoordStateMap& gt);
LossGradient gaussian_nll_grad(const CoordStateMap& predicted, const CoordStateMap& gt);

inline LossResult likelihood_loss(const CoordStateMap& z, const CoordStateMap& gt) {
  return gaussian_nll(z, gt);
}
inline LossGradient likelihood_loss_grad(const CoordStateMap& z, const CoordStateMap& gt) {
  return gaussian_nll_grad(z, gt);
}
inline LossResult prior_loss(const CoordStateMap& prior, const CoordStateMap& gt) {
  return gaussian_nll(prior, gt);
}
inline LossGradient prior_loss_grad(const CoordStateMap& prior, const CoordStateMap& gt) {
  return gaussian_nll_grad(prior, gt);
}
inline LossResult posterior_loss(const CoordStateMap& posterior, const CoordStateMap& gt) {
  return gaussian_nll(posterior, gt);
}
inline LossGradient posterior_loss_grad(const CoordStateMap& posterior, const CoordStateMap& gt) {
  return gaussian_nll_grad(posterior, gt);
}

struct LossWeights {
  double tau1 = 0.2;  // likelihood
  double tau2 = 0.2;  // prior
  double tau3 = 0.6;  // posterior

  void validate() const;
};

// tau1 * likelihood + tau2 * prior + tau3 * posterior. Throws kNonFinite.
double full_loss(double likelihood, double prior, double posterior, const LossWeights& w);

}  // namespace scf
