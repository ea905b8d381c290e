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

#include "scf/state_map.hpp"

#include <cmath>
#include <limits>

#include "scf/error.hpp"

namespace scf {

namespace {
const Eigen::Vector3d kNanCoord = Eigen::Vector3d::Constant(std::numeric_limits<double>::quiet_NaN());

double snap(double x) {
  const double r = std::round(x);
  return std::abs(x - r) < 1e-9 ? r : x;
}
}  // namespace

CoordStateMap::CoordStateMap(int rows, int cols)
    : coords(rows, cols, kNanCoord),
      log_variance(rows, cols, std::numeric_limits<double>::quiet_NaN()),
      valid(rows, cols, 0) {}

double CoordStateMap::variance(std::size_t i) const { return std::exp(log_variance[i]); }

void CoordStateMap::set(std::size_t i, const Eigen::Vector3d& mean, double var) {
  set_log(i, mean, std::log(var));
}

void CoordStateMap::set_log(std::size_t i, const Eigen::Vector3d& mean, double log_var) {
  coords[i] = mean;
  log_variance[i] = log_var;
  valid[i] = 1;
}

void CoordStateMap::invalidate(std::size_t i) {
  coords[i] = kNanCoord;
  log_variance[i] = std::numeric_limits<double>::quiet_NaN();
  valid[i] = 0;
}

std::size_t CoordStateMap::valid_count() const {
  std::size_t n = 0;
  for (auto v : valid.values()) n += v != 0;
  return n;
}

void CoordStateMap::check_invariants() const {
  if (!coords.same_shape(valid) || !log_variance.same_shape(valid)) {
    fail(ErrorCode::kShapeMismatch, "coordinate map planes disagree in shape");
  }
  for (std::size_t i = 0; i < size(); ++i) {
    if (!is_valid(i)) continue;
    const double var = variance(i);
    if (!coords[i].allFinite() || !std::isfinite(var) || !(var > 0.0)) {
      fail(ErrorCode::kNonFinite, "valid pixel " + std::to_string(i) + " is not finite");
    }
  }
}

FlowField::FlowField(int rows, int cols, int s)
    : offsets(rows, cols, Eigen::Vector2d::Zero()), valid(rows, cols, 0), stride(s) {}

bool bilinear_site(double row, double col, int rows, int cols, BilinearSite* site) {
  row = snap(row);
  col = snap(col);
  if (!std::isfinite(row) || !std::isfinite(col)) return false;
  const double r0 = std::floor(row);
  const double c0 = std::floor(col);
  site->r0 = static_cast<int>(r0);
  site->c0 = static_cast<int>(c0);
  site->fr = row - r0;
  site->fc = col - c0;
  if (site->r0 < 0 || site->c0 < 0 || site->r0 >= rows || site->c0 >= cols) return false;
  if (site->fr > 0.0 && site->r0 + 1 >= rows) return false;
  if (site->fc > 0.0 && site->c0 + 1 >= cols) return false;
  return true;
}

}  // namespace scf
