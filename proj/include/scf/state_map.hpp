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
#include <span>
#include <vector>

#include <Eigen/Core>

namespace scf {

// Dense row-major 2D container.
template <typename T>
class Grid {
 public:
  Grid() = default;
  Grid(int rows, int cols, const T& init = T{})
      : rows_(rows), cols_(cols), data_(static_cast<std::size_t>(rows) * cols, init) {}

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool same_shape(int rows, int cols) const { return rows_ == rows && cols_ == cols; }
  template <typename U>
  bool same_shape(const Grid<U>& other) const { return same_shape(other.rows(), other.cols()); }

  std::size_t index(int r, int c) const { return static_cast<std::size_t>(r) * cols_ + c; }
  bool in_bounds(int r, int c) const { return r >= 0 && c >= 0 && r < rows_ && c < cols_; }

  T& operator()(int r, int c) { return data_[index(r, c)]; }
  const T& operator()(int r, int c) const { return data_[index(r, c)]; }
  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  std::span<T> values() { return data_; }
  std::span<const T> values() const { return data_; }

  bool operator==(const Grid&) const = default;

 private:
  int rows_ = 0;
  int cols_ = 0;
  std::vector<T> data_;
};

using Image = Grid<float>;

// Per-pixel isotropic Gaussian over 3D scene coordinates. The same container
// carries measurements (z, v^2), priors (mean, r^2), posteriors and labels.
// Invalid pixels hold NaN coordinates and are excluded from every reduction.
struct CoordStateMap {
  Grid<Eigen::Vector3d> coords;
  Grid<double> log_variance;
  Grid<std::uint8_t> valid;

  CoordStateMap() = default;
  CoordStateMap(int rows, int cols);

  int rows() const { return valid.rows(); }
  int cols() const { return valid.cols(); }
  std::size_t size() const { return valid.size(); }
  bool same_shape(const CoordStateMap& o) const { return valid.same_shape(o.valid); }

  bool is_valid(std::size_t i) const { return valid[i] != 0; }
  double variance(std::size_t i) const;
  void set(std::size_t i, const Eigen::Vector3d& mean, double variance);
  void set_log(std::size_t i, const Eigen::Vector3d& mean, double log_variance);
  void invalidate(std::size_t i);
  std::size_t valid_count() const;

  // Throws kNonFinite if a valid pixel has non-finite coordinates or variance.
  void check_invariants() const;
};

// Per-cell displacement from frame t-1 to frame t, in full-resolution pixels.
// A cell at p in frame t came from p - offset in frame t-1.
struct FlowField {
  Grid<Eigen::Vector2d> offsets;
  Grid<std::uint8_t> valid;
  int stride = 1;

  FlowField() = default;
  FlowField(int rows, int cols, int stride);

  int rows() const { return valid.rows(); }
  int cols() const { return valid.cols(); }
  std::size_t size() const { return valid.size(); }
  bool is_valid(std::size_t i) const { return valid[i] != 0; }
};

// Bilinear sample location in cell-index space. Weights that are zero drop the
// corresponding neighbor, so integer locations need only one valid cell.
struct BilinearSite {
  int r0 = 0, c0 = 0;
  double fr = 0.0, fc = 0.0;
};

// Resolves a fractional cell location; false when a needed neighbor is out of
// bounds. Locations within 1e-9 of an integer snap to it.
bool bilinear_site(double row, double col, int rows, int cols, BilinearSite* site);

}  // namespace scf
