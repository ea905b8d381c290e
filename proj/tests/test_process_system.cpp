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

#include <cmath>
#include <filesystem>

#include <gtest/gtest.h>

#include "scf/losses.hpp"
#include "scf/process.hpp"
#include "scf/simulator.hpp"
#include "test_util.hpp"

namespace scf {
namespace {

using testing::rel_err;

constexpr double kNormTol = 1e-6;
constexpr double kExactTol = 1e-9;
// Descriptors are float; a sum of ~66 float terms carries about 1e-6 relative error.
constexpr double kFloatCostRelTol = 1e-5;

Image room_image(int frame = 0) {
  const Trajectory tr = make_sweep_trajectory(frame + 1, 30.0);
  return render_frame(make_room_scene(3), tr.poses[frame], CameraIntrinsics{}, 0.0).image;
}

// Copy of img moved right by dx and down by dy; uncovered pixels are clamped.
Image shifted(const Image& img, int dy, int dx) {
  Image out(img.rows(), img.cols());
  for (int r = 0; r < img.rows(); ++r) {
    for (int c = 0; c < img.cols(); ++c) {
      out(r, c) = img(std::clamp(r - dy, 0, img.rows() - 1), std::clamp(c - dx, 0, img.cols() - 1));
    }
  }
  return out;
}

void expect_unit_descriptors(const FeatureMap& f) {
  std::size_t defined = 0;
  for (int r = 0; r < f.rows; ++r) {
    for (int c = 0; c < f.cols; ++c) {
      if (!f.is_defined(r, c)) continue;
      ++defined;
      double n2 = 0.0;
      for (int k = 0; k < f.channels; ++k) n2 += static_cast<double>(f.at(r, c)[k]) * f.at(r, c)[k];
      ASSERT_NEAR(std::sqrt(n2), 1.0, kNormTol);
    }
  }
  EXPECT_GT(defined, static_cast<std::size_t>(f.rows * f.cols) / 2);
}

TEST(Features, ConstantImageUndefined) {
  const Image img(64, 80, 0.4f);
  for (const FeatureMap& f : {extract_features(img, 8), extract_dense_features(img, 8, 2),
                              extract_context_features(img, 8, 8, ContextDescriptor{})}) {
    for (auto d : f.defined) EXPECT_EQ(d, 0);
  }
}

TEST(Features, UnitNorm) {
  const Image img = room_image();
  const FeatureMap f = extract_features(img, 8);
  EXPECT_EQ(f.rows, 30);
  EXPECT_EQ(f.cols, 40);
  EXPECT_EQ(f.channels, 66);
  expect_unit_descriptors(f);
  expect_unit_descriptors(extract_dense_features(img, 8, 1));
  const FeatureMap ctx = extract_context_features(img, 8, 8, ContextDescriptor{});
  EXPECT_EQ(ctx.rows, 30);
  EXPECT_EQ(ctx.channels, 66);
  expect_unit_descriptors(ctx);
  const FeatureMap dense_ctx = extract_context_features(img, 8, 1, ContextDescriptor{});
  EXPECT_EQ(dense_ctx.rows, 233);
  EXPECT_EQ(dense_ctx.cols, 313);
  expect_unit_descriptors(dense_ctx);
}

TEST(Features, DescriptorLayout) {
  // Independent recomputation of one cell: mean-removed patch then pooled Sobel.
  const Image img = room_image();
  const int s = 8, r = 11, c = 17;
  const FeatureMap f = extract_features(img, s);
  std::vector<double> d;
  double mean = 0.0;
  for (int y = 0; y < s; ++y) {
    for (int x = 0; x < s; ++x) mean += img(r * s + y, c * s + x);
  }
  mean /= s * s;
  for (int y = 0; y < s; ++y) {
    for (int x = 0; x < s; ++x) d.push_back(img(r * s + y, c * s + x) - mean);
  }
  double gx = 0.0, gy = 0.0;
  for (int y = 0; y < s; ++y) {
    for (int x = 0; x < s; ++x) {
      auto p = [&](int dy, int dx) { return static_cast<double>(img(r * s + y + dy, c * s + x + dx)); };
      gx += (p(-1, 1) + 2 * p(0, 1) + p(1, 1)) - (p(-1, -1) + 2 * p(0, -1) + p(1, -1));
      gy += (p(1, -1) + 2 * p(1, 0) + p(1, 1)) - (p(-1, -1) + 2 * p(-1, 0) + p(-1, 1));
    }
  }
  d.push_back(gx / (s * s));
  d.push_back(gy / (s * s));
  double n = 0.0;
  for (double v : d) n += v * v;
  n = std::sqrt(n);
  ASSERT_TRUE(f.is_defined(r, c));
  for (int k = 0; k < f.channels; ++k) EXPECT_NEAR(f.at(r, c)[k], d[k] / n, 1e-6);
}

TEST(Features, ShiftByStrideShiftsGrid) {
  const Image img = room_image();
  const int s = 8;
  const Image moved = shifted(img, s, s);
  const FeatureMap a = extract_features(img, s);
  const FeatureMap b = extract_features(moved, s);
  for (int r = 1; r < a.rows - 2; ++r) {
    for (int c = 1; c < a.cols - 2; ++c) {
      ASSERT_EQ(a.is_defined(r, c), b.is_defined(r + 1, c + 1));
      for (int k = 0; k < a.channels; ++k) ASSERT_NEAR(a.at(r, c)[k], b.at(r + 1, c + 1)[k], 1e-6);
    }
  }
}

TEST(Features, ContextShiftByStrideShiftsGrid) {
  const Image img = room_image();
  const int s = 8;
  const Image moved = shifted(img, s, s);
  const ContextDescriptor desc;
  const FeatureMap a = extract_context_features(img, s, s, desc);
  const FeatureMap b = extract_context_features(moved, s, s, desc);
  // The footprint reaches 2 * 2 * smooth_radius + (grid - 1) * spacing / 2
  // pixels past the block, under 7 cells.
  for (int r = 7; r < a.rows - 8; ++r) {
    for (int c = 7; c < a.cols - 8; ++c) {
      ASSERT_EQ(a.is_defined(r, c), b.is_defined(r + 1, c + 1));
      for (int k = 0; k < a.channels; ++k) ASSERT_NEAR(a.at(r, c)[k], b.at(r + 1, c + 1)[k], 1e-6);
    }
  }
}

TEST(Features, Errors) {
  const Image img(60, 80, 0.5f);
  EXPECT_SCF_ERROR(extract_features(img, 7), ErrorCode::kBadStride);
  EXPECT_SCF_ERROR(extract_features(img, 0), ErrorCode::kBadStride);
  EXPECT_SCF_ERROR(extract_dense_features(img, 100, 1), ErrorCode::kBadStride);
  EXPECT_SCF_ERROR(extract_context_features(img, 7, 7, ContextDescriptor{}), ErrorCode::kBadStride);
  EXPECT_SCF_ERROR(extract_context_features(img, 4, 4, ContextDescriptor{8, 0, 4}), ErrorCode::kConfig);
}

// Hand-built map of orthonormal basis descriptors, for exact cost checks.
FeatureMap basis_map(int rows, int cols, int channels, int shift) {
  FeatureMap f;
  f.rows = rows;
  f.cols = cols;
  f.channels = channels;
  f.stride = 8;
  f.patch = 8;
  f.data.assign(static_cast<std::size_t>(rows) * cols * channels, 0.0f);
  f.defined.assign(static_cast<std::size_t>(rows) * cols, 1);
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      f.data[(static_cast<std::size_t>(r) * cols + c) * channels + (r * cols + c + shift) % channels] = 1.0f;
    }
  }
  return f;
}

TEST(CostVolume, SelfMatchIsZero) {
  const FeatureMap f = extract_features(room_image(), 8);
  const CostVolume v = build_cost_volume(f, f, 5);
  EXPECT_EQ(v.window(), 5);
  for (int r = 0; r < v.rows; ++r) {
    for (int c = 0; c < v.cols; ++c) {
      if (!f.is_defined(r, c)) continue;
      const std::size_t s = v.cell_base(r, c) + v.slot(0, 0);
      EXPECT_FALSE(v.masked[s]);
      EXPECT_EQ(v.costs[s], 0.0);
    }
  }
}

TEST(CostVolume, IdenticalDescriptorsCostNothing) {
  FeatureMap f = basis_map(6, 7, 4, 0);
  for (std::size_t i = 0; i < f.data.size(); ++i) f.data[i] = (i % 4 == 1) ? 1.0f : 0.0f;
  const CostVolume v = build_cost_volume(f, f, 3);
  std::size_t unmasked = 0;
  for (std::size_t s = 0; s < v.costs.size(); ++s) {
    if (v.masked[s]) continue;
    ++unmasked;
    EXPECT_EQ(v.costs[s], 0.0);
  }
  EXPECT_GT(unmasked, 0u);
}

TEST(CostVolume, MatchesDirectLoop) {
  const FeatureMap prev = basis_map(5, 6, 7, 0);
  const FeatureMap cur = basis_map(5, 6, 7, 3);
  const CostVolume v = build_cost_volume(prev, cur, 5);
  for (int r = 0; r < v.rows; ++r) {
    for (int c = 0; c < v.cols; ++c) {
      for (int dy = -2; dy <= 2; ++dy) {
        for (int dx = -2; dx <= 2; ++dx) {
          const std::size_t s = v.cell_base(r, c) + v.slot(dy, dx);
          const int pr = r - dy, pc = c - dx;
          const bool out = pr < 0 || pc < 0 || pr >= prev.rows || pc >= prev.cols;
          ASSERT_EQ(v.masked[s] != 0, out);
          if (out) continue;
          double l1 = 0.0;
          for (int k = 0; k < 7; ++k) l1 += std::abs(double{cur.at(r, c)[k]} - prev.at(pr, pc)[k]);
          EXPECT_NEAR(v.costs[s], l1, kExactTol);
          EXPECT_GE(v.costs[s], 0.0);
        }
      }
    }
  }
}

TEST(CostVolume, ExtractedFeaturesMatchDoubleLoop) {
  const FeatureMap prev = extract_features(room_image(0), 8);
  const FeatureMap cur = extract_features(room_image(3), 8);
  const CostVolume v = build_cost_volume(prev, cur, 7);
  for (int r = 0; r < v.rows; r += 3) {
    for (int c = 0; c < v.cols; c += 3) {
      if (!cur.is_defined(r, c)) continue;
      for (int dy = -3; dy <= 3; ++dy) {
        for (int dx = -3; dx <= 3; ++dx) {
          const int pr = r - dy, pc = c - dx;
          if (pr < 0 || pc < 0 || pr >= prev.rows || pc >= prev.cols || !prev.is_defined(pr, pc)) continue;
          double l1 = 0.0;
          for (int k = 0; k < cur.channels; ++k) {
            l1 += std::abs(double{cur.at(r, c)[k]} - prev.at(pr, pc)[k]);
          }
          EXPECT_LE(rel_err(v.costs[v.cell_base(r, c) + v.slot(dy, dx)], l1), kFloatCostRelTol);
        }
      }
    }
  }
}

TEST(CostVolume, FinerSearchLattice) {
  // prev on a 1 px lattice against 8 px cells: offset o reads prev block (8r - dy, 8c - dx).
  const Image img = room_image();
  const FeatureMap dense = extract_dense_features(img, 8, 1);
  const FeatureMap cells = extract_features(img, 8);
  const CostVolume v = build_cost_volume(dense, cells, 9);
  EXPECT_EQ(v.stride, 1);
  EXPECT_EQ(v.cell_stride, 8);
  EXPECT_EQ(v.rows, cells.rows);
  // The block at offset zero is the cell itself.
  for (int r = 1; r < v.rows - 1; ++r) {
    for (int c = 1; c < v.cols - 1; ++c) {
      if (!cells.is_defined(r, c)) continue;
      EXPECT_NEAR(v.costs[v.cell_base(r, c) + v.slot(0, 0)], 0.0, 1e-5);
    }
  }
  const FlowField flow = flow_from_volume(v, 0.01);
  EXPECT_EQ(flow.stride, 8);
}

TEST(CostVolume, Errors) {
  const FeatureMap a = basis_map(4, 4, 5, 0);
  EXPECT_SCF_ERROR(build_cost_volume(a, a, 4), ErrorCode::kInvalidArgument);
  EXPECT_SCF_ERROR(build_cost_volume(a, basis_map(4, 5, 5, 0), 3), ErrorCode::kShapeMismatch);
  EXPECT_SCF_ERROR(build_cost_volume(a, basis_map(4, 4, 6, 0), 3), ErrorCode::kShapeMismatch);
}

CostVolume volume_from(const std::vector<double>& costs, int radius, int stride = 1) {
  CostVolume v;
  v.rows = v.cols = 1;
  v.radius = radius;
  v.stride = stride;
  v.cell_stride = stride;
  v.costs = costs;
  v.masked.assign(costs.size(), 0);
  return v;
}

TEST(SoftmaxFlow, EqualCostsGiveZero) {
  const FlowField f = flow_from_volume(volume_from(std::vector<double>(25, 0.7), 2), 0.05);
  ASSERT_TRUE(f.is_valid(0));
  EXPECT_NEAR(f.offsets[0].norm(), 0.0, 1e-15);
}

TEST(SoftmaxFlow, ArgmaxLimit) {
  std::vector<double> costs(25, 1.0);
  const CostVolume v0 = volume_from(costs, 2);
  costs[v0.slot(-1, 2)] = 0.0;  // dy = -1, dx = 2
  const FlowField f = flow_from_volume(volume_from(costs, 2, 8), 1e-4);
  EXPECT_NEAR(f.offsets[0].x(), 16.0, 1e-12);
  EXPECT_NEAR(f.offsets[0].y(), -8.0, 1e-12);
}

TEST(SoftmaxFlow, MatchesDirectLoopAndShiftInvariant) {
  CounterRng rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> costs(25);
    for (auto& c : costs) c = 2.0 * rng.uniform();
    const double t = 0.05 + rng.uniform();
    const CostVolume v = volume_from(costs, 2);
    double z = 0.0, ex = 0.0, ey = 0.0;
    for (int dy = -2; dy <= 2; ++dy) {
      for (int dx = -2; dx <= 2; ++dx) {
        const double w = std::exp(-costs[v.slot(dy, dx)] / t);
        z += w;
        ex += w * dx;
        ey += w * dy;
      }
    }
    const FlowField f = flow_from_volume(v, t);
    EXPECT_NEAR(f.offsets[0].x(), ex / z, kExactTol);
    EXPECT_NEAR(f.offsets[0].y(), ey / z, kExactTol);

    // A constant added to every confidence -cost/T.
    std::vector<double> moved = costs;
    for (auto& c : moved) c += 0.37 * t;
    const FlowField g = flow_from_volume(volume_from(moved, 2), t);
    EXPECT_NEAR(g.offsets[0].x(), f.offsets[0].x(), 1e-12);
    EXPECT_NEAR(g.offsets[0].y(), f.offsets[0].y(), 1e-12);
  }
}

TEST(SoftmaxFlow, MaskedOffsetsIgnored) {
  std::vector<double> costs(9, 0.0);
  CostVolume v = volume_from(costs, 1);
  for (int dx = -1; dx <= 1; ++dx) v.masked[v.slot(1, dx)] = 1;
  v.masked[v.slot(0, 1)] = v.masked[v.slot(-1, 1)] = 1;
  // Remaining offsets: (-1,-1), (0,-1), (-1,0), (0,0) in (dx, dy) terms.
  const FlowField f = flow_from_volume(v, 0.05);
  EXPECT_NEAR(f.offsets[0].x(), -0.5, 1e-15);
  EXPECT_NEAR(f.offsets[0].y(), -0.5, 1e-15);
  std::fill(v.masked.begin(), v.masked.end(), 1);
  EXPECT_FALSE(flow_from_volume(v, 0.05).is_valid(0));
  EXPECT_SCF_ERROR(flow_from_volume(v, 0.0), ErrorCode::kInvalidArgument);
}

TEST(SoftmaxFlow, TranslationAccuracy) {
  // Camera steps one cell's worth of image motion per frame over a plane.
  const SceneModel s = make_plane_scene(4, 2.0, -8.0, 8.0, 4.0);
  const CameraIntrinsics k;
  const Trajectory tr = make_translation_trajectory(2, 30.0, {2.0 * 5.0 / k.fx, 0.0, 0.0});
  const FrameBundle a = render_frame(s, tr.poses[0], k, 0.0);
  const FrameBundle b = render_frame(s, tr.poses[1], k, tr.timestamps[1], 8,
                                     PreviousView{tr.poses[0], 0.0});
  const ContextDescriptor desc;
  const CostVolume v = build_cost_volume(extract_context_features(a.image, 8, 1, desc),
                                         extract_context_features(b.image, 8, 8, desc), 25);
  const FlowField flow = flow_from_volume(v, 0.05);
  std::size_t n = 0, within = 0;
  for (std::size_t i = 0; i < flow.size(); ++i) {
    if (!flow.is_valid(i) || !b.cell_flow.is_valid(i)) continue;
    ++n;
    within += (flow.offsets[i] - b.cell_flow.offsets[i]).norm() <= 4.0;
  }
  EXPECT_GT(n, 1000u);
  EXPECT_GE(static_cast<double>(within) / n, 0.9);
}

CoordStateMap linear_ramp(int rows, int cols) {
  CoordStateMap m(rows, cols);
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      m.set(m.valid.index(r, c), {0.1 * c, -0.05 * r, 2.0 + 0.01 * c}, 1e-4 * (1 + c + r));
    }
  }
  return m;
}

FlowField uniform_flow(int rows, int cols, int stride, const Eigen::Vector2d& px) {
  FlowField f(rows, cols, stride);
  for (std::size_t i = 0; i < f.size(); ++i) {
    f.offsets[i] = px;
    f.valid[i] = 1;
  }
  return f;
}

TEST(Warp, ZeroFlowIsIdentity) {
  const CoordStateMap m = linear_ramp(6, 7);
  const CoordStateMap w = warp_state(m, uniform_flow(6, 7, 8, {0, 0}));
  EXPECT_EQ(w.coords, m.coords);
  EXPECT_EQ(w.log_variance, m.log_variance);
}

TEST(Warp, IntegerFlowShiftsOneCell) {
  const CoordStateMap m = linear_ramp(6, 7);
  const CoordStateMap w = warp_state(m, uniform_flow(6, 7, 8, {8.0, 0.0}));
  for (int r = 0; r < 6; ++r) {
    EXPECT_FALSE(w.valid(r, 0));
    for (int c = 1; c < 7; ++c) {
      const std::size_t i = w.valid.index(r, c);
      ASSERT_TRUE(w.is_valid(i));
      EXPECT_LE((w.coords[i] - m.coords(r, c - 1)).norm(), kExactTol);
      EXPECT_NEAR(w.variance(i), m.variance(m.valid.index(r, c - 1)), 1e-15);
    }
  }
}

TEST(Warp, HalfCellFlowGivesMidpoint) {
  const CoordStateMap m = linear_ramp(6, 7);
  const CoordStateMap w = warp_state(m, uniform_flow(6, 7, 8, {-4.0, 4.0}));
  for (int r = 1; r < 6; ++r) {
    for (int c = 0; c < 6; ++c) {
      const std::size_t i = w.valid.index(r, c);
      ASSERT_TRUE(w.is_valid(i));
      // Sample at (r - 0.5, c + 0.5).
      const Eigen::Vector3d expected(0.1 * (c + 0.5), -0.05 * (r - 0.5), 2.0 + 0.01 * (c + 0.5));
      EXPECT_LE((w.coords[i] - expected).norm(), kExactTol);
      // Variance, not log-variance, is interpolated.
      EXPECT_NEAR(w.variance(i), 1e-4 * (1 + c + 0.5 + r - 0.5), 1e-15);
    }
  }
}

TEST(Warp, ConstantMapIsConservedExactly) {
  CoordStateMap m(8, 9);
  for (std::size_t i = 0; i < m.size(); ++i) m.set(i, {0.3, -1.7, 2.9}, 3e-3);
  CounterRng rng(8);
  FlowField f(8, 9, 8);
  for (std::size_t i = 0; i < f.size(); ++i) {
    f.offsets[i] = {8.0 * rng.normal(), 8.0 * rng.normal()};
    f.valid[i] = 1;
  }
  const CoordStateMap w = warp_state(m, f);
  std::size_t valid = 0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    if (!w.is_valid(i)) continue;
    ++valid;
    EXPECT_EQ(w.coords[i], m.coords[0]);
    EXPECT_EQ(w.variance(i), m.variance(0));
  }
  EXPECT_GT(valid, 0u);
}

TEST(Warp, InvalidNeighborOrFlowInvalidates) {
  CoordStateMap m = linear_ramp(5, 5);
  m.invalidate(m.valid.index(2, 2));
  FlowField f = uniform_flow(5, 5, 8, {-4.0, 0.0});
  f.valid[f.valid.index(4, 0)] = 0;
  const CoordStateMap w = warp_state(m, f);
  EXPECT_FALSE(w.valid(2, 1));  // samples (2, 1.5)
  EXPECT_FALSE(w.valid(2, 2));  // samples (2, 2.5)
  EXPECT_TRUE(w.valid(2, 0));
  EXPECT_FALSE(w.valid(4, 0));
  EXPECT_FALSE(w.valid(0, 4));  // leaves the grid
  EXPECT_SCF_ERROR(warp_state(m, uniform_flow(5, 6, 8, {0, 0})), ErrorCode::kShapeMismatch);
}

TEST(Prior, AddsProcessNoise) {
  CoordStateMap warped(1, 3);
  for (std::size_t i = 0; i < 3; ++i) warped.set(i, {0, 0, 1}, 4e-4);
  const FlowField still = uniform_flow(1, 3, 8, {0, 0});

  ProcessNoiseConfig none{0.0, 0.0, 0.0, 4.0};
  const CoordStateMap p0 = assemble_prior(warped, still, none, still);
  EXPECT_EQ(p0.log_variance, warped.log_variance);
  EXPECT_EQ(p0.coords, warped.coords);

  ProcessNoiseConfig base{1e-4, 0.0, 0.0, 4.0};
  const CoordStateMap p1 = assemble_prior(warped, still, base, still);
  EXPECT_NEAR(p1.variance(0), 5e-4, 1e-18);

  ProcessNoiseConfig gain{1e-4, 1e-6, 0.0, 4.0};
  const CoordStateMap p2 = assemble_prior(warped, uniform_flow(1, 3, 8, {3.0, 4.0}), gain, std::nullopt);
  EXPECT_NEAR(p2.variance(1), 4e-4 + 1e-4 + 25e-6, 1e-18);
}

TEST(Prior, OcclusionPenalty) {
  CoordStateMap warped(1, 4);
  for (std::size_t i = 0; i < 4; ++i) warped.set(i, {0, 0, 1}, 4e-4);
  const FlowField flow = uniform_flow(1, 4, 8, {0.0, 0.0});
  FlowField back = uniform_flow(1, 4, 8, {0.0, 0.0});
  back.offsets[2] = {5.0, 0.0};  // fb residual 5 px > 4 px
  back.offsets[1] = {3.0, 0.0};  // 3 px passes
  const ProcessNoiseConfig cfg{1e-4, 1e-6, 1e-2, 4.0};
  const CoordStateMap p = assemble_prior(warped, flow, cfg, back);
  EXPECT_DOUBLE_EQ(p.variance(2) - p.variance(0), 1e-2);
  EXPECT_DOUBLE_EQ(p.variance(1), p.variance(0));
  EXPECT_NEAR(*forward_backward_residual(flow, back, 2), 5.0, 1e-15);
  for (std::size_t i = 0; i < 4; ++i) EXPECT_GE(p.variance(i), warped.variance(i));
}

TEST(Prior, ForwardBackwardOnTranslation) {
  FlowField fwd = uniform_flow(4, 6, 8, {8.0, 0.0});
  const FlowField back = uniform_flow(4, 6, 8, {-8.0, 0.0});
  EXPECT_NEAR(*forward_backward_residual(fwd, back, fwd.valid.index(1, 3)), 0.0, 1e-15);
  EXPECT_FALSE(forward_backward_residual(fwd, back, fwd.valid.index(1, 0)).has_value());
  fwd.valid[5] = 0;
  EXPECT_FALSE(forward_backward_residual(fwd, back, 5).has_value());
}

TEST(Prior, Validation) {
  EXPECT_SCF_ERROR((ProcessNoiseConfig{-1e-4, 0, 0, 4}.validate()), ErrorCode::kConfig);
  CoordStateMap warped(2, 2);
  EXPECT_SCF_ERROR(assemble_prior(warped, uniform_flow(2, 3, 8, {0, 0}), {}, std::nullopt),
                   ErrorCode::kShapeMismatch);
}

TEST(PriorLoss, SharesEvaluator) {
  CoordStateMap gt(1, 1), prior(1, 1);
  gt.set_log(0, {0, 0, 0}, 0.0);
  prior.set_log(0, {0, 0, 0}, 0.0);
  EXPECT_EQ(prior_loss(prior, gt).total, 0.0);
  prior.set(0, {0.1, 0.2, -0.2}, 0.25);
  EXPECT_NEAR(prior_loss(prior, gt).total, 3.0 * std::log(0.5) + 0.18, 1e-9);

  CounterRng rng(2);
  CoordStateMap a(10, 10), y(10, 10);
  for (std::size_t i = 0; i < a.size(); ++i) {
    a.set_log(i, rng.normal3(), rng.normal());
    y.set_log(i, rng.normal3(), 0.0);
  }
  EXPECT_NEAR(prior_loss(a, y).total, likelihood_loss(a, y).total, 1e-12);
  EXPECT_NEAR(posterior_loss(a, y).total, likelihood_loss(a, y).total, 1e-12);
}

TEST(PriorLoss, FiniteDifferences) {
  CounterRng rng(17);
  for (int trial = 0; trial < 100; ++trial) {
    CoordStateMap gt(1, 1), p(1, 1);
    gt.set_log(0, rng.normal3(), 0.0);
    const Eigen::Vector3d mean = gt.coords[0] + 0.2 * rng.normal3();
    const double s = -4.0 + rng.normal();
    p.set_log(0, mean, s);
    const LossGradient g = prior_loss_grad(p, gt);
    for (int a = 0; a < 3; ++a) {
      const double fd = testing::central_difference(
          [&](double v) {
            CoordStateMap q = p;
            Eigen::Vector3d m = mean;
            m[a] = v;
            q.set_log(0, m, s);
            return prior_loss(q, gt).total;
          },
          mean[a], 1e-6);
      EXPECT_LE(rel_err(g.d_coords[0][a], fd, 1e-3), 1e-5);
    }
    const double fd_s = testing::central_difference(
        [&](double v) {
          CoordStateMap q = p;
          q.set_log(0, mean, v);
          return prior_loss(q, gt).total;
        },
        s, 1e-6);
    EXPECT_LE(rel_err(g.d_log_variance[0], fd_s, 1e-3), 1e-5);
  }
}

TEST(Debug, CostSlices) {
  const FeatureMap f = extract_features(room_image(), 8);
  const CostVolume v = build_cost_volume(f, f, 5);
  const std::string dir = testing::scratch_dir("slices");
  save_cost_slices(dir, v, {{3, 4}, {100, 100}});
  EXPECT_TRUE(std::filesystem::exists(dir + "/cost_r3_c4.pgm"));
  EXPECT_EQ(std::distance(std::filesystem::directory_iterator(dir), {}), 1);
}

}  // namespace
}  // namespace scf
