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
#include <limits>
#include <vector>

#include <gtest/gtest.h>

#include "scf/pose_solver.hpp"
#include "test_util.hpp"

namespace scf {
namespace {

constexpr double kPoseTol = 1e-6;

// World point seen by `pose` at `pixel` with camera-frame depth `depth`.
Eigen::Vector3d back_project(const Pose& pose, const CameraIntrinsics& k, const Eigen::Vector2d& pixel,
                             double depth) {
  const Eigen::Vector3d b = k.bearing(pixel);
  const Eigen::Vector3d xc = b * (depth / b.z());
  return pose.rotation_matrix().transpose() * (xc - pose.translation);
}

std::vector<Correspondence> synthetic(const Pose& pose, const CameraIntrinsics& k, int n,
                                      CounterRng& rng, double pixel_noise = 0.0) {
  std::vector<Correspondence> out;
  for (int i = 0; i < n; ++i) {
    const Eigen::Vector2d px(k.width * rng.uniform(), k.height * rng.uniform());
    Correspondence c;
    c.point = back_project(pose, k, px, 1.0 + 4.0 * rng.uniform());
    c.pixel = px + pixel_noise * Eigen::Vector2d(rng.normal(), rng.normal());
    out.push_back(c);
  }
  return out;
}

TEST(Gather, CountsCellsUnderGate) {
  const CameraIntrinsics k;
  CoordStateMap m(30, 40);
  for (std::size_t i = 0; i < m.size(); ++i) m.set(i, {0, 0, 1}, 0.01 * 0.01);
  for (std::size_t i = 0; i < 100; ++i) m.invalidate(i);
  for (std::size_t i = 100; i < 150; ++i) m.set(i, {0, 0, 1}, 0.06 * 0.06);
  const auto corrs = gather_correspondences(m, k, 0.05);
  EXPECT_EQ(corrs.size(), m.size() - 150);
  // Cell (i, j) sits at ((j + 0.5) * 8, (i + 0.5) * 8).
  EXPECT_EQ(corrs.front().pixel, Eigen::Vector2d(8.0 * (150 % 40) + 4.0, 8.0 * (150 / 40) + 4.0));
  EXPECT_NEAR(corrs.front().weight, 1e4, 1e-8);
  EXPECT_EQ(gather_correspondences(m, k, 0.07).size(), m.size() - 100);
}

TEST(Gather, MixedMapOracle) {
  const CameraIntrinsics k;
  CounterRng rng(4);
  CoordStateMap m(15, 20);
  for (std::size_t i = 0; i < m.size(); ++i) {
    if (rng.uniform() < 0.2) continue;
    m.set(i, rng.normal3(), std::pow(0.1 * rng.uniform(), 2));
  }
  const auto corrs = gather_correspondences(m, k, 0.05);
  std::size_t j = 0;
  for (int r = 0; r < m.rows(); ++r) {
    for (int c = 0; c < m.cols(); ++c) {
      const std::size_t i = m.valid.index(r, c);
      if (!m.is_valid(i) || std::sqrt(m.variance(i)) > 0.05) continue;
      ASSERT_LT(j, corrs.size());
      EXPECT_EQ(corrs[j].pixel, Eigen::Vector2d(16.0 * c + 8.0, 16.0 * r + 8.0));
      EXPECT_EQ(corrs[j].point, m.coords[i]);
      EXPECT_DOUBLE_EQ(corrs[j].weight, 1.0 / m.variance(i));
      ++j;
    }
  }
  EXPECT_EQ(j, corrs.size());
}

TEST(Gather, TooFew) {
  CoordStateMap m(30, 40);
  for (std::size_t i = 0; i < 3; ++i) m.set(i, {0, 0, 1}, 1e-4);
  EXPECT_SCF_ERROR(gather_correspondences(m, CameraIntrinsics{}, 0.05), ErrorCode::kTooFewCorrespondences);
}

TEST(P3P, ContainsTruePose) {
  const CameraIntrinsics k;
  CounterRng rng(10);
  int found = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const Pose gt = testing::random_pose(rng, 0.5);
    const auto corrs = synthetic(gt, k, 3, rng);
    std::vector<Pose> sols;
    try {
      sols = p3p_minimal(corrs, k);
    } catch (const Error& e) {
      ASSERT_EQ(e.code(), ErrorCode::kDegenerateConfiguration);
      continue;
    }
    EXPECT_LE(sols.size(), 4u);
    for (const Pose& p : sols) {
      for (const auto& c : corrs) EXPECT_LE(std::sqrt(reprojection_error_sq(p, c, k)), kPoseTol);
    }
    for (const Pose& p : sols) {
      const PoseError e = pose_error(p, gt);
      if (e.translation_m < kPoseTol && e.rotation_deg < kPoseTol) {
        ++found;
        break;
      }
    }
  }
  EXPECT_GE(found, 195);
}

TEST(P3P, CollinearIsDegenerate) {
  const CameraIntrinsics k;
  std::vector<Correspondence> corrs(3);
  for (int i = 0; i < 3; ++i) {
    corrs[i].point = Eigen::Vector3d(0.1 * i, 0.2 * i, 2.0 + 0.3 * i);
    corrs[i].pixel = project(corrs[i].point, Pose::identity(), k).pixel;
  }
  EXPECT_SCF_ERROR(p3p_minimal(corrs, k), ErrorCode::kDegenerateConfiguration);
  EXPECT_SCF_ERROR(p3p_minimal(std::span(corrs).first(2), k), ErrorCode::kInvalidArgument);
}

TEST(ReprojectionError, BehindCameraIsInfinite) {
  const CameraIntrinsics k;
  Correspondence c;
  c.point = {0, 0, -1};
  c.pixel = {160, 120};
  EXPECT_EQ(reprojection_error_sq(Pose::identity(), c, k), std::numeric_limits<double>::infinity());
  c.point = {0, 0, 2};
  c.pixel = {163, 124};
  EXPECT_NEAR(reprojection_error_sq(Pose::identity(), c, k), 25.0, 1e-12);
}

TEST(Ransac, OutlierFreeRecoversPose) {
  const CameraIntrinsics k;
  CounterRng rng(1);
  for (int trial = 0; trial < 10; ++trial) {
    const Pose gt = testing::random_pose(rng, 0.5);
    const auto corrs = synthetic(gt, k, 100, rng);
    const PoseEstimate est = ransac_pnp(corrs, k, RansacConfig{}, trial);
    const PoseError e = pose_error(est.pose, gt);
    EXPECT_LE(e.translation_m, kPoseTol);
    EXPECT_LE(e.rotation_deg, kPoseTol);
    EXPECT_EQ(est.inlier_count, 100);
    EXPECT_LE(est.mean_reproj_err_px, 1e-6);
  }
}

TEST(Ransac, RejectsOutliers) {
  const CameraIntrinsics k;
  CounterRng rng(2);
  const Pose gt = testing::random_pose(rng, 0.5);
  auto corrs = synthetic(gt, k, 200, rng, 0.5);
  for (std::size_t i = 0; i < corrs.size(); i += 2) corrs[i].point += 1.0 * rng.normal3();
  const PoseEstimate est = ransac_pnp(corrs, k, RansacConfig{}, 7);
  const PoseError e = pose_error(est.pose, gt);
  EXPECT_LT(e.translation_m, 0.01);
  EXPECT_LT(e.rotation_deg, 0.5);
  for (std::size_t i = 1; i < corrs.size(); i += 2) EXPECT_TRUE(est.inlier_mask[i]);
  EXPECT_LT(est.inlier_count, 150);
}

TEST(Ransac, AllOutliersHasNoConsensus) {
  const CameraIntrinsics k;
  CounterRng rng(3);
  std::vector<Correspondence> corrs;
  for (int i = 0; i < 60; ++i) {
    Correspondence c;
    c.point = 3.0 * rng.normal3();
    c.pixel = {k.width * rng.uniform(), k.height * rng.uniform()};
    corrs.push_back(c);
  }
  RansacConfig cfg;
  cfg.inlier_threshold_px = 0.5;
  EXPECT_SCF_ERROR(ransac_pnp(corrs, k, cfg, 1), ErrorCode::kNoConsensus);
  EXPECT_SCF_ERROR(ransac_pnp(std::span(corrs).first(3), k, cfg, 1), ErrorCode::kTooFewCorrespondences);
}

TEST(Ransac, Deterministic) {
  const CameraIntrinsics k;
  CounterRng rng(5);
  const Pose gt = testing::random_pose(rng, 0.5);
  auto corrs = synthetic(gt, k, 120, rng, 1.0);
  for (std::size_t i = 0; i < corrs.size(); i += 3) corrs[i].point += rng.normal3();
  const PoseEstimate a = ransac_pnp(corrs, k, RansacConfig{}, 11);
  const PoseEstimate b = ransac_pnp(corrs, k, RansacConfig{}, 11);
  EXPECT_EQ(a.pose.rotation.coeffs(), b.pose.rotation.coeffs());
  EXPECT_EQ(a.pose.translation, b.pose.translation);
  EXPECT_EQ(a.inlier_mask, b.inlier_mask);
  EXPECT_EQ(a.iterations_used, b.iterations_used);
}

TEST(Ransac, ConfigValidation) {
  RansacConfig cfg;
  cfg.max_iterations = 0;
  EXPECT_SCF_ERROR(cfg.validate(), ErrorCode::kConfig);
  cfg = {};
  cfg.confidence = 1.0;
  EXPECT_SCF_ERROR(cfg.validate(), ErrorCode::kConfig);
  cfg = {};
  cfg.inlier_threshold_px = -1.0;
  EXPECT_SCF_ERROR(cfg.validate(), ErrorCode::kConfig);
}

TEST(Refine, GroundTruthIsStationary) {
  const CameraIntrinsics k;
  CounterRng rng(6);
  const Pose gt = testing::random_pose(rng, 0.5);
  const auto corrs = synthetic(gt, k, 50, rng);
  const Pose p = refine_pose(gt, corrs, k);
  const PoseError e = pose_error(p, gt);
  EXPECT_LE(e.translation_m, 1e-9);
  EXPECT_LE(e.rotation_deg, 1e-9);
}

TEST(Refine, ConvergesFromPerturbation) {
  const CameraIntrinsics k;
  CounterRng rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    const Pose gt = testing::random_pose(rng, 0.5);
    const auto corrs = synthetic(gt, k, 80, rng);
    Eigen::Vector3d axis = rng.normal3().normalized();
    Eigen::Vector3d dir = rng.normal3().normalized();
    const Pose start = retract(gt, axis * (M_PI / 180.0), dir * 0.02);
    RefineSummary summary;
    const Pose p = refine_pose(start, corrs, k, {}, &summary);
    const PoseError e = pose_error(p, gt);
    EXPECT_LE(e.translation_m, kPoseTol);
    EXPECT_LE(e.rotation_deg, kPoseTol);
    ASSERT_FALSE(summary.accepted_costs.empty());
    for (std::size_t i = 1; i < summary.accepted_costs.size(); ++i) {
      EXPECT_LE(summary.accepted_costs[i], summary.accepted_costs[i - 1]);
    }
    EXPECT_LE(summary.final_cost, summary.initial_cost);
  }
}

TEST(Refine, ReprojectionJacobianMatchesFiniteDifferences) {
  const CameraIntrinsics k;
  CounterRng rng(8);
  for (int trial = 0; trial < 50; ++trial) {
    const Pose pose = testing::random_pose(rng, 0.5);
    const Eigen::Vector3d x = back_project(pose, k, {320 * rng.uniform(), 240 * rng.uniform()}, 2.0);
    const auto j = reprojection_jacobian(pose, x, k);
    ASSERT_TRUE(j.has_value());
    for (int a = 0; a < 6; ++a) {
      Eigen::Matrix<double, 6, 1> d = Eigen::Matrix<double, 6, 1>::Zero();
      const double h = 1e-6;
      d[a] = h;
      const Pose plus = retract(pose, d.head<3>(), d.tail<3>());
      const Pose minus = retract(pose, -d.head<3>(), -d.tail<3>());
      const Eigen::Vector2d fd = (project(x, plus, k).pixel - project(x, minus, k).pixel) / (2.0 * h);
      for (int r = 0; r < 2; ++r) EXPECT_LE(testing::rel_err((*j)(r, a), fd[r], 1e-3), 1e-5);
    }
  }
  EXPECT_FALSE(reprojection_jacobian(Pose::identity(), {0, 0, -1}, k).has_value());
}

TEST(Metrics, PoseErrorExamples) {
  const Pose a = Pose::identity();
  const Pose b = Pose::from(Eigen::Quaterniond(Eigen::AngleAxisd(M_PI / 18.0, Eigen::Vector3d::UnitY())),
                            Eigen::Vector3d::Zero());
  EXPECT_NEAR(pose_error(a, b).rotation_deg, 10.0, 1e-9);
  EXPECT_NEAR(pose_error(a, b).translation_m, 0.0, 1e-12);
  const Pose c = Pose::from(Eigen::Quaterniond::Identity(), Eigen::Vector3d(0.03, 0.04, 0.0));
  EXPECT_NEAR(pose_error(c, a).translation_m, 0.05, 1e-12);
}

TEST(Metrics, ReportWithFailures) {
  const Pose gt = Pose::identity();
  std::vector<PoseSample> s;
  s.push_back({Pose::from(Eigen::Quaterniond::Identity(), Eigen::Vector3d(0.01, 0, 0)), gt});
  s.push_back({Pose::from(Eigen::Quaterniond::Identity(), Eigen::Vector3d(0.07, 0, 0)), gt});
  s.push_back({Pose::from(Eigen::Quaterniond::Identity(), Eigen::Vector3d(0.02, 0, 0)), gt});
  s.push_back({std::nullopt, gt});
  const MetricsReport r = pose_metrics(s);
  EXPECT_NEAR(r.median_translation_m, 0.045, 1e-12);
  EXPECT_DOUBLE_EQ(r.accuracy_5cm_5deg, 0.5);
  EXPECT_TRUE(std::isinf(r.errors[3].translation_m));
  EXPECT_FALSE(r.coords.has_value());
  EXPECT_SCF_ERROR(pose_metrics({}), ErrorCode::kEmptyInput);
}

TEST(Metrics, CoordinateErrorPooled) {
  CoordStateMap gt(1, 4), a(1, 4), b(1, 4);
  for (std::size_t i = 0; i < 4; ++i) {
    gt.set_log(i, {0, 0, 0}, 0.0);
    a.set_log(i, {0.1 * (i + 1), 0, 0}, 0.0);
    b.set_log(i, {0, 0.5, 0}, 0.0);
  }
  a.invalidate(3);
  const CoordErrorStats ca = coordinate_error(a, gt);
  EXPECT_EQ(ca.pixels, 3u);
  EXPECT_NEAR(ca.mean, 0.2, 1e-12);
  EXPECT_NEAR(ca.stddev, std::sqrt(2.0 / 300.0), 1e-12);
  const std::vector<PoseSample> s(2, PoseSample{Pose::identity(), Pose::identity()});
  const std::vector<CoordStateMap> maps{a, b}, gts{gt, gt};
  const MetricsReport r = pose_metrics(s, maps, gts);
  ASSERT_TRUE(r.coords.has_value());
  EXPECT_EQ(r.coords->pixels, 7u);
  EXPECT_NEAR(r.coords->mean, (0.6 + 2.0) / 7.0, 1e-12);
}

TEST(Metrics, Median) {
  EXPECT_EQ(median({3.0, 1.0, 2.0}), 2.0);
  EXPECT_EQ(median({4.0, 1.0, 3.0, 2.0}), 2.5);
  EXPECT_SCF_ERROR(median({}), ErrorCode::kEmptyInput);
}

}  // namespace
}  // namespace scf
