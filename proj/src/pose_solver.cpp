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

#include "scf/pose_solver.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <limits>
#include <numeric>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include "scf/error.hpp"
#include "scf/rng.hpp"

namespace scf {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double triangle_area(const Eigen::Vector3d& a, const Eigen::Vector3d& b, const Eigen::Vector3d& c) {
  return 0.5 * (b - a).cross(c - a).norm();
}

// Real roots of sum_k coeffs[k] x^k via the companion matrix, each polished
// with a few Newton steps.
std::vector<double> real_roots(std::vector<double> coeffs) {
  const double scale = std::accumulate(coeffs.begin(), coeffs.end(), 0.0,
                                       [](double m, double c) { return std::max(m, std::abs(c)); });
  if (scale == 0.0) return {};
  while (coeffs.size() > 1 && std::abs(coeffs.back()) <= 1e-14 * scale) coeffs.pop_back();
  const int n = static_cast<int>(coeffs.size()) - 1;
  if (n < 1) return {};

  Eigen::MatrixXd companion = Eigen::MatrixXd::Zero(n, n);
  for (int i = 1; i < n; ++i) companion(i, i - 1) = 1.0;
  for (int i = 0; i < n; ++i) companion(i, n - 1) = -coeffs[i] / coeffs[n];
  Eigen::EigenSolver<Eigen::MatrixXd> es(companion, false);

  auto eval = [&](double x, double* deriv) {
    double p = 0.0;
    double dp = 0.0;
    for (int k = n; k >= 0; --k) {
      dp = dp * x + p;
      p = p * x + coeffs[k];
    }
    *deriv = dp;
    return p;
  };

  std::vector<double> roots;
  for (int i = 0; i < n; ++i) {
    const std::complex<double> z = es.eigenvalues()[i];
    if (std::abs(z.imag()) > 1e-4 * (1.0 + std::abs(z.real()))) continue;
    double x = z.real();
    for (int it = 0; it < 8; ++it) {
      double dp = 0.0;
      const double p = eval(x, &dp);
      if (dp == 0.0) break;
      const double nx = x - p / dp;
      if (!std::isfinite(nx)) break;
      double dummy = 0.0;
      if (std::abs(eval(nx, &dummy)) > std::abs(p)) break;
      x = nx;
    }
    roots.push_back(x);
  }
  return roots;
}

struct DistanceSystem {
  double a2, b2, c2;     // squared world side lengths opposite points 1, 2, 3
  double ca, cb, cg;     // bearing cosines (2,3), (1,3), (1,2)

  Eigen::Vector3d residual(const Eigen::Vector3d& s) const {
    return {s[1] * s[1] + s[2] * s[2] - 2.0 * s[1] * s[2] * ca - a2,
            s[0] * s[0] + s[2] * s[2] - 2.0 * s[0] * s[2] * cb - b2,
            s[0] * s[0] + s[1] * s[1] - 2.0 * s[0] * s[1] * cg - c2};
  }

  Eigen::Matrix3d jacobian(const Eigen::Vector3d& s) const {
    Eigen::Matrix3d j;
    j << 0.0, 2.0 * (s[1] - s[2] * ca), 2.0 * (s[2] - s[1] * ca),
        2.0 * (s[0] - s[2] * cb), 0.0, 2.0 * (s[2] - s[0] * cb),
        2.0 * (s[0] - s[1] * cg), 2.0 * (s[1] - s[0] * cg), 0.0;
    return j;
  }

  void polish(Eigen::Vector3d& s) const {
    double err = residual(s).norm();
    for (int it = 0; it < 10 && err > 0.0; ++it) {
      const Eigen::Vector3d step = jacobian(s).fullPivLu().solve(-residual(s));
      if (!step.allFinite()) return;
      const Eigen::Vector3d next = s + step;
      const double next_err = residual(next).norm();
      if (!(next_err < err)) return;
      s = next;
      err = next_err;
    }
  }
};

}  // namespace

void RansacConfig::validate() const {
  if (max_iterations < 1) fail(ErrorCode::kConfig, "max_iterations must be >= 1");
  if (!(inlier_threshold_px > 0.0)) fail(ErrorCode::kConfig, "inlier threshold must be > 0");
  if (!(confidence > 0.0 && confidence < 1.0))
    fail(ErrorCode::kConfig, "confidence must lie in (0, 1)");
  if (min_inliers < 3) fail(ErrorCode::kConfig, "min_inliers must be >= 3");
  if (!(lambda_m >= 0.0)) fail(ErrorCode::kConfig, "lambda must be >= 0");
}

std::vector<Correspondence> gather_correspondences(const CoordStateMap& posterior,
                                                   const CameraIntrinsics& k, double lambda_m) {
  k.validate();
  const int rows = posterior.coords.rows();
  const int cols = posterior.coords.cols();
  if (cols <= 0 || rows <= 0 || k.width % cols != 0)
    fail(ErrorCode::kShapeMismatch, "map width does not divide the image width");
  const double stride = static_cast<double>(k.width / cols);
  const double max_var = lambda_m * lambda_m;

  std::vector<Correspondence> out;
  for (int i = 0; i < rows; ++i) {
    for (int j = 0; j < cols; ++j) {
      const std::size_t idx = posterior.coords.index(i, j);
      if (!posterior.valid[idx]) continue;
      const double var = posterior.variance(idx);
      if (!(var <= max_var)) continue;
      Correspondence c;
      c.pixel = {(j + 0.5) * stride, (i + 0.5) * stride};
      c.point = posterior.coords[idx];
      c.weight = 1.0 / var;
      out.push_back(c);
    }
  }
  if (out.size() < 4)
    fail(ErrorCode::kTooFewCorrespondences,
         std::to_string(out.size()) + " cells pass the uncertainty gate");
  return out;
}

double reprojection_error_sq(const Pose& pose, const Correspondence& c, const CameraIntrinsics& k) {
  const auto proj = try_project(c.point, pose, k);
  if (!proj) return kInf;
  return (proj->pixel - c.pixel).squaredNorm();
}

std::vector<Pose> p3p_minimal(std::span<const Correspondence> corrs, const CameraIntrinsics& k) {
  if (corrs.size() != 3) fail(ErrorCode::kInvalidArgument, "p3p needs exactly 3 correspondences");
  const Eigen::Vector3d& x1 = corrs[0].point;
  const Eigen::Vector3d& x2 = corrs[1].point;
  const Eigen::Vector3d& x3 = corrs[2].point;
  if (triangle_area(x1, x2, x3) < kMinTriangleArea)
    fail(ErrorCode::kDegenerateConfiguration, "collinear world points");

  std::array<Eigen::Vector3d, 3> j;
  for (int i = 0; i < 3; ++i) j[i] = k.bearing(corrs[i].pixel);
  for (int a = 0; a < 3; ++a)
    for (int b = a + 1; b < 3; ++b)
      if (j[a].cross(j[b]).norm() < 1e-12)
        fail(ErrorCode::kDegenerateConfiguration, "coincident bearings");

  DistanceSystem sys;
  sys.a2 = (x2 - x3).squaredNorm();
  sys.b2 = (x1 - x3).squaredNorm();
  sys.c2 = (x1 - x2).squaredNorm();
  sys.ca = j[1].dot(j[2]);
  sys.cb = j[0].dot(j[2]);
  sys.cg = j[0].dot(j[1]);

  const double a2 = sys.a2, b2 = sys.b2, c2 = sys.c2;
  const double ca = sys.ca, cb = sys.cb, cg = sys.cg;
  const double q = (a2 - c2) / b2;
  const double p = (a2 + c2) / b2;
  const double a4 = (q - 1.0) * (q - 1.0) - 4.0 * c2 / b2 * ca * ca;
  const double a3 = 4.0 * (q * (1.0 - q) * cb - (1.0 - p) * ca * cg + 2.0 * c2 / b2 * ca * ca * cb);
  const double a2c = 2.0 * (q * q - 1.0 + 2.0 * q * q * cb * cb + 2.0 * (b2 - c2) / b2 * ca * ca -
                            4.0 * p * ca * cb * cg + 2.0 * (b2 - a2) / b2 * cg * cg);
  const double a1 = 4.0 * (-q * (1.0 + q) * cb + 2.0 * a2 / b2 * cg * cg * cb - (1.0 - p) * ca * cg);
  const double a0 = (1.0 + q) * (1.0 + q) - 4.0 * a2 / b2 * cg * cg;

  Eigen::Matrix3d world;
  world << x1, x2, x3;

  std::vector<Pose> out;
  for (const double v : real_roots({a0, a1, a2c, a3, a4})) {
    if (!(v > 0.0)) continue;
    const double denom = 1.0 + v * v - 2.0 * v * cb;
    if (!(denom > 0.0)) continue;
    const double s1 = std::sqrt(b2 / denom);
    const double s3 = v * s1;

    // s2 from the (1,2) and (2,3) equations: their difference is linear in
    // s2, the (1,2) equation alone is quadratic. Keep the best fit.
    std::vector<double> s2_options;
    const double lin = 2.0 * (s3 * ca - s1 * cg);
    if (std::abs(lin) > 1e-12 * (s1 + s3)) s2_options.push_back((s3 * s3 - a2 - s1 * s1 + c2) / lin);
    const double disc = s1 * s1 * cg * cg - (s1 * s1 - c2);
    if (disc >= 0.0) {
      s2_options.push_back(s1 * cg + std::sqrt(disc));
      s2_options.push_back(s1 * cg - std::sqrt(disc));
    }
    double best_err = kInf;
    Eigen::Vector3d s = Eigen::Vector3d::Zero();
    for (const double s2 : s2_options) {
      if (!(s2 > 0.0)) continue;
      const Eigen::Vector3d cand(s1, s2, s3);
      const double err = sys.residual(cand).norm();
      if (err < best_err) {
        best_err = err;
        s = cand;
      }
    }
    if (!std::isfinite(best_err)) continue;
    sys.polish(s);
    if (!(s.array() > 0.0).all()) continue;

    Eigen::Matrix3d cam;
    cam << s[0] * j[0], s[1] * j[1], s[2] * j[2];
    const Eigen::Matrix4d t = Eigen::umeyama(world, cam, false);
    if (!t.allFinite()) continue;
    const Pose pose = Pose::from(Eigen::Matrix3d(t.topLeftCorner<3, 3>()),
                                 Eigen::Vector3d(t.topRightCorner<3, 1>()));

    bool consistent = true;
    for (const auto& c : corrs)
      if (!(reprojection_error_sq(pose, c, k) <= 1e-12)) consistent = false;
    if (!consistent) continue;

    bool duplicate = false;
    for (const auto& o : out)
      if (rotation_difference_deg(o, pose) < 1e-9 && (o.translation - pose.translation).norm() < 1e-9)
        duplicate = true;
    if (!duplicate) out.push_back(pose);
  }
  return out;
}

namespace {

struct Score {
  int inliers = -1;
  double mean_err = kInf;
  int iteration = 0;

  bool better_than(const Score& o) const {
    if (inliers != o.inliers) return inliers > o.inliers;
    if (mean_err != o.mean_err) return mean_err < o.mean_err;
    return iteration < o.iteration;
  }
};

Score score_pose(const Pose& pose, std::span<const Correspondence> corrs, const CameraIntrinsics& k,
                 double thr2, int iteration, std::vector<std::uint8_t>* mask) {
  Score s;
  s.inliers = 0;
  s.iteration = iteration;
  double sum = 0.0;
  if (mask) mask->assign(corrs.size(), 0);
  for (std::size_t i = 0; i < corrs.size(); ++i) {
    const double e2 = reprojection_error_sq(pose, corrs[i], k);
    if (e2 <= thr2) {
      ++s.inliers;
      sum += std::sqrt(e2);
      if (mask) (*mask)[i] = 1;
    }
  }
  s.mean_err = s.inliers > 0 ? sum / s.inliers : kInf;
  return s;
}

}  // namespace

PoseEstimate ransac_pnp(std::span<const Correspondence> corrs, const CameraIntrinsics& k,
                        const RansacConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  k.validate();
  const std::size_t n = corrs.size();
  if (n < 4) fail(ErrorCode::kTooFewCorrespondences, std::to_string(n) + " correspondences");
  const double thr2 = cfg.inlier_threshold_px * cfg.inlier_threshold_px;

  Score best;
  Pose best_pose;
  int used = 0;
  for (int it = 0; it < cfg.max_iterations; ++it) {
    used = it + 1;
    CounterRng rng(seed, static_cast<std::uint64_t>(it));
    std::array<std::size_t, 3> idx{};
    bool found = false;
    for (int attempt = 0; attempt < 16 && !found; ++attempt) {
      idx[0] = rng.below(n);
      do idx[1] = rng.below(n); while (idx[1] == idx[0]);
      do idx[2] = rng.below(n); while (idx[2] == idx[0] || idx[2] == idx[1]);
      found = triangle_area(corrs[idx[0]].point, corrs[idx[1]].point, corrs[idx[2]].point) >=
              kMinTriangleArea;
    }
    if (!found) continue;

    const std::array<Correspondence, 3> sample{corrs[idx[0]], corrs[idx[1]], corrs[idx[2]]};
    std::vector<Pose> candidates;
    try {
      candidates = p3p_minimal(sample, k);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kDegenerateConfiguration) throw;
      continue;
    }
    for (const auto& cand : candidates) {
      const Score s = score_pose(cand, corrs, k, thr2, it, nullptr);
      if (s.better_than(best)) {
        best = s;
        best_pose = cand;
      }
    }

    if (best.inliers > 0) {
      const double w = static_cast<double>(best.inliers) / static_cast<double>(n);
      const double miss = 1.0 - w * w * w;
      if (miss <= 0.0) break;
      const double needed = std::log(1.0 - cfg.confidence) / std::log(miss);
      if (static_cast<double>(it + 1) >= needed) break;
    }
  }

  if (best.inliers < cfg.min_inliers)
    fail(ErrorCode::kNoConsensus, "best model has " + std::to_string(std::max(best.inliers, 0)) +
                                      " inliers, need " + std::to_string(cfg.min_inliers));

  PoseEstimate est;
  est.iterations_used = used;
  Score final_score = score_pose(best_pose, corrs, k, thr2, 0, &est.inlier_mask);
  est.pose = best_pose;

  std::vector<Correspondence> inliers;
  for (std::size_t i = 0; i < n; ++i)
    if (est.inlier_mask[i]) inliers.push_back(corrs[i]);
  try {
    const Pose refined = refine_pose(best_pose, inliers, k);
    std::vector<std::uint8_t> mask;
    const Score s = score_pose(refined, corrs, k, thr2, 0, &mask);
    if (s.inliers >= final_score.inliers) {
      est.pose = refined;
      est.inlier_mask = std::move(mask);
      final_score = s;
    }
  } catch (const Error& e) {
    if (e.code() != ErrorCode::kDiverged) throw;
  }
  est.inlier_count = final_score.inliers;
  est.mean_reproj_err_px = final_score.mean_err;
  return est;
}

std::optional<Eigen::Matrix<double, 2, 6>> reprojection_jacobian(const Pose& pose,
                                                                 const Eigen::Vector3d& point,
                                                                 const CameraIntrinsics& k) {
  const Eigen::Vector3d rx = pose.rotation * point;
  const Eigen::Vector3d pc = rx + pose.translation;
  if (!(pc.z() > kMinDepth)) return std::nullopt;
  const double iz = 1.0 / pc.z();
  Eigen::Matrix<double, 2, 3> dproj;
  dproj << k.fx * iz, 0.0, -k.fx * pc.x() * iz * iz,
      0.0, k.fy * iz, -k.fy * pc.y() * iz * iz;
  Eigen::Matrix3d skew;
  skew << 0.0, -rx.z(), rx.y(),
      rx.z(), 0.0, -rx.x(),
      -rx.y(), rx.x(), 0.0;
  Eigen::Matrix<double, 2, 6> j;
  j.leftCols<3>() = -dproj * skew;
  j.rightCols<3>() = dproj;
  return j;
}

namespace {

double weighted_cost(const Pose& pose, std::span<const Correspondence> pts,
                     const std::vector<double>& w, const CameraIntrinsics& k) {
  double cost = 0.0;
  for (std::size_t i = 0; i < pts.size(); ++i) cost += w[i] * reprojection_error_sq(pose, pts[i], k);
  return cost;
}

}  // namespace

Pose refine_pose(const Pose& initial, std::span<const Correspondence> inliers,
                 const CameraIntrinsics& k, const RefineOptions& opts, RefineSummary* summary) {
  if (inliers.size() < 3) fail(ErrorCode::kTooFewCorrespondences, "refinement needs >= 3 points");
  std::vector<double> w(inliers.size());
  double wsum = 0.0;
  for (std::size_t i = 0; i < inliers.size(); ++i) {
    if (!(inliers[i].weight >= 0.0) || !std::isfinite(inliers[i].weight))
      fail(ErrorCode::kInvalidArgument, "weights must be finite and >= 0");
    w[i] = inliers[i].weight;
    wsum += w[i];
  }
  if (!(wsum > 0.0)) fail(ErrorCode::kInvalidArgument, "all weights are zero");
  for (auto& x : w) x *= static_cast<double>(w.size()) / wsum;

  Pose pose = initial;
  double cost = weighted_cost(pose, inliers, w, k);
  if (!std::isfinite(cost)) fail(ErrorCode::kDiverged, "initial cost is not finite");
  RefineSummary local;
  local.initial_cost = cost;
  double mu = -1.0;

  int it = 0;
  for (; it < opts.max_iterations; ++it) {
    Eigen::Matrix<double, 6, 6> h = Eigen::Matrix<double, 6, 6>::Zero();
    Eigen::Matrix<double, 6, 1> g = Eigen::Matrix<double, 6, 1>::Zero();
    for (std::size_t i = 0; i < inliers.size(); ++i) {
      const auto jac = reprojection_jacobian(pose, inliers[i].point, k);
      if (!jac) fail(ErrorCode::kDiverged, "point behind the camera");
      const Eigen::Vector2d r = project(inliers[i].point, pose, k).pixel - inliers[i].pixel;
      h += w[i] * jac->transpose() * *jac;
      g += w[i] * jac->transpose() * r;
    }
    if (g.norm() < opts.gradient_tolerance) break;
    if (mu < 0.0) mu = 1e-4 * h.diagonal().maxCoeff();

    Eigen::Matrix<double, 6, 6> damped = h;
    damped.diagonal().array() += mu;
    const Eigen::Matrix<double, 6, 1> delta = damped.ldlt().solve(-g);
    if (!delta.allFinite()) fail(ErrorCode::kDiverged, "non-finite LM step");
    if (delta.norm() < opts.step_tolerance) break;

    const Pose next = retract(pose, delta.head<3>(), delta.tail<3>());
    const double next_cost = weighted_cost(next, inliers, w, k);
    if (std::isnan(next_cost)) fail(ErrorCode::kDiverged, "cost became NaN");
    if (next_cost < cost) {
      pose = next;
      cost = next_cost;
      local.accepted_costs.push_back(cost);
      mu = std::max(mu / 3.0, 1e-12);
    } else {
      mu *= 4.0;
      if (!std::isfinite(mu)) break;
    }
  }
  local.iterations = it;
  local.final_cost = cost;
  if (summary) *summary = std::move(local);
  return pose;
}

PoseError pose_error(const Pose& estimate, const Pose& gt) {
  return {(estimate.camera_center() - gt.camera_center()).norm(), rotation_difference_deg(estimate, gt)};
}

CoordErrorStats coordinate_error(const CoordStateMap& map, const CoordStateMap& gt) {
  if (!map.coords.same_shape(gt.coords)) fail(ErrorCode::kShapeMismatch, "coordinate error shapes");
  CoordErrorStats out;
  double sum = 0.0;
  double sum2 = 0.0;
  for (std::size_t i = 0; i < map.coords.size(); ++i) {
    if (!map.valid[i] || !gt.valid[i]) continue;
    const double e = (map.coords[i] - gt.coords[i]).norm();
    sum += e;
    sum2 += e * e;
    ++out.pixels;
  }
  if (out.pixels > 0) {
    out.mean = sum / static_cast<double>(out.pixels);
    out.stddev = std::sqrt(std::max(0.0, sum2 / static_cast<double>(out.pixels) - out.mean * out.mean));
  }
  return out;
}

double median(std::vector<double> values) {
  if (values.empty()) fail(ErrorCode::kEmptyInput, "median of nothing");
  const std::size_t mid = values.size() / 2;
  std::nth_element(values.begin(), values.begin() + mid, values.end());
  const double hi = values[mid];
  if (values.size() % 2 == 1) return hi;
  const double lo = *std::max_element(values.begin(), values.begin() + mid);
  return 0.5 * (lo + hi);
}

MetricsReport pose_metrics(std::span<const PoseSample> samples, std::span<const CoordStateMap> maps,
                           std::span<const CoordStateMap> gt_maps) {
  if (samples.empty()) fail(ErrorCode::kEmptyInput, "no poses to evaluate");
  if (maps.size() != gt_maps.size()) fail(ErrorCode::kShapeMismatch, "map / ground-truth count");

  MetricsReport rep;
  std::vector<double> te;
  std::vector<double> re;
  int good = 0;
  for (const auto& s : samples) {
    PoseError e{kInf, kInf};
    if (s.estimate) e = pose_error(*s.estimate, s.gt);
    rep.errors.push_back(e);
    te.push_back(e.translation_m);
    re.push_back(e.rotation_deg);
    if (e.translation_m < 0.05 && e.rotation_deg < 5.0) ++good;
  }
  rep.median_translation_m = median(te);
  rep.median_rotation_deg = median(re);
  rep.accuracy_5cm_5deg = static_cast<double>(good) / static_cast<double>(samples.size());

  if (!maps.empty()) {
    double sum = 0.0;
    double sum2 = 0.0;
    std::size_t count = 0;
    for (std::size_t i = 0; i < maps.size(); ++i) {
      const CoordErrorStats c = coordinate_error(maps[i], gt_maps[i]);
      const double n = static_cast<double>(c.pixels);
      sum += c.mean * n;
      sum2 += (c.stddev * c.stddev + c.mean * c.mean) * n;
      count += c.pixels;
    }
    CoordErrorStats all;
    all.pixels = count;
    if (count > 0) {
      all.mean = sum / static_cast<double>(count);
      all.stddev = std::sqrt(std::max(0.0, sum2 / static_cast<double>(count) - all.mean * all.mean));
    }
    rep.coords = all;
  }
  return rep;
}

}  // namespace scf
