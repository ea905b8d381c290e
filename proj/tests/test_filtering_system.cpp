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
#include <vector>

#include <boost/math/special_functions/gamma.hpp>
#include <gtest/gtest.h>

#include "scf/filtering.hpp"
#include "scf/losses.hpp"
#include "test_util.hpp"

namespace scf {
namespace {

constexpr double kQuantileTol = 1e-6;
constexpr double kOracleTol = 1e-12;

PixelGaussian gaussian(const Eigen::Vector3d& m, double v) { return {m, v}; }

CoordStateMap map_of(std::initializer_list<std::pair<Eigen::Vector3d, double>> pixels) {
  CoordStateMap m(1, static_cast<int>(pixels.size()));
  std::size_t i = 0;
  for (const auto& [x, v] : pixels) m.set(i++, x, v);
  return m;
}

TEST(ChiSquare, KnownQuantiles) {
  EXPECT_NEAR(chi2_quantile(3, 0.95), 7.814728, kQuantileTol);
  EXPECT_NEAR(chi2_quantile(3, 0.50), 2.365974, kQuantileTol);
  EXPECT_NEAR(chi2_quantile(1, 0.95), 3.841459, kQuantileTol);
}

TEST(ChiSquare, AgreesWithBoost) {
  for (double dof : {1.0, 2.0, 3.0, 7.0}) {
    for (double p : {0.01, 0.1, 0.5, 0.9, 0.95, 0.99, 0.999}) {
      const double oracle = 2.0 * boost::math::gamma_p_inv(dof / 2.0, p);
      EXPECT_NEAR(chi2_quantile(dof, p), oracle, 1e-9 * std::max(1.0, oracle));
      EXPECT_NEAR(chi2_cdf(dof, oracle), p, 1e-9);
    }
    for (double x : {0.1, 1.0, 3.0, 10.0, 30.0}) {
      EXPECT_NEAR(regularized_gamma_p(dof / 2.0, x), boost::math::gamma_p(dof / 2.0, x), 1e-12);
    }
  }
}

TEST(ChiSquare, RoundTrip) {
  for (double p = 0.02; p < 1.0; p += 0.07) EXPECT_NEAR(chi2_cdf(3, chi2_quantile(3, p)), p, 1e-9);
}

TEST(ChiSquare, BadProbability) {
  EXPECT_SCF_ERROR(chi2_quantile(3, 0.0), ErrorCode::kBadProbability);
  EXPECT_SCF_ERROR(chi2_quantile(3, 1.0), ErrorCode::kBadProbability);
  EXPECT_SCF_ERROR(chi2_quantile(3, -0.2), ErrorCode::kBadProbability);
  EXPECT_SCF_ERROR(chi2_quantile(3, NAN), ErrorCode::kBadProbability);
}

TEST(FusePixel, EqualVariancesGiveMidpoint) {
  const PixelFusion f = fuse_pixel(gaussian({0, 0, 0}, 0.04), gaussian({1, 2, 3}, 0.04));
  EXPECT_LE((f.posterior.mean - Eigen::Vector3d(0.5, 1.0, 1.5)).norm(), kOracleTol);
  EXPECT_NEAR(f.posterior.variance, 0.02, kOracleTol);
  EXPECT_NEAR(f.gain, 0.5, kOracleTol);
  EXPECT_NEAR(f.nis, 14.0 / 0.08, 1e-9);
  EXPECT_EQ(f.innovation, Eigen::Vector3d(1, 2, 3));
}

TEST(FusePixel, ExactMeasurementWins) {
  const PixelFusion f = fuse_pixel(gaussian({0, 0, 0}, 1e-2), gaussian({1, 1, 1}, 1e-14));
  EXPECT_LE((f.posterior.mean - Eigen::Vector3d(1, 1, 1)).norm(), 1e-10);
  EXPECT_LT(f.posterior.variance, 1e-13);
}

// Product of two isotropic Gaussians, written in information form.
PixelGaussian product_oracle(const PixelGaussian& a, const PixelGaussian& b) {
  const double info = 1.0 / a.variance + 1.0 / b.variance;
  return {(a.mean / a.variance + b.mean / b.variance) / info, 1.0 / info};
}

TEST(FusePixel, MatchesGaussianProduct) {
  CounterRng rng(5);
  for (int trial = 0; trial < 1000; ++trial) {
    const PixelGaussian prior = gaussian(rng.normal3(), std::exp(-6.0 + 4.0 * rng.uniform()));
    const PixelGaussian meas = gaussian(rng.normal3(), std::exp(-6.0 + 4.0 * rng.uniform()));
    const PixelFusion f = fuse_pixel(prior, meas);
    const PixelGaussian o = product_oracle(prior, meas);
    EXPECT_LE((f.posterior.mean - o.mean).norm(), kOracleTol);
    EXPECT_LE(testing::rel_err(f.posterior.variance, o.variance), kOracleTol);
    // Precisions add.
    EXPECT_LE(testing::rel_err(1.0 / f.posterior.variance, 1.0 / prior.variance + 1.0 / meas.variance),
              kOracleTol);
    // The posterior is on the segment and below both variances.
    EXPECT_GE(f.gain, 0.0);
    EXPECT_LE(f.gain, 1.0);
    EXPECT_LE(f.posterior.variance, std::min(prior.variance, meas.variance));
    EXPECT_LE((f.posterior.mean - prior.mean - f.gain * (meas.mean - prior.mean)).norm(), kOracleTol);
    // Order does not matter.
    const PixelFusion g = fuse_pixel(meas, prior);
    EXPECT_LE((g.posterior.mean - f.posterior.mean).norm(), kOracleTol);
    EXPECT_LE(testing::rel_err(g.posterior.variance, f.posterior.variance), kOracleTol);
    EXPECT_LE(testing::rel_err(g.nis, f.nis), kOracleTol);
  }
}

TEST(KalmanUpdate, MapMatchesPixelRule) {
  CounterRng rng(6);
  CoordStateMap prior(12, 15), meas(12, 15);
  for (std::size_t i = 0; i < prior.size(); ++i) {
    prior.set(i, rng.normal3(), 1e-2);
    meas.set(i, prior.coords[i] + 0.05 * rng.normal3(), 1e-2);
  }
  const KalmanResult r = kalman_update(prior, meas, std::nullopt);
  EXPECT_EQ(r.diagnostics.fused_count(), prior.size());
  EXPECT_EQ(r.diagnostics.rejected_count(), 0u);
  for (std::size_t i = 0; i < prior.size(); ++i) {
    const PixelFusion f = fuse_pixel({prior.coords[i], prior.variance(i)}, {meas.coords[i], meas.variance(i)});
    EXPECT_LE((r.posterior.coords[i] - f.posterior.mean).norm(), kOracleTol);
    EXPECT_LE(testing::rel_err(r.posterior.variance(i), f.posterior.variance), 1e-12);
    EXPECT_DOUBLE_EQ(r.diagnostics.nis[i], f.nis);
    EXPECT_DOUBLE_EQ(r.diagnostics.kalman_gain[i], f.gain);
  }
}

TEST(KalmanUpdate, PassThroughAndInvalid) {
  CoordStateMap prior = map_of({{{0, 0, 1}, 1e-2}, {{0, 0, 2}, 2e-2}, {{0, 0, 3}, 3e-2}});
  CoordStateMap meas = map_of({{{1, 0, 1}, 4e-2}, {{1, 0, 2}, 5e-2}, {{1, 0, 3}, 6e-2}});
  prior.invalidate(0);
  meas.invalidate(1);
  meas.invalidate(2);
  prior.invalidate(2);
  const KalmanResult r = kalman_update(prior, meas);
  EXPECT_EQ(r.posterior.coords[0], meas.coords[0]);
  EXPECT_EQ(r.posterior.log_variance[0], meas.log_variance[0]);
  EXPECT_EQ(r.posterior.coords[1], prior.coords[1]);
  EXPECT_EQ(r.posterior.log_variance[1], prior.log_variance[1]);
  EXPECT_FALSE(r.posterior.is_valid(2));
  EXPECT_EQ(r.diagnostics.fused_count(), 0u);
}

TEST(KalmanUpdate, GateResetsToMeasurement) {
  // NIS 1/0.02 = 50 fails the gate; NIS 0.01/0.02 = 0.5 passes.
  const CoordStateMap prior = map_of({{{0, 0, 0}, 1e-2}, {{0, 0, 0}, 1e-2}});
  const CoordStateMap meas = map_of({{{1, 0, 0}, 1e-2}, {{0.1, 0, 0}, 1e-2}});
  const KalmanResult gated = kalman_update(prior, meas, 0.05);
  EXPECT_EQ(gated.posterior.coords[0], meas.coords[0]);
  EXPECT_EQ(gated.posterior.log_variance[0], meas.log_variance[0]);
  EXPECT_TRUE(gated.diagnostics.nis_rejected[0]);
  EXPECT_FALSE(gated.diagnostics.nis_rejected[1]);
  EXPECT_NEAR(gated.posterior.coords[1].x(), 0.05, kOracleTol);
  EXPECT_EQ(gated.diagnostics.rejected_count(), 1u);
  EXPECT_EQ(gated.diagnostics.exceed_count(0.05), 1u);

  const KalmanResult open = kalman_update(prior, meas, std::nullopt);
  EXPECT_NEAR(open.posterior.coords[0].x(), 0.5, kOracleTol);
  EXPECT_EQ(open.diagnostics.rejected_count(), 0u);
  EXPECT_EQ(open.diagnostics.exceed_count(0.05), 1u);
}

TEST(KalmanUpdate, CalibratedInputsExceedAtAlpha) {
  CounterRng rng(12);
  const int n = 200;
  CoordStateMap prior(n, n), meas(n, n);
  for (std::size_t i = 0; i < prior.size(); ++i) {
    const Eigen::Vector3d truth = rng.normal3();
    prior.set(i, truth + 0.03 * rng.normal3(), 0.03 * 0.03);
    meas.set(i, truth + 0.04 * rng.normal3(), 0.04 * 0.04);
  }
  const KalmanResult r = kalman_update(prior, meas, 0.05);
  const double rate = static_cast<double>(r.diagnostics.exceed_count(0.05)) / prior.size();
  // Binomial sd at 4e4 draws is 0.0011.
  EXPECT_NEAR(rate, 0.05, 0.005);
}

TEST(KalmanUpdate, Errors) {
  const CoordStateMap a(2, 2), b(2, 3);
  EXPECT_SCF_ERROR(kalman_update(a, b), ErrorCode::kShapeMismatch);
  EXPECT_SCF_ERROR(kalman_update(a, a, 1.5), ErrorCode::kBadProbability);
  EXPECT_SCF_ERROR(kalman_update(a, a, 0.0), ErrorCode::kBadProbability);
}

TEST(Baselines, TPoolerIsPlainMean) {
  const CoordStateMap n1 = map_of({{{0, 0, 0}, 1e-2}, {{0, 0, 0}, 1e-2}});
  CoordStateMap n2 = map_of({{{3, 0, 0}, 3e-2}, {{5, 0, 0}, 1e-2}});
  const CoordStateMap z = map_of({{{6, 3, 0}, 2e-2}, {{1, 1, 1}, 1e-2}});
  n2.invalidate(1);
  const std::vector<CoordStateMap> nb{n1, n2};
  const CoordStateMap out = fuse_baseline(nb, z, BaselineMode::kTPooler);
  EXPECT_LE((out.coords[0] - Eigen::Vector3d(3, 1, 0)).norm(), kOracleTol);
  EXPECT_NEAR(out.variance(0), 2e-2 / 3.0, 1e-15);
  EXPECT_LE((out.coords[1] - Eigen::Vector3d(0.5, 0.5, 0.5)).norm(), kOracleTol);
  EXPECT_NEAR(out.variance(1), 1e-2 / 2.0, 1e-15);
}

TEST(Baselines, SWeightPrefersSimilarCandidates) {
  const CoordStateMap n1 = map_of({{{0.01, 0, 0}, 1e-2}});
  const CoordStateMap n2 = map_of({{{1, 0, 0}, 1e-2}});
  const CoordStateMap z = map_of({{{0, 0, 0}, 1e-2}});
  const std::vector<CoordStateMap> nb{n1, n2};
  const double t = 1e-2;
  const CoordStateMap out = fuse_baseline(nb, z, BaselineMode::kSWeight, t);
  const double w1 = std::exp(-1e-4 / t), w2 = std::exp(-1.0 / t), w3 = 1.0;
  const double sum = w1 + w2 + w3;
  EXPECT_NEAR(out.coords[0].x(), (0.01 * w1 + w2) / sum, kOracleTol);
  EXPECT_NEAR(out.variance(0), 1e-2 * (w1 * w1 + w2 * w2 + w3 * w3) / (sum * sum), 1e-15);
}

TEST(Baselines, SWeightApproachesTPoolerAtHighTemperature) {
  CounterRng rng(2);
  CoordStateMap z(4, 4);
  std::vector<CoordStateMap> nb(3, CoordStateMap(4, 4));
  for (std::size_t i = 0; i < z.size(); ++i) {
    z.set(i, rng.normal3(), 1e-2);
    for (auto& m : nb) m.set(i, rng.normal3(), std::exp(-4.0 + rng.normal()));
  }
  const CoordStateMap t = fuse_baseline(nb, z, BaselineMode::kTPooler);
  const CoordStateMap s = fuse_baseline(nb, z, BaselineMode::kSWeight, 1e12);
  for (std::size_t i = 0; i < z.size(); ++i) {
    EXPECT_LE((t.coords[i] - s.coords[i]).norm(), 1e-9);
    EXPECT_LE(testing::rel_err(t.variance(i), s.variance(i)), 1e-9);
  }
  EXPECT_SCF_ERROR(fuse_baseline(nb, z, BaselineMode::kSWeight, 0.0), ErrorCode::kInvalidArgument);
  std::vector<CoordStateMap> bad{CoordStateMap(4, 5)};
  EXPECT_SCF_ERROR(fuse_baseline(bad, z, BaselineMode::kTPooler), ErrorCode::kShapeMismatch);
}

TEST(PosteriorLoss, FusedStateLowersLoss) {
  // With calibrated inputs, fusing beats either input on average.
  CounterRng rng(21);
  CoordStateMap gt(100, 100), prior(100, 100), meas(100, 100);
  for (std::size_t i = 0; i < gt.size(); ++i) {
    gt.set_log(i, rng.normal3(), 0.0);
    prior.set(i, gt.coords[i] + 0.02 * rng.normal3(), 4e-4);
    meas.set(i, gt.coords[i] + 0.02 * rng.normal3(), 4e-4);
  }
  const KalmanResult r = kalman_update(prior, meas, std::nullopt);
  const double post = posterior_loss(r.posterior, gt).total;
  EXPECT_LT(post, likelihood_loss(meas, gt).total);
  EXPECT_LT(post, prior_loss(prior, gt).total);
}

}  // namespace
}  // namespace scf
