#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numbers>

#include "dmlcbo/smoothing.hpp"

using namespace dmlcbo;

TEST(SampleUnitBall, InsideAndCentered) {
  Rng rng(1);
  const int dim = 3;
  const int n = 100000;
  Vec mean = Vec::Zero(dim);
  double sq = 0.0;
  for (int i = 0; i < n; ++i) {
    const Vec u = sample_unit_ball(dim, rng);
    ASSERT_LE(u.norm(), 1.0 + 1e-15);
    mean += u;
    sq += u.squaredNorm();
  }
  mean /= n;
  EXPECT_LT(mean.lpNorm<Eigen::Infinity>(), 3e-2);
  // E|u|^2 = d / (d + 2) = 0.6 for d = 3.
  EXPECT_NEAR(sq / n, 0.6, 1e-2);
}

TEST(SampleUnitSphere, UnitNorm) {
  Rng rng(2);
  for (int i = 0; i < 1000; ++i) EXPECT_NEAR(sample_unit_sphere(5, rng).norm(), 1.0, 1e-14);
}

TEST(SmoothedProjection, AffineRegionIsExact) {
  Rng rng(3);
  const auto box = ConstraintSet::box(3, -1.0, 1.0);
  Vec z(3);
  z << 0.1, -0.2, 0.3;
  EXPECT_LT((smoothed_projection(box, z, 1e-2, 100, rng) - z).norm(), 1e-15);
  const auto free = ConstraintSet::unconstrained(3);
  EXPECT_LT((smoothed_projection(free, z, 0.5, 10, rng) - z).norm(), 1e-15);
}

TEST(SmoothedProjection, WithinDeltaOfProjection) {
  Rng rng(4);
  const auto ball = ConstraintSet::l1_ball(4, 1.0);
  for (int t = 0; t < 20; ++t) {
    Vec z = Vec::Random(4) * 2.0;
    const double delta = 0.1;
    EXPECT_LE((smoothed_projection(ball, z, delta, 200, rng) - project(ball, z)).norm(),
              delta + 1e-12);
  }
}

TEST(EstimateJacobian, BallSamplerMeanIsShrunkIdentity) {
  const auto box = ConstraintSet::box(4, -1.0, 1.0);
  const Vec z = Vec::Zero(4);
  SmoothingParams params{1e-3, 0, DirectionSampler::kBall};
  Rng rng(5);
  const Mat mean = mc_mean_jacobian(box, z, params, 20000, rng);
  const Mat expected = (4.0 / 6.0) * Mat::Identity(4, 4);
  EXPECT_LT((mean - expected).lpNorm<Eigen::Infinity>(), 2.5e-2);
}

TEST(EstimateJacobian, BallSamplerHalfIdentityInTwoDimensions) {
  const auto box = ConstraintSet::box(2, -1.0, 1.0);
  SmoothingParams params{1e-3, 0, DirectionSampler::kBall};
  Rng rng(6);
  const Mat mean = mc_mean_jacobian(box, Vec::Zero(2), params, 20000, rng);
  EXPECT_LT((mean - 0.5 * Mat::Identity(2, 2)).lpNorm<Eigen::Infinity>(), 2e-2);
}

TEST(EstimateJacobian, SphereSamplerUnbiasedInInterior) {
  const auto box = ConstraintSet::box(4, -1.0, 1.0);
  SmoothingParams params{1e-3, 0, DirectionSampler::kSphere};
  Rng rng(7);
  const Mat mean = mc_mean_jacobian(box, Vec::Zero(4), params, 20000, rng);
  EXPECT_LT((mean - Mat::Identity(4, 4)).lpNorm<Eigen::Infinity>(), 2.5e-2);
}

TEST(EstimateJacobian, RampKinkGivesOneHalf) {
  const auto ramp = ConstraintSet::box(1, 0.0, std::numeric_limits<double>::infinity());
  SmoothingParams params{1e-2, 0, DirectionSampler::kSphere};
  Rng rng(8);
  for (int i = 0; i < 10; ++i) {
    EXPECT_NEAR(estimate_jacobian(ramp, Vec::Zero(1), params, rng).dense()(0, 0), 0.5, 1e-15);
  }
}

TEST(EstimateJacobian, AdjointConsistency) {
  const auto ball = ConstraintSet::l1_ball(5, 1.0);
  SmoothingParams params{1e-2, 0, DirectionSampler::kSphere};
  Rng rng(9);
  for (int t = 0; t < 50; ++t) {
    const Vec z = Vec::Random(5);
    const auto h = estimate_jacobian(ball, z, params, rng);
    const Vec a = Vec::Random(5);
    const Vec b = Vec::Random(5);
    EXPECT_NEAR(h.apply(a).dot(b), a.dot(h.apply_transpose(b)), 1e-12);
    EXPECT_LT((h.dense() * a - h.apply(a)).norm(), 1e-12);
  }
}

TEST(EstimateJacobian, DeterministicGivenSeed) {
  const auto ball = ConstraintSet::l1_ball(3, 1.0);
  SmoothingParams params{1e-2, 0, DirectionSampler::kSphere};
  const Vec z = Vec::Constant(3, 0.6);
  Rng a(42);
  Rng b(42);
  EXPECT_EQ(estimate_jacobian(ball, z, params, a).dense(),
            estimate_jacobian(ball, z, params, b).dense());
}

TEST(EstimateJacobian, DirectionCountOverride) {
  const auto box = ConstraintSet::box(3, -1.0, 1.0);
  SmoothingParams params{1e-2, 7, DirectionSampler::kSphere};
  Rng rng(10);
  const auto h = estimate_jacobian(box, Vec::Zero(3), params, rng);
  EXPECT_EQ(h.n_directions(), 7);
  EXPECT_EQ(h.dim(), 3);
}

TEST(EstimateJacobian, SpectralNormTail) {
  const double bound_coef = 4.0 * std::pow(2.0 * std::numbers::pi, 0.25);
  for (int d2 : {1, 2, 4, 8}) {
    const auto ball = ConstraintSet::l1_ball(d2, 1.0);
    SmoothingParams params{1e-2, 0, DirectionSampler::kSphere};
    Rng rng(11 + d2);
    std::vector<double> norms;
    for (int i = 0; i < 5000; ++i) {
      const Vec z = Vec::Random(d2) * 0.8;
      const Mat h = estimate_jacobian(ball, z, params, rng).dense();
      norms.push_back(Eigen::JacobiSVD<Mat>(h).singularValues()(0));
    }
    std::sort(norms.begin(), norms.end());
    const double q999 = norms[static_cast<std::size_t>(0.999 * (norms.size() - 1))];
    EXPECT_LE(q999, bound_coef * std::sqrt(d2)) << "d2=" << d2;
  }
}

TEST(EstimateJacobian, RejectsBadParameters) {
  const auto box = ConstraintSet::box(2, -1.0, 1.0);
  Rng rng(1);
  SmoothingParams bad{0.0, 0, DirectionSampler::kSphere};
  EXPECT_THROW(estimate_jacobian(box, Vec::Zero(2), bad, rng), std::invalid_argument);
  SmoothingParams ok{1e-2, 0, DirectionSampler::kSphere};
  EXPECT_THROW(estimate_jacobian(box, Vec::Zero(3), ok, rng), std::invalid_argument);
}
