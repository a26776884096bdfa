#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "dmlcbo/projections.hpp"
#include "dmlcbo/reference.hpp"

using namespace dmlcbo;

namespace {

Vec v(std::initializer_list<double> xs) {
  Vec out(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) out[i++] = x;
  return out;
}

Vec gaussian(int n, Rng& rng, double scale = 1.0) {
  std::normal_distribution<double> d(0.0, scale);
  Vec out(n);
  for (int i = 0; i < n; ++i) out[i] = d(rng);
  return out;
}

std::vector<ConstraintSet> all_kinds(int dim, Rng& rng) {
  Vec lo = -Vec::Ones(dim);
  Vec hi = Vec::Ones(dim);
  lo[0] = -0.5;
  hi[dim - 1] = 2.0;
  return {ConstraintSet::box(lo, hi),
          ConstraintSet::l2_ball(gaussian(dim, rng, 0.3), 1.3),
          ConstraintSet::l1_ball(dim, 1.0),
          ConstraintSet::simplex(dim, 1.5),
          ConstraintSet::half_space(gaussian(dim, rng) + Vec::Constant(dim, 0.1), 0.4),
          ConstraintSet::unconstrained(dim)};
}

}  // namespace

TEST(Project, BoxClampsComponentwise) {
  const auto box = ConstraintSet::box(3, -1.0, 1.0);
  EXPECT_EQ(project(box, v({2, 0.5, -3})), v({1, 0.5, -1}));
}

TEST(Project, L1InteriorIsFixed) {
  const auto ball = ConstraintSet::l1_ball(2, 1.0);
  EXPECT_EQ(project(ball, v({0.3, -0.2})), v({0.3, -0.2}));
}

TEST(Project, L1SoftThreshold) {
  const auto ball = ConstraintSet::l1_ball(2, 1.0);
  const Vec p = project(ball, v({1, 1}));
  EXPECT_NEAR(p[0], 0.5, 1e-15);
  EXPECT_NEAR(p[1], 0.5, 1e-15);
}

TEST(Project, L1MatchesGridSearchOnSphere) {
  // Dense parametrization of the l1 sphere in 2-d: y = (t, 1 - |t|) and (t, |t| - 1).
  const auto ball = ConstraintSet::l1_ball(2, 1.0);
  const Vec z = v({1, 1});
  double best = std::numeric_limits<double>::infinity();
  Vec arg(2);
  for (int i = 0; i <= 200000; ++i) {
    const double t = -1.0 + 2.0 * i / 200000.0;
    for (double s : {1.0, -1.0}) {
      const Vec y = v({t, s * (1.0 - std::abs(t))});
      const double val = (y - z).squaredNorm();
      if (val < best) {
        best = val;
        arg = y;
      }
    }
  }
  EXPECT_LT((project(ball, z) - arg).norm(), 1e-4);
}

TEST(Project, SimplexMatchesEnumeration) {
  const auto s = ConstraintSet::simplex(3, 1.0);
  const Vec z = v({0.9, 0.6, -0.1});
  const Vec p = project(s, z);
  EXPECT_LT((p - brute_force_projection(s, z)).norm(), 1e-8);
  // Threshold 0.25 by hand: (0.9 + 0.6 - 1) / 2.
  EXPECT_NEAR(p[0], 0.65, 1e-12);
  EXPECT_NEAR(p[1], 0.35, 1e-12);
  EXPECT_EQ(p[2], 0.0);
}

TEST(Project, SimplexSnapsTinyComponentsToZero) {
  const auto s = ConstraintSet::simplex(3, 1.0);
  const Vec p = project(s, v({1.0, 5e-15, -2.0}));
  EXPECT_TRUE(s.contains(p));
  EXPECT_GE(p.minCoeff(), 0.0);
  EXPECT_EQ(p[2], 0.0);
}

TEST(Project, L2BallAndHalfSpace) {
  const auto ball = ConstraintSet::l2_ball(v({1, 0}), 2.0);
  EXPECT_LT((project(ball, v({5, 0})) - v({3, 0})).norm(), 1e-15);
  const auto hs = ConstraintSet::half_space(v({0, 2}), 2.0);  // y2 <= 1
  EXPECT_LT((project(hs, v({3, 4})) - v({3, 1})).norm(), 1e-15);
  EXPECT_EQ(project(hs, v({3, -4})), v({3, -4}));
}

TEST(Project, InfiniteBoxBounds) {
  const auto ramp = ConstraintSet::box(1, 0.0, std::numeric_limits<double>::infinity());
  EXPECT_EQ(project(ramp, v({-2}))[0], 0.0);
  EXPECT_EQ(project(ramp, v({1e300}))[0], 1e300);
}

TEST(Project, RejectsBadInput) {
  const auto box = ConstraintSet::box(2, -1.0, 1.0);
  EXPECT_THROW(project(box, v({1, 2, 3})), std::invalid_argument);
  EXPECT_THROW(project(box, v({std::nan(""), 0})), std::invalid_argument);
  EXPECT_THROW(project(box, v({std::numeric_limits<double>::infinity(), 0})), std::invalid_argument);
}

TEST(ConstraintSetFactory, ValidatesParameters) {
  EXPECT_THROW(ConstraintSet::box(v({1, 0}), v({0, 1})), std::invalid_argument);
  EXPECT_THROW(ConstraintSet::l1_ball(3, 0.0), std::invalid_argument);
  EXPECT_THROW(ConstraintSet::l2_ball(v({0}), -1.0), std::invalid_argument);
  EXPECT_THROW(ConstraintSet::simplex(2, -1.0), std::invalid_argument);
  EXPECT_THROW(ConstraintSet::half_space(v({0, 0}), 1.0), std::invalid_argument);
  EXPECT_THROW(ConstraintSet::unconstrained(0), std::invalid_argument);
}

TEST(ConstraintSetFactory, LipschitzMetadataIsOne) {
  Rng rng(1);
  for (const auto& s : all_kinds(3, rng)) EXPECT_EQ(s.lipschitz(), 1.0) << s.kind_name();
}

TEST(VariationalInequality, InteriorBoxPoint) {
  const auto box = ConstraintSet::box(3, -1.0, 1.0);
  const Vec z = v({0.1, -0.2, 0.3});
  EXPECT_LE(check_variational_inequality(box, z, z, 64, 3), 1e-12);
}

TEST(VariationalInequality, CertifiesCorrectL1Projection) {
  const auto ball = ConstraintSet::l1_ball(2, 1.0);
  const Vec z = v({1, 1});
  EXPECT_LE(check_variational_inequality(ball, z, v({0.5, 0.5}), 256, 4), 1e-9 * (1 + z.norm()));
}

TEST(VariationalInequality, DetectsWrongL1Projection) {
  const auto ball = ConstraintSet::l1_ball(2, 1.0);
  EXPECT_GE(check_variational_inequality(ball, v({1, 1}), v({1, 0}), 256, 4), 0.24);
}

TEST(VariationalInequality, HoldsForEveryKind) {
  Rng rng(11);
  for (int dim : {1, 2, 5}) {
    for (const auto& s : all_kinds(dim, rng)) {
      for (int t = 0; t < 20; ++t) {
        const Vec z = gaussian(dim, rng, 2.0);
        const Vec p = project(s, z);
        EXPECT_LE(check_variational_inequality(s, z, p, 128, t), 1e-9 * (1 + z.norm()))
            << s.kind_name() << " dim " << dim;
      }
    }
  }
}

TEST(ProjectionProperties, IdempotentFeasibleNonexpansive) {
  Rng rng(5);
  for (int dim : {1, 3, 6, 12}) {
    for (const auto& s : all_kinds(dim, rng)) {
      for (int t = 0; t < 200; ++t) {
        const Vec z1 = gaussian(dim, rng, 3.0);
        const Vec z2 = gaussian(dim, rng, 3.0);
        const Vec p1 = project(s, z1);
        const Vec p2 = project(s, z2);
        ASSERT_TRUE(s.contains(p1)) << s.kind_name();
        ASSERT_LE((project(s, p1) - p1).lpNorm<Eigen::Infinity>(), 1e-12) << s.kind_name();
        ASSERT_LE((p1 - p2).norm(), (z1 - z2).norm() * (1 + 1e-14)) << s.kind_name();
      }
    }
  }
}

TEST(ProjectionProperties, MatchesBruteForceOracle) {
  Rng rng(9);
  for (int dim = 1; dim <= 6; ++dim) {
    for (const auto& s : all_kinds(dim, rng)) {
      for (int t = 0; t < 100; ++t) {
        const Vec z = gaussian(dim, rng, 2.0);
        ASSERT_LE((project(s, z) - brute_force_projection(s, z)).norm(), 1e-8) << s.kind_name();
      }
    }
  }
}

TEST(ProjectionProperties, L1TiesResolveToUniqueProjection) {
  const auto ball = ConstraintSet::l1_ball(4, 1.0);
  const Vec z = v({2, -2, 2, 0.1});
  const Vec p = project(ball, z);
  EXPECT_NEAR(p.lpNorm<1>(), 1.0, 1e-12);
  EXPECT_NEAR(p[0], 1.0 / 3, 1e-12);
  EXPECT_NEAR(p[1], -1.0 / 3, 1e-12);
  EXPECT_NEAR(p[2], 1.0 / 3, 1e-12);
  EXPECT_EQ(p[3], 0.0);
}
