#include <gtest/gtest.h>

#include <atomic>
#include <memory>

#include "dmlcbo/bench.hpp"
#include "dmlcbo/problem.hpp"

using namespace dmlcbo;

namespace {

BilevelProblem quadratic_problem() {
  return make_quadratic(3, 4, 1.0, 3.0, 1.0, 1.0, 7).problem();
}

}  // namespace

TEST(ValidateProblem, QuadraticPassesEveryCheck) {
  const auto report = validate_problem(quadratic_problem(), 10, 1);
  EXPECT_TRUE(report.passed);
  for (const auto& c : report.checks) EXPECT_TRUE(c.passed) << c.name << " " << c.worst_violation;
}

TEST(ValidateProblem, HypercleanPassesEveryCheck) {
  SyntheticBinaryOptions o;
  o.n = 30;
  o.dim = 6;
  o.seed = 3;
  auto train = make_synthetic_binary(o);
  o.seed = 4;
  auto val = make_synthetic_binary(o);
  const auto report = validate_problem(make_hyperclean(train, val, 0.1).problem(), 10, 2);
  for (const auto& c : report.checks) EXPECT_TRUE(c.passed) << c.name << " " << c.worst_violation;
}

TEST(ValidateProblem, DetectsScaledGradient) {
  auto p = quadratic_problem();
  auto inner = p.grad_y_g;
  p.grad_y_g = [inner](const Vec& x, const Vec& y) -> Vec { return 2.0 * inner(x, y); };
  const auto report = validate_problem(p, 5, 1);
  EXPECT_FALSE(report.passed);
  const auto* c = report.find("grad_y_g finite-difference");
  ASSERT_NE(c, nullptr);
  EXPECT_FALSE(c->passed);
}

TEST(ValidateProblem, DetectsMissingCurvature) {
  auto p = quadratic_problem();
  p.constants.mu_g = 1.0;
  p.hvp_yy = [](const Vec&, const Vec&, const Vec& v) -> Vec { return Vec::Zero(v.size()); };
  const auto report = validate_problem(p, 5, 1);
  const auto* c = report.find("strong convexity");
  ASSERT_NE(c, nullptr);
  EXPECT_FALSE(c->passed);
  EXPECT_GE(c->worst_violation, 1.0 - 1e-12);
}

TEST(ValidateProblem, DetectsImpureOracle) {
  auto p = quadratic_problem();
  auto counter = std::make_shared<std::atomic<int>>(0);
  auto inner = p.grad_x_f;
  p.grad_x_f = [inner, counter](const Vec& x, const Vec& y) -> Vec {
    return inner(x, y) + Vec::Constant(x.size(), 1e-9 * ++*counter);
  };
  const auto* c = validate_problem(p, 3, 1).find("purity");
  ASSERT_NE(c, nullptr);
  EXPECT_FALSE(c->passed);
}

TEST(ValidateProblem, WrongDimensionNamesOracle) {
  auto p = quadratic_problem();
  p.cross_jvp = [](const Vec&, const Vec&, const Vec&) -> Vec { return Vec::Zero(1); };
  try {
    validate_problem(p, 2, 1);
    FAIL() << "expected invalid_argument";
  } catch (const std::invalid_argument& e) {
    EXPECT_NE(std::string(e.what()).find("cross_jvp"), std::string::npos) << e.what();
  }
}

TEST(ValidateProblem, RejectsBadArguments) {
  auto p = quadratic_problem();
  EXPECT_THROW(validate_problem(p, 0, 1), std::invalid_argument);
  p.constraint = ConstraintSet::unconstrained(2);
  EXPECT_THROW(validate_problem(p, 1, 1), std::invalid_argument);
}

TEST(ValidateProblem, IsDeterministicInSeed) {
  const auto p = quadratic_problem();
  const auto a = validate_problem(p, 4, 9);
  const auto b = validate_problem(p, 4, 9);
  ASSERT_EQ(a.checks.size(), b.checks.size());
  for (std::size_t i = 0; i < a.checks.size(); ++i) {
    EXPECT_EQ(a.checks[i].worst_violation, b.checks[i].worst_violation);
  }
}

TEST(ProblemConstants, DefaultsWhenUnset) {
  ProblemConstants c;
  EXPECT_EQ(c.mu_g_or_default(), ProblemConstants::kDefaultMuG);
  EXPECT_EQ(c.L_g_or_default(), ProblemConstants::kDefaultLG);
  c.mu_g = 0.25;
  EXPECT_EQ(c.mu_g_or_default(), 0.25);
}
