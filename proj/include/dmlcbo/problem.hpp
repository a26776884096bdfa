#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "dmlcbo/projections.hpp"
#include "dmlcbo/types.hpp"

namespace dmlcbo {

/// Regularity constants of a bilevel problem. Every field is optional
/// metadata; the math never reads them, only configuration checks and
/// theory-derived bounds in tests do. Matrix-valued bounds are spectral norms.
struct ProblemConstants {
  std::optional<double> mu_g;   // strong convexity of g(x, .)
  std::optional<double> L_g;    // Lipschitz constant of grad_y g
  std::optional<double> C_gxy;  // bound on |grad^2_xy g|
  std::optional<double> C_fy;   // bound on |grad_y f|
  std::optional<double> L_f;    // Lipschitz constant of grad f

  static constexpr double kDefaultMuG = 1e-3;
  static constexpr double kDefaultLG = 1e3;

  double mu_g_or_default() const { return mu_g.value_or(kDefaultMuG); }
  double L_g_or_default() const { return L_g.value_or(kDefaultLG); }
};

using ScalarOracle = std::function<double(const Vec& x, const Vec& y)>;
using VectorOracle = std::function<Vec(const Vec& x, const Vec& y)>;
using ProductOracle = std::function<Vec(const Vec& x, const Vec& y, const Vec& v)>;

/// min_x f(x, y*(x))  s.t.  y*(x) = argmin_{y in Y} g(x, y).
///
/// Oracles must be pure and safe to call concurrently. `cross_jvp` applies the
/// d1 x d2 matrix grad^2_xy g to a d2-vector; the transpose action is never
/// needed.
struct BilevelProblem {
  int d1 = 0;
  int d2 = 0;
  ScalarOracle upper_value;
  VectorOracle grad_x_f;
  VectorOracle grad_y_f;
  ScalarOracle lower_value;
  VectorOracle grad_y_g;
  ProductOracle hvp_yy;
  ProductOracle cross_jvp;
  ConstraintSet constraint = ConstraintSet::unconstrained(1);
  ProblemConstants constants;
};

struct ValidationCheck {
  std::string name;
  bool passed = true;
  double worst_violation = 0.0;
};

struct ValidationReport {
  std::vector<ValidationCheck> checks;
  bool passed = true;

  const ValidationCheck* find(const std::string& name) const;
};

/// Numerically probes the oracle contracts at `probes` random (x, y) pairs:
/// purity, finite-difference consistency of every derivative oracle, symmetry
/// and strong convexity of hvp_yy. Throws std::invalid_argument naming the
/// oracle when an output has the wrong dimension.
ValidationReport validate_problem(const BilevelProblem& p, int probes, std::uint64_t seed);

}  // namespace dmlcbo
