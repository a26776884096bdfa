#pragma once

#include <optional>
#include <vector>

#include "dmlcbo/hypergradient.hpp"
#include "dmlcbo/problem.hpp"

namespace dmlcbo {

struct InnerSolveReport {
  Vec y_star;
  int iterations = 0;
  double final_fp_residual = 0.0;       // |y - P(y - eta grad_y g(x, y))|
  std::vector<double> residual_history;  // one entry per iteration, including the start
};

class InnerSolveError : public std::runtime_error {
 public:
  InnerSolveError(double last_residual, const std::string& what)
      : std::runtime_error(what), last_residual_(last_residual) {}
  double last_residual() const noexcept { return last_residual_; }

 private:
  double last_residual_;
};

/// Projected-gradient fixed-point iteration y <- P(y - eta grad_y g(x, y))
/// started from `y0` (default: projection of the origin) until the
/// fixed-point residual falls to `tol`. Throws InnerSolveError after max_iter.
InnerSolveReport inner_solve(const BilevelProblem& p, const Vec& x, double eta, double tol,
                             int max_iter, const std::optional<Vec>& y0 = std::nullopt);

/// Enumerative projection oracle. Box, L2Ball, HalfSpace and Unconstrained use
/// closed forms; L1Ball and Simplex enumerate sign/support patterns (dim <= 6).
Vec brute_force_projection(const ConstraintSet& set, const Vec& z);

/// Central differences of F(x) = f(x, y*(x)) with y*(x) the projected-gradient
/// fixed point solved to inner_tol.
Vec finite_diff_hypergradient(const BilevelProblem& p, const Vec& x, const HypergradConfig& cfg,
                              double h, double inner_tol);

/// |mean over n_seeds of the dense-solve smoothed hypergradient at (x, y*(x))|,
/// each seed drawing its own Jacobian oracle sample. Computable surrogate for
/// the distance of x from (delta, eps)-stationarity.
double stationarity_measure(const BilevelProblem& p, const Vec& x, const HypergradConfig& cfg,
                            int n_seeds, double inner_tol, std::uint64_t seed = 0,
                            const JacobianOracleOptions& opts = {});

}  // namespace dmlcbo
