#pragma once

#include <string>
#include <vector>

#include "dmlcbo/bench.hpp"
#include "dmlcbo/problem.hpp"
#include "dmlcbo/smoothing.hpp"

namespace dmlcbo {

struct HypergradConfig {
  double eta = 0.5;  // fixed-point step in z = y - eta grad_y g
  int Q = 3;         // Neumann truncation depth
  double delta = 1e-6;
  DirectionSampler sampler = DirectionSampler::kSphere;
  int n_directions = 0;  // 0: d2 directions per Jacobian estimate

  SmoothingParams smoothing() const { return {delta, n_directions, sampler}; }
};

/// Structural errors (thrown) and theory-window advisories (returned) for a
/// hypergradient configuration against the problem's declared constants.
std::vector<std::string> hypergrad_config_advisories(const HypergradConfig& cfg,
                                                     const ProblemConstants& constants, int d2);

struct HypergradSample {
  Vec value;
  int c_drawn = 0;
  long n_projection_calls = 0;
};

/// Randomized-truncation Neumann estimator of the smoothed hypergradient:
///
///   grad_x f - eta Q J_xy H_0^T prod_{i=1..c} [(I - eta H_yy) H_i^T] grad_y f
///
/// with c ~ U{0..Q-1} and independent Jacobian estimates H_i taken at
/// z = y - eta grad_y g(x, y). Factors are applied right to left as
/// matrix-free products.
HypergradSample stochastic_hypergradient(const BilevelProblem& p, const Vec& x, const Vec& y,
                                         const HypergradConfig& cfg, Rng& rng);

/// Truncated Neumann sum with a fixed Jacobian `jac` of the smoothed
/// projection:
///   grad_x f - eta J_xy jac^T sum_{i<Q} [(I - eta H_yy) jac^T]^i grad_y f.
Vec deterministic_hypergradient(const BilevelProblem& p, const Vec& x, const Vec& y,
                                const HypergradConfig& cfg, const Mat& jac);

/// Same quantity with the inverse formed by a dense linear solve instead of a
/// truncated series. Throws std::runtime_error when the system is singular.
Vec dense_smoothed_hypergradient(const BilevelProblem& p, const Vec& x, const Vec& y, double eta,
                                 const Mat& jac);

/// How a test oracle obtains the Jacobian of the smoothed projection.
enum class JacobianMethod {
  // Average of difference quotients of P(z + delta u +- h e_j) under common
  // random numbers; exact wherever P is affine on the delta-ball.
  kCommonRandomDifference,
  // Average of independent two-point estimates H.
  kEstimatorMean,
};

struct JacobianOracleOptions {
  JacobianMethod method = JacobianMethod::kCommonRandomDifference;
  int n_samples = 4000;
  double fd_step_ratio = 1e-2;  // h = ratio * delta
  std::uint64_t seed = 0;
};

Mat smoothed_jacobian(const ConstraintSet& set, const Vec& z, const HypergradConfig& cfg,
                      const JacobianOracleOptions& opts);

struct SmoothedHypergradient {
  Vec value;
  Vec y_star;
  Vec z_star;
  Mat jacobian;
};

/// Dense-solve smoothed hypergradient at (x, y*(x)). Test oracle only; requires
/// d2 <= 64.
SmoothedHypergradient exact_smoothed_hypergradient_detail(const BilevelProblem& p, const Vec& x,
                                                          const HypergradConfig& cfg,
                                                          double inner_tol,
                                                          const JacobianOracleOptions& opts = {});

Vec exact_smoothed_hypergradient(const BilevelProblem& p, const Vec& x, const HypergradConfig& cfg,
                                 double inner_tol, const JacobianOracleOptions& opts = {});

/// Closed-form implicit hypergradient of the quadratic family,
///   grad_x f - J_xy A^{-1} grad_y f  at y*(x) = A^{-1} B x,
/// valid only while y*(x) stays inside the box by more than `margin`
/// (std::domain_error otherwise).
Vec exact_hypergradient_interior(const QuadraticBilevel& quad, const Vec& x, double margin = 0.0);

/// Worst observed |(I - eta H_yy) v| over unit probes; at most 1 - eta mu_g
/// when eta <= 1 / L_g.
double contraction_factor(const BilevelProblem& p, const Vec& x, const Vec& y, double eta,
                          int probes, Rng& rng);

}  // namespace dmlcbo
