#include "dmlcbo/hypergradient.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

#include "dmlcbo/reference.hpp"

namespace dmlcbo {

namespace {

void validate(const HypergradConfig& cfg) {
  if (!(cfg.eta > 0.0)) throw std::invalid_argument("hypergradient: eta must be positive");
  if (cfg.Q < 1) throw std::invalid_argument("hypergradient: Q must be >= 1");
  if (!(cfg.delta > 0.0)) throw std::invalid_argument("hypergradient: delta must be positive");
}

Mat dense_hessian(const BilevelProblem& p, const Vec& x, const Vec& y) {
  Mat h(p.d2, p.d2);
  for (int j = 0; j < p.d2; ++j) h.col(j) = p.hvp_yy(x, y, Vec::Unit(p.d2, j));
  return h;
}

constexpr int kDenseLimit = 64;

}  // namespace

std::vector<std::string> hypergrad_config_advisories(const HypergradConfig& cfg,
                                                     const ProblemConstants& constants, int d2) {
  validate(cfg);
  std::vector<std::string> out;
  if (constants.mu_g) {
    const double mu = *constants.mu_g;
    if (cfg.eta * mu >= 1.0) {
      std::ostringstream s;
      s << "eta = " << cfg.eta << " >= 1/mu_g = " << 1.0 / mu
        << ": the Neumann bias bound requires eta < 1/mu_g";
      out.push_back(s.str());
    } else {
      const double lower =
          (1.0 / mu) * (1.0 - 1.0 / (4.0 * std::pow(2.0 * std::numbers::pi, 0.25) * std::sqrt(d2)));
      if (cfg.eta < lower) {
        std::ostringstream s;
        s << "eta = " << cfg.eta << " is below " << lower
          << ", the lower end of the window under which the estimator variance bound holds";
        out.push_back(s.str());
      }
    }
  }
  if (constants.L_g && cfg.eta * *constants.L_g > 2.0) {
    std::ostringstream s;
    s << "eta * L_g = " << cfg.eta * *constants.L_g
      << " > 2: I - eta * hvp_yy is not a contraction and the series may diverge";
    out.push_back(s.str());
  }
  return out;
}

HypergradSample stochastic_hypergradient(const BilevelProblem& p, const Vec& x, const Vec& y,
                                         const HypergradConfig& cfg, Rng& rng) {
  validate(cfg);
  require_dim(x, p.d1, "stochastic_hypergradient(x)");
  require_dim(y, p.d2, "stochastic_hypergradient(y)");

  const Vec z = y - cfg.eta * p.grad_y_g(x, y);
  require_finite(z, "z = y - eta grad_y g");

  std::uniform_int_distribution<int> depth(0, cfg.Q - 1);
  const int c = depth(rng);
  const SmoothingParams params = cfg.smoothing();
  std::vector<JacobianEstimate> factors;
  factors.reserve(c + 1);
  for (int i = 0; i <= c; ++i) factors.push_back(estimate_jacobian(p.constraint, z, params, rng));

  Vec r = p.grad_y_f(x, y);
  require_finite(r, "grad_y_f");
  for (int i = c; i >= 1; --i) {
    r = factors[i].apply_transpose(r);
    r -= cfg.eta * p.hvp_yy(x, y, r);
  }
  r = factors[0].apply_transpose(r);
  require_finite(r, "neumann chain");

  HypergradSample out;
  out.value = p.grad_x_f(x, y) - (cfg.eta * cfg.Q) * p.cross_jvp(x, y, r);
  require_finite(out.value, "hypergradient");
  out.c_drawn = c;
  out.n_projection_calls = 2L * (c + 1) * params.directions_for(p.d2);
  return out;
}

Vec deterministic_hypergradient(const BilevelProblem& p, const Vec& x, const Vec& y,
                                const HypergradConfig& cfg, const Mat& jac) {
  validate(cfg);
  require_dim(x, p.d1, "deterministic_hypergradient(x)");
  require_dim(y, p.d2, "deterministic_hypergradient(y)");
  if (jac.rows() != p.d2 || jac.cols() != p.d2) {
    throw std::invalid_argument("deterministic_hypergradient: jac must be d2 x d2");
  }
  Vec term = p.grad_y_f(x, y);
  Vec sum = term;
  for (int i = 1; i < cfg.Q; ++i) {
    term = jac.transpose() * term;
    term -= cfg.eta * p.hvp_yy(x, y, term);
    sum += term;
  }
  require_finite(sum, "neumann sum");
  Vec out = p.grad_x_f(x, y) - cfg.eta * p.cross_jvp(x, y, jac.transpose() * sum);
  require_finite(out, "hypergradient");
  return out;
}

Vec dense_smoothed_hypergradient(const BilevelProblem& p, const Vec& x, const Vec& y, double eta,
                                 const Mat& jac) {
  if (jac.rows() != p.d2 || jac.cols() != p.d2) {
    throw std::invalid_argument("dense_smoothed_hypergradient: jac must be d2 x d2");
  }
  const Mat I = Mat::Identity(p.d2, p.d2);
  const Mat system = I - (I - eta * dense_hessian(p, x, y)) * jac.transpose();
  const Eigen::FullPivLU<Mat> lu(system);
  if (!lu.isInvertible()) {
    throw std::runtime_error("dense_smoothed_hypergradient: singular system");
  }
  const Vec s = lu.solve(p.grad_y_f(x, y));
  Vec out = p.grad_x_f(x, y) - eta * p.cross_jvp(x, y, jac.transpose() * s);
  require_finite(out, "hypergradient");
  return out;
}

Mat smoothed_jacobian(const ConstraintSet& set, const Vec& z, const HypergradConfig& cfg,
                      const JacobianOracleOptions& opts) {
  if (opts.n_samples < 1) throw std::invalid_argument("smoothed_jacobian: n_samples must be >= 1");
  Rng rng(opts.seed);
  if (opts.method == JacobianMethod::kEstimatorMean) {
    return mc_mean_jacobian(set, z, cfg.smoothing(), opts.n_samples, rng);
  }
  const int d = set.dim();
  const double h = opts.fd_step_ratio * cfg.delta;
  Mat acc = Mat::Zero(d, d);
  for (int s = 0; s < opts.n_samples; ++s) {
    const Vec u = cfg.delta * sample_unit_ball(d, rng);
    for (const Vec& c : {Vec(z + u), Vec(z - u)}) {
      for (int j = 0; j < d; ++j) {
        Vec plus = c;
        Vec minus = c;
        plus[j] += h;
        minus[j] -= h;
        acc.col(j) += project(set, plus) - project(set, minus);
      }
    }
  }
  return acc / (4.0 * h * opts.n_samples);
}

SmoothedHypergradient exact_smoothed_hypergradient_detail(const BilevelProblem& p, const Vec& x,
                                                          const HypergradConfig& cfg,
                                                          double inner_tol,
                                                          const JacobianOracleOptions& opts) {
  validate(cfg);
  if (p.d2 > kDenseLimit) {
    throw std::invalid_argument("exact_smoothed_hypergradient: d2 exceeds the dense limit of 64");
  }
  SmoothedHypergradient out;
  out.y_star = inner_solve(p, x, cfg.eta, inner_tol, 1000000).y_star;
  out.z_star = out.y_star - cfg.eta * p.grad_y_g(x, out.y_star);
  out.jacobian = smoothed_jacobian(p.constraint, out.z_star, cfg, opts);
  out.value = dense_smoothed_hypergradient(p, x, out.y_star, cfg.eta, out.jacobian);
  return out;
}

Vec exact_smoothed_hypergradient(const BilevelProblem& p, const Vec& x, const HypergradConfig& cfg,
                                 double inner_tol, const JacobianOracleOptions& opts) {
  return exact_smoothed_hypergradient_detail(p, x, cfg, inner_tol, opts).value;
}

Vec exact_hypergradient_interior(const QuadraticBilevel& quad, const Vec& x, double margin) {
  require_dim(x, quad.d1(), "exact_hypergradient_interior");
  const Vec y = quad.unconstrained_solution(x);
  if (const auto* b = std::get_if<Box>(&quad.box.kind())) {
    const bool inside = ((y - b->lo).array() > margin).all() && ((b->hi - y).array() > margin).all();
    if (!inside) {
      throw std::domain_error("exact_hypergradient_interior: y*(x) is within the margin of the box");
    }
  }
  const Vec grad_y_f = y - quad.y_target;
  // grad^2_xy g = -B^T, so the implicit correction enters with a plus sign.
  return quad.rho * x + quad.B.transpose() * quad.A.llt().solve(grad_y_f);
}

double contraction_factor(const BilevelProblem& p, const Vec& x, const Vec& y, double eta,
                          int probes, Rng& rng) {
  double worst = 0.0;
  for (int k = 0; k < probes; ++k) {
    const Vec v = sample_unit_sphere(p.d2, rng);
    worst = std::max(worst, (v - eta * p.hvp_yy(x, y, v)).norm());
  }
  return worst;
}

}  // namespace dmlcbo
