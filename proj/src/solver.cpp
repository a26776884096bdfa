#include "dmlcbo/solver.hpp"

#include <chrono>
#include <cmath>
#include <sstream>

namespace dmlcbo {

namespace {

constexpr double kFeasibilityTol = 1e-9;

Vec clamp_diag(const Vec& m, double G0, double c_l, double c_u) {
  Vec out(m.size());
  for (Eigen::Index i = 0; i < m.size(); ++i) out[i] = clamp_scale(m[i], G0, c_l, c_u);
  return out;
}

void check(const Vec& v, const char* stage) {
  if (!v.allFinite()) {
    throw NumericalError(stage, std::string("non-finite value in ") + stage);
  }
}

}  // namespace

HypergradConfig SolverConfig::hypergrad() const {
  HypergradConfig h;
  h.eta = eta;
  h.Q = Q;
  h.delta = delta;
  h.sampler = sampler;
  h.n_directions = n_directions;
  return h;
}

std::vector<std::string> solver_config_errors(const SolverConfig& cfg) {
  std::vector<std::string> errs;
  auto positive = [&](double v, const char* name) {
    if (!(v > 0.0) || !std::isfinite(v)) errs.push_back(std::string(name) + " must be positive and finite");
  };
  positive(cfg.eta, "eta");
  positive(cfg.delta, "delta");
  positive(cfg.c1, "c1");
  positive(cfg.c2, "c2");
  positive(cfg.t, "t");
  positive(cfg.c_l, "c_l");
  positive(cfg.c_u, "c_u");
  if (!(cfg.tau >= 0.0)) errs.push_back("tau must be non-negative");
  if (!(cfg.gamma >= 0.0)) errs.push_back("gamma must be non-negative");
  if (cfg.Q < 1) errs.push_back("Q must be >= 1");
  if (cfg.K < 1) errs.push_back("K must be >= 1");
  if (!(cfg.G0 >= 0.0)) errs.push_back("G0 must be non-negative");
  if (!(cfg.ema_decay > 0.0 && cfg.ema_decay < 1.0)) errs.push_back("ema_decay must lie in (0, 1)");
  if (!(cfg.ema_gain > 0.0)) errs.push_back("ema_gain must be positive");
  if (cfg.c_l > cfg.c_u) {
    std::ostringstream s;
    s << "c_l = " << cfg.c_l << " exceeds c_u = " << cfg.c_u;
    errs.push_back(s.str());
  }
  if (!(cfg.m_shift >= 0.0)) errs.push_back("m_shift must be non-negative");
  if (errs.empty()) {
    // eta_k is decreasing, so k = 1 is the binding case.
    const double e1 = cfg.eta_k(1);
    std::ostringstream s;
    if (e1 > 1.0) {
      s << "eta_1 = " << e1 << " > 1 (t must be <= sqrt(m_shift + 1))";
      errs.push_back(s.str());
      s.str("");
    }
    if (cfg.c1 * e1 > 1.0) {
      s << "alpha_1 = c1 * eta_1 = " << cfg.c1 * e1 << " > 1";
      errs.push_back(s.str());
      s.str("");
    }
    if (cfg.c2 * e1 > 1.0) {
      s << "beta_1 = c2 * eta_1 = " << cfg.c2 * e1 << " > 1";
      errs.push_back(s.str());
    }
  }
  return errs;
}

double clamp_scale(double mval, double G0, double c_l, double c_u) {
  return std::min(std::max(std::sqrt(mval) + G0, 1.0 / c_u), 1.0 / c_l);
}

SolverState init_state(const BilevelProblem& p, const Vec& x1, const Vec& y1,
                       const SolverConfig& cfg, Rng& rng, std::vector<std::string>* warnings) {
  require_dim(x1, p.d1, "init_state(x1)");
  require_dim(y1, p.d2, "init_state(y1)");
  SolverState s;
  s.x = x1;
  s.y = y1;
  if (!p.constraint.contains(y1)) {
    s.y = project(p.constraint, y1);
    if (warnings) warnings->push_back("y1 infeasible; replaced by its projection onto Y");
  }
  s.v = p.grad_y_g(s.x, s.y);
  check(s.v, "initialization (v_1)");
  s.w = stochastic_hypergradient(p, s.x, s.y, cfg.hypergrad(), rng).value;
  s.m1 = s.v.squaredNorm();
  s.m2 = s.w.squaredNorm();
  if (cfg.per_coordinate) {
    s.m1_diag = s.v.cwiseAbs2();
    s.m2_diag = s.w.cwiseAbs2();
  }
  s.k = 1;
  return s;
}

SolverState step(const BilevelProblem& p, const SolverState& state, const SolverConfig& cfg,
                 Rng& rng, TraceRecord* record) {
  const double eta_k = cfg.eta_k(state.k);
  const double alpha = cfg.c1 * eta_k;
  const double beta = cfg.c2 * eta_k;
  SolverState next = state;

  // x update.
  if (cfg.per_coordinate) {
    next.x = state.x - (eta_k * cfg.gamma) *
                           state.w.cwiseQuotient(clamp_diag(state.m2_diag, cfg.G0, cfg.c_l, cfg.c_u));
  } else {
    next.x = state.x - (eta_k * cfg.gamma / clamp_scale(state.m2, cfg.G0, cfg.c_l, cfg.c_u)) * state.w;
  }
  check(next.x, "x update");

  // y update.
  Vec inner;
  if (cfg.per_coordinate) {
    inner = state.y - cfg.tau * state.v.cwiseQuotient(clamp_diag(state.m1_diag, cfg.G0, cfg.c_l, cfg.c_u));
  } else {
    inner = state.y - (cfg.tau / clamp_scale(state.m1, cfg.G0, cfg.c_l, cfg.c_u)) * state.v;
  }
  check(inner, "y update");
  const Vec y_tilde = project(p.constraint, inner);
  next.y = (1.0 - eta_k) * state.y + eta_k * y_tilde;
  check(next.y, "y update");
  if (!p.constraint.contains(next.y, kFeasibilityTol)) {
    throw std::logic_error("y update: y left the feasible set");
  }

  // Fresh hypergradient sample and w update.
  Vec h;
  try {
    h = stochastic_hypergradient(p, next.x, next.y, cfg.hypergrad(), rng).value;
  } catch (const NumericalError& e) {
    throw NumericalError("hypergradient",
                         std::string("hypergradient: ") + e.what());
  }
  next.w = (1.0 - alpha) * state.w + alpha * h;
  check(next.w, "w update");

  // v update.
  const Vec gy = p.grad_y_g(next.x, next.y);
  next.v = (1.0 - beta) * state.v + beta * gy;
  check(next.v, "v update");

  // Second moments track the fresh estimates, each from its own previous value.
  next.m1 = cfg.ema_decay * state.m1 + cfg.ema_gain * gy.squaredNorm();
  next.m2 = cfg.ema_decay * state.m2 + cfg.ema_gain * h.squaredNorm();
  if (cfg.per_coordinate) {
    next.m1_diag = cfg.ema_decay * state.m1_diag + cfg.ema_gain * gy.cwiseAbs2();
    next.m2_diag = cfg.ema_decay * state.m2_diag + cfg.ema_gain * h.cwiseAbs2();
  }
  if (!std::isfinite(next.m1) || !std::isfinite(next.m2)) {
    throw NumericalError("second-moment update", "non-finite value in the second-moment update");
  }
  next.k = state.k + 1;

  if (record) {
    record->k = state.k;
    record->eta_k = eta_k;
    record->w_norm = next.w.norm();
    record->v_norm = next.v.norm();
    record->x_step = (next.x - state.x).norm();
    record->y_tilde_step = (y_tilde - state.y).norm();
    record->f = p.upper_value(next.x, next.y);
    record->g = p.lower_value(next.x, next.y);
  }
  return next;
}

RunTrace run(const BilevelProblem& p, const Vec& x1, const Vec& y1, const SolverConfig& cfg,
             const TraceSink& sink, bool keep_records) {
  const auto errs = solver_config_errors(cfg);
  if (!errs.empty()) {
    std::string msg = "invalid solver configuration:";
    for (const auto& e : errs) msg += "\n  " + e;
    throw std::invalid_argument(msg);
  }
  const auto start = std::chrono::steady_clock::now();
  Rng hyper = make_stream(cfg.seed, "hypergrad");
  Rng out_rng = make_stream(cfg.seed, "output-sampling");

  RunTrace trace;
  trace.output_index = std::uniform_int_distribution<int>(1, cfg.K)(out_rng);
  SolverState state = init_state(p, x1, y1, cfg, hyper, &trace.warnings);
  if (keep_records) trace.records.reserve(cfg.K);

  for (int i = 1; i <= cfg.K; ++i) {
    // The output is x_r, the iterate entering step r.
    if (i == trace.output_index) {
      trace.output_iterate = state.x;
      trace.output_y = state.y;
    }
    TraceRecord rec;
    state = step(p, state, cfg, hyper, &rec);
    rec.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (sink) sink(rec);
    if (keep_records) trace.records.push_back(rec);
  }
  trace.last_iterate = state.x;
  trace.final_state = std::move(state);
  return trace;
}

}  // namespace dmlcbo
