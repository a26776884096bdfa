#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "dmlcbo/hypergradient.hpp"
#include "dmlcbo/problem.hpp"

namespace dmlcbo {

struct SolverConfig {
  double eta = 0.5;
  double delta = 1e-6;
  int Q = 3;
  double tau = 0.1;
  double gamma = 1.0;
  double c1 = 10.0;
  double c2 = 10.0;
  double t = 1.0;
  double m_shift = 100.0;
  double c_l = 0.1;
  double c_u = 10.0;
  double G0 = 1e-6;
  double ema_decay = 0.99;
  double ema_gain = 0.01;
  int K = 1000;
  std::uint64_t seed = 0;
  // Per-coordinate second moments instead of the scalar EMA. Off by default.
  bool per_coordinate = false;
  DirectionSampler sampler = DirectionSampler::kSphere;
  int n_directions = 0;

  HypergradConfig hypergrad() const;
  double eta_k(int k) const { return t / std::sqrt(m_shift + k); }
};

/// Structural violations of the configuration (empty when valid).
std::vector<std::string> solver_config_errors(const SolverConfig& cfg);

struct SolverState {
  Vec x;
  Vec y;
  Vec v;
  Vec w;
  double m1 = 0.0;
  double m2 = 0.0;
  Vec m1_diag;  // only used with per_coordinate
  Vec m2_diag;
  int k = 1;
};

struct TraceRecord {
  int k = 0;
  double eta_k = 0.0;
  double w_norm = 0.0;       // |w_{k+1}|
  double v_norm = 0.0;       // |v_{k+1}|
  double x_step = 0.0;       // |x_{k+1} - x_k|
  double y_tilde_step = 0.0; // |y~_{k+1} - y_k|
  double f = 0.0;            // f(x_{k+1}, y_{k+1})
  double g = 0.0;            // g(x_{k+1}, y_{k+1})
  double wall_time = 0.0;    // seconds since the start of the run
};

struct RunTrace {
  std::vector<TraceRecord> records;
  Vec output_iterate;
  int output_index = 0;
  Vec output_y;
  Vec last_iterate;
  SolverState final_state;
  std::vector<std::string> warnings;
};

using TraceSink = std::function<void(const TraceRecord&)>;

SolverState init_state(const BilevelProblem& p, const Vec& x1, const Vec& y1,
                       const SolverConfig& cfg, Rng& rng,
                       std::vector<std::string>* warnings = nullptr);

double clamp_scale(double mval, double G0, double c_l, double c_u);

/// One iteration: x, y, w, v and second-moment updates. Throws
/// NumericalError whose stage names the offending update.
SolverState step(const BilevelProblem& p, const SolverState& state, const SolverConfig& cfg,
                 Rng& rng, TraceRecord* record = nullptr);

/// K steps from (x1, y1). Randomness: hypergradient samples use the
/// "hypergrad" substream of cfg.seed, the output index the "output-sampling"
/// substream.
RunTrace run(const BilevelProblem& p, const Vec& x1, const Vec& y1, const SolverConfig& cfg,
             const TraceSink& sink = {}, bool keep_records = true);

}  // namespace dmlcbo
