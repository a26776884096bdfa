#include "dmlcbo/reference.hpp"

#include <cmath>
#include <limits>
#include <sstream>

namespace dmlcbo {

namespace {

constexpr int kEnumerationLimit = 6;
constexpr double kFeasTol = 1e-12;

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

Vec enumerate_l1(const Vec& z, double r) {
  const int n = static_cast<int>(z.size());
  if (z.lpNorm<1>() <= r) return z;
  Vec best = Vec::Zero(n);
  double best_obj = 0.5 * z.squaredNorm();
  int patterns = 1;
  for (int i = 0; i < n; ++i) patterns *= 3;
  std::vector<int> sign(n);
  for (int code = 0; code < patterns; ++code) {
    int c = code;
    int support = 0;
    double signed_sum = 0.0;
    for (int i = 0; i < n; ++i) {
      sign[i] = c % 3 - 1;
      c /= 3;
      if (sign[i] != 0) {
        ++support;
        signed_sum += sign[i] * z[i];
      }
    }
    if (support == 0) continue;
    // On the face {sum_i s_i y_i = r, y_i = 0 off support}: y = z - lambda s.
    const double lambda = (signed_sum - r) / support;
    Vec y = Vec::Zero(n);
    bool feasible = true;
    for (int i = 0; i < n && feasible; ++i) {
      if (sign[i] == 0) continue;
      y[i] = z[i] - lambda * sign[i];
      feasible = sign[i] * y[i] >= -kFeasTol;
    }
    if (!feasible) continue;
    const double obj = 0.5 * (y - z).squaredNorm();
    if (obj < best_obj) {
      best_obj = obj;
      best = y;
    }
  }
  return best;
}

Vec enumerate_simplex(const Vec& z, double total) {
  const int n = static_cast<int>(z.size());
  Vec best;
  double best_obj = std::numeric_limits<double>::infinity();
  for (int mask = 1; mask < (1 << n); ++mask) {
    int support = 0;
    double sum = 0.0;
    for (int i = 0; i < n; ++i) {
      if (mask & (1 << i)) {
        ++support;
        sum += z[i];
      }
    }
    const double theta = (sum - total) / support;
    Vec y = Vec::Zero(n);
    bool feasible = true;
    for (int i = 0; i < n && feasible; ++i) {
      if (!(mask & (1 << i))) continue;
      y[i] = z[i] - theta;
      feasible = y[i] >= -kFeasTol;
    }
    if (!feasible) continue;
    y = y.cwiseMax(0.0);
    const double obj = 0.5 * (y - z).squaredNorm();
    if (obj < best_obj) {
      best_obj = obj;
      best = y;
    }
  }
  return best;
}

}  // namespace

InnerSolveReport inner_solve(const BilevelProblem& p, const Vec& x, double eta, double tol,
                             int max_iter, const std::optional<Vec>& y0) {
  if (!(tol > 0.0)) throw std::invalid_argument("inner_solve: tol must be positive");
  if (!(eta > 0.0)) throw std::invalid_argument("inner_solve: eta must be positive");
  require_dim(x, p.d1, "inner_solve(x)");
  InnerSolveReport report;
  Vec y = y0 ? project(p.constraint, *y0) : project(p.constraint, Vec::Zero(p.d2));
  for (int it = 0;; ++it) {
    const Vec next = project(p.constraint, y - eta * p.grad_y_g(x, y));
    const double res = (y - next).norm();
    report.residual_history.push_back(res);
    if (!std::isfinite(res)) throw NumericalError("inner_solve", "inner_solve: residual diverged");
    if (res <= tol) {
      report.y_star = std::move(y);
      report.iterations = it;
      report.final_fp_residual = res;
      return report;
    }
    if (it >= max_iter) {
      std::ostringstream s;
      s << "inner_solve: no convergence after " << max_iter << " iterations (residual " << res
        << ", tol " << tol << ")";
      throw InnerSolveError(res, s.str());
    }
    y = next;
  }
}

Vec brute_force_projection(const ConstraintSet& set, const Vec& z) {
  require_dim(z, set.dim(), "brute_force_projection");
  return std::visit(
      Overloaded{
          [&](const Box& b) -> Vec {
            Vec y = z;
            for (Eigen::Index i = 0; i < y.size(); ++i) {
              if (y[i] < b.lo[i]) y[i] = b.lo[i];
              if (y[i] > b.hi[i]) y[i] = b.hi[i];
            }
            return y;
          },
          [&](const L2Ball& b) -> Vec {
            const double n = (z - b.center).norm();
            return n <= b.radius ? z : Vec(b.center + (b.radius / n) * (z - b.center));
          },
          [&](const L1Ball& b) -> Vec {
            if (set.dim() > kEnumerationLimit) {
              throw std::invalid_argument("brute_force_projection: dim > 6 for l1 ball");
            }
            return enumerate_l1(z, b.radius);
          },
          [&](const Simplex& s) -> Vec {
            if (set.dim() > kEnumerationLimit) {
              throw std::invalid_argument("brute_force_projection: dim > 6 for simplex");
            }
            return enumerate_simplex(z, s.total);
          },
          [&](const HalfSpace& h) -> Vec {
            const double t = std::max(0.0, (h.a.dot(z) - h.b) / h.a.squaredNorm());
            return z - t * h.a;
          },
          [&](const Unconstrained&) -> Vec { return z; },
      },
      set.kind());
}

Vec finite_diff_hypergradient(const BilevelProblem& p, const Vec& x, const HypergradConfig& cfg,
                              double h, double inner_tol) {
  if (!(h > 0.0)) throw std::invalid_argument("finite_diff_hypergradient: h must be positive");
  require_dim(x, p.d1, "finite_diff_hypergradient");
  const Vec center = inner_solve(p, x, cfg.eta, inner_tol, 1000000).y_star;
  auto F = [&](const Vec& xs) {
    const Vec y = inner_solve(p, xs, cfg.eta, inner_tol, 1000000, center).y_star;
    return p.upper_value(xs, y);
  };
  Vec g(p.d1);
  for (int j = 0; j < p.d1; ++j) {
    Vec xp = x;
    Vec xm = x;
    xp[j] += h;
    xm[j] -= h;
    g[j] = (F(xp) - F(xm)) / (2.0 * h);
  }
  return g;
}

double stationarity_measure(const BilevelProblem& p, const Vec& x, const HypergradConfig& cfg,
                            int n_seeds, double inner_tol, std::uint64_t seed,
                            const JacobianOracleOptions& opts) {
  if (n_seeds < 1) throw std::invalid_argument("stationarity_measure: n_seeds must be >= 1");
  const Vec y_star = inner_solve(p, x, cfg.eta, inner_tol, 1000000).y_star;
  const Vec z_star = y_star - cfg.eta * p.grad_y_g(x, y_star);
  Vec mean = Vec::Zero(p.d1);
  for (int s = 0; s < n_seeds; ++s) {
    JacobianOracleOptions o = opts;
    o.seed = derive_seed(seed, "stationarity/" + std::to_string(s));
    const Mat jac = smoothed_jacobian(p.constraint, z_star, cfg, o);
    if (p.d2 <= 64) {
      mean += dense_smoothed_hypergradient(p, x, y_star, cfg.eta, jac);
    } else {
      HypergradConfig deep = cfg;
      deep.Q = 200;
      mean += deterministic_hypergradient(p, x, y_star, deep, jac);
    }
  }
  return (mean / n_seeds).norm();
}

}  // namespace dmlcbo
