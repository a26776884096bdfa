#include "dmlcbo/problem.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>

namespace dmlcbo {

namespace {

constexpr double kFdRelTol = 1e-6;
constexpr double kSymmetryRelTol = 1e-10;

Vec gaussian(Rng& rng, int n) {
  std::normal_distribution<double> normal;
  Vec v(n);
  for (int i = 0; i < n; ++i) v[i] = normal(rng);
  return v;
}

Vec unit(Rng& rng, int n) {
  Vec v = gaussian(rng, n);
  return v / v.norm();
}

void check_output(const Vec& v, int expected, const char* oracle) {
  if (v.size() != expected) {
    throw std::invalid_argument(std::string("oracle ") + oracle + " returned dimension " +
                                std::to_string(v.size()) + ", expected " +
                                std::to_string(expected));
  }
}

// Relative disagreement between a finite-difference estimate and the analytic
// value. The denominator is floored at a multiple of the rounding error of the
// difference quotient so that exact zeros do not report spurious violations.
double relative_gap(double fd, double analytic, double rounding_floor) {
  const double denom = std::max({std::abs(fd), std::abs(analytic), rounding_floor / kFdRelTol});
  return denom > 0.0 ? std::abs(fd - analytic) / denom : 0.0;
}

double relative_gap(const Vec& fd, const Vec& analytic, double rounding_floor) {
  const double denom = std::max({fd.norm(), analytic.norm(), rounding_floor / kFdRelTol});
  return denom > 0.0 ? (fd - analytic).norm() / denom : 0.0;
}

double rounding_floor(double fplus, double fminus, double h) {
  constexpr double eps = std::numeric_limits<double>::epsilon();
  return 100.0 * eps * (1.0 + std::abs(fplus) + std::abs(fminus)) / h;
}

double rounding_floor(const Vec& fplus, const Vec& fminus, double h) {
  return rounding_floor(fplus.lpNorm<Eigen::Infinity>(), fminus.lpNorm<Eigen::Infinity>(), h) *
         std::sqrt(static_cast<double>(fplus.size()));
}

bool same_bits(const Vec& a, const Vec& b) {
  return a.size() == b.size() &&
         std::equal(a.data(), a.data() + a.size(), b.data(),
                    [](double u, double v) { return std::memcmp(&u, &v, sizeof(double)) == 0; });
}

bool same_bits(double a, double b) { return std::memcmp(&a, &b, sizeof(double)) == 0; }

}  // namespace

const ValidationCheck* ValidationReport::find(const std::string& name) const {
  for (const auto& c : checks) {
    if (c.name == name) return &c;
  }
  return nullptr;
}

ValidationReport validate_problem(const BilevelProblem& p, int probes, std::uint64_t seed) {
  if (probes < 1) throw std::invalid_argument("validate_problem: probes must be >= 1");
  if (p.d1 < 1 || p.d2 < 1) throw std::invalid_argument("validate_problem: dimensions must be positive");
  if (p.constraint.dim() != p.d2) {
    throw std::invalid_argument("validate_problem: constraint dimension differs from d2");
  }

  ValidationCheck purity{"purity"};
  ValidationCheck fd_gx{"grad_x_f finite-difference"};
  ValidationCheck fd_gyf{"grad_y_f finite-difference"};
  ValidationCheck fd_gyg{"grad_y_g finite-difference"};
  ValidationCheck fd_hvp{"hvp_yy finite-difference"};
  ValidationCheck fd_cross{"cross_jvp finite-difference"};
  ValidationCheck symmetry{"hvp_yy symmetry"};
  ValidationCheck convexity{"strong convexity"};

  const double mu = p.constants.mu_g.value_or(0.0);
  Rng rng(seed);

  for (int k = 0; k < probes; ++k) {
    const Vec x = gaussian(rng, p.d1);
    const Vec y = project(p.constraint, gaussian(rng, p.d2));
    const Vec v = unit(rng, p.d2);
    const Vec w = unit(rng, p.d2);
    const Vec dx = unit(rng, p.d1);
    const double hx = 1e-5 * (1.0 + x.norm());
    const double hy = 1e-5 * (1.0 + y.norm());

    const Vec gx = p.grad_x_f(x, y);
    const Vec gyf = p.grad_y_f(x, y);
    const Vec gyg = p.grad_y_g(x, y);
    const Vec hv = p.hvp_yy(x, y, v);
    const Vec hw = p.hvp_yy(x, y, w);
    const Vec cv = p.cross_jvp(x, y, v);
    check_output(gx, p.d1, "grad_x_f");
    check_output(gyf, p.d2, "grad_y_f");
    check_output(gyg, p.d2, "grad_y_g");
    check_output(hv, p.d2, "hvp_yy");
    check_output(cv, p.d1, "cross_jvp");

    const bool pure = same_bits(p.upper_value(x, y), p.upper_value(x, y)) &&
                      same_bits(p.lower_value(x, y), p.lower_value(x, y)) &&
                      same_bits(gx, p.grad_x_f(x, y)) && same_bits(gyf, p.grad_y_f(x, y)) &&
                      same_bits(gyg, p.grad_y_g(x, y)) && same_bits(hv, p.hvp_yy(x, y, v)) &&
                      same_bits(cv, p.cross_jvp(x, y, v));
    if (!pure) purity.worst_violation = 1.0;

    {
      const double fp = p.upper_value(x + hx * dx, y);
      const double fm = p.upper_value(x - hx * dx, y);
      const double gap = relative_gap((fp - fm) / (2 * hx), gx.dot(dx), rounding_floor(fp, fm, hx));
      fd_gx.worst_violation = std::max(fd_gx.worst_violation, gap);
    }
    {
      const double fp = p.upper_value(x, y + hy * v);
      const double fm = p.upper_value(x, y - hy * v);
      const double gap = relative_gap((fp - fm) / (2 * hy), gyf.dot(v), rounding_floor(fp, fm, hy));
      fd_gyf.worst_violation = std::max(fd_gyf.worst_violation, gap);
    }
    {
      const double gp = p.lower_value(x, y + hy * v);
      const double gm = p.lower_value(x, y - hy * v);
      const double gap = relative_gap((gp - gm) / (2 * hy), gyg.dot(v), rounding_floor(gp, gm, hy));
      fd_gyg.worst_violation = std::max(fd_gyg.worst_violation, gap);
    }
    {
      const Vec gp = p.grad_y_g(x, y + hy * v);
      const Vec gm = p.grad_y_g(x, y - hy * v);
      const double gap = relative_gap(Vec((gp - gm) / (2 * hy)), hv, rounding_floor(gp, gm, hy));
      fd_hvp.worst_violation = std::max(fd_hvp.worst_violation, gap);
    }
    {
      const Vec gp = p.grad_y_g(x + hx * dx, y);
      const Vec gm = p.grad_y_g(x - hx * dx, y);
      const double fd = (gp - gm).dot(v) / (2 * hx);
      const double gap = relative_gap(fd, cv.dot(dx), rounding_floor(gp, gm, hx));
      fd_cross.worst_violation = std::max(fd_cross.worst_violation, gap);
    }
    {
      const double a = hv.dot(w);
      const double b = hw.dot(v);
      const double denom = std::max({std::abs(a), std::abs(b), std::numeric_limits<double>::min()});
      symmetry.worst_violation = std::max(symmetry.worst_violation, std::abs(a - b) / denom);
    }
    convexity.worst_violation = std::max(convexity.worst_violation, mu - hv.dot(v));
  }

  purity.passed = purity.worst_violation == 0.0;
  for (auto* c : {&fd_gx, &fd_gyf, &fd_gyg, &fd_hvp, &fd_cross}) {
    c->passed = c->worst_violation <= kFdRelTol;
  }
  symmetry.passed = symmetry.worst_violation <= kSymmetryRelTol;
  convexity.passed = convexity.worst_violation <= 1e-12 * (1.0 + mu);
  convexity.worst_violation = std::max(convexity.worst_violation, 0.0);

  ValidationReport report;
  report.checks = {purity, fd_gx, fd_gyf, fd_gyg, fd_hvp, fd_cross, symmetry, convexity};
  report.passed = std::all_of(report.checks.begin(), report.checks.end(),
                              [](const ValidationCheck& c) { return c.passed; });
  return report;
}

}  // namespace dmlcbo
