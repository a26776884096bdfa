#include "dmlcbo/projections.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <vector>

namespace dmlcbo {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

constexpr double kSimplexSnap = 1e-14;

Vec project_l1(const Vec& z, double radius) {
  if (z.lpNorm<1>() <= radius) return z;
  std::vector<double> mags(z.size());
  for (Eigen::Index i = 0; i < z.size(); ++i) mags[i] = std::abs(z[i]);
  std::stable_sort(mags.begin(), mags.end(), std::greater<>());
  double cumsum = 0.0;
  double theta = 0.0;
  for (std::size_t j = 0; j < mags.size(); ++j) {
    cumsum += mags[j];
    const double candidate = (cumsum - radius) / static_cast<double>(j + 1);
    if (mags[j] > candidate) theta = candidate;
  }
  Vec y(z.size());
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    const double m = std::max(std::abs(z[i]) - theta, 0.0);
    y[i] = std::copysign(m, z[i]);
    if (m == 0.0) y[i] = 0.0;
  }
  return y;
}

Vec project_simplex(const Vec& z, double total) {
  std::vector<double> u(z.data(), z.data() + z.size());
  std::sort(u.begin(), u.end(), std::greater<>());
  double cumsum = 0.0;
  double theta = 0.0;
  for (std::size_t j = 0; j < u.size(); ++j) {
    cumsum += u[j];
    const double candidate = (cumsum - total) / static_cast<double>(j + 1);
    if (u[j] - candidate > 0.0) theta = candidate;
  }
  Vec y = (z.array() - theta).max(0.0).matrix();
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    if (y[i] < kSimplexSnap) y[i] = 0.0;
  }
  return y;
}

}  // namespace

ConstraintSet ConstraintSet::box(Vec lo, Vec hi) {
  if (lo.size() != hi.size() || lo.size() == 0) {
    throw std::invalid_argument("Box: lo and hi must have the same positive dimension");
  }
  for (Eigen::Index i = 0; i < lo.size(); ++i) {
    if (std::isnan(lo[i]) || std::isnan(hi[i]) || lo[i] > hi[i]) {
      throw std::invalid_argument("Box: require lo <= hi componentwise");
    }
  }
  const int dim = static_cast<int>(lo.size());
  return ConstraintSet(Box{std::move(lo), std::move(hi)}, dim);
}

ConstraintSet ConstraintSet::box(int dim, double lo, double hi) {
  if (dim <= 0) throw std::invalid_argument("Box: dimension must be positive");
  return box(Vec::Constant(dim, lo), Vec::Constant(dim, hi));
}

ConstraintSet ConstraintSet::l2_ball(Vec center, double radius) {
  if (center.size() == 0) throw std::invalid_argument("L2Ball: dimension must be positive");
  if (!(radius > 0.0) || !std::isfinite(radius) || !center.allFinite()) {
    throw std::invalid_argument("L2Ball: radius must be positive and finite");
  }
  const int dim = static_cast<int>(center.size());
  return ConstraintSet(L2Ball{std::move(center), radius}, dim);
}

ConstraintSet ConstraintSet::l1_ball(int dim, double radius) {
  if (dim <= 0) throw std::invalid_argument("L1Ball: dimension must be positive");
  if (!(radius > 0.0) || !std::isfinite(radius)) {
    throw std::invalid_argument("L1Ball: radius must be positive and finite");
  }
  return ConstraintSet(L1Ball{radius}, dim);
}

ConstraintSet ConstraintSet::simplex(int dim, double total) {
  if (dim <= 0) throw std::invalid_argument("Simplex: dimension must be positive");
  if (!(total > 0.0) || !std::isfinite(total)) {
    throw std::invalid_argument("Simplex: total must be positive and finite");
  }
  return ConstraintSet(Simplex{total}, dim);
}

ConstraintSet ConstraintSet::half_space(Vec a, double b) {
  if (a.size() == 0) throw std::invalid_argument("HalfSpace: dimension must be positive");
  if (!(a.norm() > 0.0) || !a.allFinite() || !std::isfinite(b)) {
    throw std::invalid_argument("HalfSpace: normal must be nonzero and finite");
  }
  const int dim = static_cast<int>(a.size());
  return ConstraintSet(HalfSpace{std::move(a), b}, dim);
}

ConstraintSet ConstraintSet::unconstrained(int dim) {
  if (dim <= 0) throw std::invalid_argument("Unconstrained: dimension must be positive");
  return ConstraintSet(Unconstrained{}, dim);
}

std::string ConstraintSet::kind_name() const {
  return std::visit(Overloaded{
                        [](const Box&) { return std::string("box"); },
                        [](const L2Ball&) { return std::string("l2_ball"); },
                        [](const L1Ball&) { return std::string("l1_ball"); },
                        [](const Simplex&) { return std::string("simplex"); },
                        [](const HalfSpace&) { return std::string("half_space"); },
                        [](const Unconstrained&) { return std::string("unconstrained"); },
                    },
                    kind_);
}

bool ConstraintSet::contains(const Vec& y, double tol) const {
  if (y.size() != dim_ || !y.allFinite()) return false;
  return std::visit(
      Overloaded{
          [&](const Box& b) {
            return ((y - b.lo).array() >= -tol).all() && ((b.hi - y).array() >= -tol).all();
          },
          [&](const L2Ball& b) { return (y - b.center).norm() <= b.radius + tol; },
          [&](const L1Ball& b) { return y.lpNorm<1>() <= b.radius + tol; },
          [&](const Simplex& s) {
            return (y.array() >= -tol).all() && std::abs(y.sum() - s.total) <= tol;
          },
          [&](const HalfSpace& h) { return h.a.dot(y) <= h.b + tol * h.a.norm(); },
          [&](const Unconstrained&) { return true; },
      },
      kind_);
}

Vec project(const ConstraintSet& set, const Vec& z) {
  require_dim(z, set.dim(), "project");
  if (!z.allFinite()) throw std::invalid_argument("project: non-finite input");
  return std::visit(Overloaded{
                        [&](const Box& b) -> Vec { return z.cwiseMax(b.lo).cwiseMin(b.hi); },
                        [&](const L2Ball& b) -> Vec {
                          const Vec d = z - b.center;
                          const double n = d.norm();
                          if (n <= b.radius) return z;
                          return b.center + d * (b.radius / n);
                        },
                        [&](const L1Ball& b) -> Vec { return project_l1(z, b.radius); },
                        [&](const Simplex& s) -> Vec { return project_simplex(z, s.total); },
                        [&](const HalfSpace& h) -> Vec {
                          const double excess = h.a.dot(z) - h.b;
                          if (excess <= 0.0) return z;
                          return z - (excess / h.a.squaredNorm()) * h.a;
                        },
                        [&](const Unconstrained&) -> Vec { return z; },
                    },
                    set.kind());
}

double check_variational_inequality(const ConstraintSet& set, const Vec& z, const Vec& p,
                                    int probes, std::uint64_t seed) {
  require_dim(z, set.dim(), "check_variational_inequality(z)");
  require_dim(p, set.dim(), "check_variational_inequality(p)");
  if (probes < 1) throw std::invalid_argument("check_variational_inequality: probes must be >= 1");
  if (!z.allFinite() || !p.allFinite()) {
    throw std::invalid_argument("check_variational_inequality: non-finite input");
  }

  const int n = set.dim();
  Rng rng(seed);
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> unif;
  auto gaussian = [&] {
    Vec g(n);
    for (int i = 0; i < n; ++i) g[i] = normal(rng);
    return g;
  };
  auto dirichlet = [&] {
    Vec w(n);
    for (int i = 0; i < n; ++i) w[i] = -std::log(1.0 - unif(rng));
    return Vec(w / w.sum());
  };
  const double scale = 1.0 + z.norm() + p.norm();

  const Vec residual = z - p;
  double worst = -std::numeric_limits<double>::infinity();
  auto probe = [&](const Vec& w) { worst = std::max(worst, residual.dot(w - p)); };

  std::visit(Overloaded{
                 [&](const Box& b) {
                   for (int k = 0; k < probes; ++k) {
                     Vec w(n);
                     for (int i = 0; i < n; ++i) {
                       const bool finite = std::isfinite(b.lo[i]) && std::isfinite(b.hi[i]);
                       if (finite) {
                         // Alternate between corners and interior points.
                         w[i] = (k % 2 == 0) ? (unif(rng) < 0.5 ? b.lo[i] : b.hi[i])
                                             : b.lo[i] + unif(rng) * (b.hi[i] - b.lo[i]);
                       } else {
                         w[i] = std::clamp(p[i] + scale * normal(rng), b.lo[i], b.hi[i]);
                       }
                     }
                     probe(w);
                   }
                 },
                 [&](const L2Ball& b) {
                   for (int k = 0; k < probes; ++k) {
                     Vec g = gaussian();
                     const double r = (k % 2 == 0) ? 1.0 : std::pow(unif(rng), 1.0 / n);
                     probe(b.center + b.radius * r * g / g.norm());
                   }
                 },
                 [&](const L1Ball& b) {
                   for (int i = 0; i < n; ++i) {
                     for (double s : {-1.0, 1.0}) {
                       Vec w = Vec::Zero(n);
                       w[i] = s * b.radius;
                       probe(w);
                     }
                   }
                   for (int k = 0; k < probes; ++k) {
                     Vec w = dirichlet();
                     for (int i = 0; i < n; ++i) w[i] *= (unif(rng) < 0.5 ? -1.0 : 1.0);
                     probe(b.radius * ((k % 2 == 0) ? 1.0 : unif(rng)) * w);
                   }
                 },
                 [&](const Simplex& s) {
                   for (int i = 0; i < n; ++i) probe(s.total * Vec::Unit(n, i));
                   for (int k = 0; k < probes; ++k) probe(s.total * dirichlet());
                 },
                 [&](const HalfSpace& h) {
                   for (int k = 0; k < probes; ++k) {
                     Vec w = p + scale * gaussian();
                     const double excess = h.a.dot(w) - h.b;
                     if (excess > 0.0) w -= (2.0 * excess / h.a.squaredNorm()) * h.a;
                     probe(w);
                   }
                 },
                 [&](const Unconstrained&) {
                   for (int k = 0; k < probes; ++k) probe(p + scale * gaussian());
                 },
             },
             set.kind());
  return worst;
}

}  // namespace dmlcbo
