#include "dmlcbo/smoothing.hpp"

#include <cmath>

namespace dmlcbo {

Vec sample_unit_sphere(int dim, Rng& rng) {
  if (dim < 1) throw std::invalid_argument("sample_unit_sphere: dim must be >= 1");
  std::normal_distribution<double> normal;
  Vec g(dim);
  double n2 = 0.0;
  do {
    for (int i = 0; i < dim; ++i) g[i] = normal(rng);
    n2 = g.squaredNorm();
  } while (n2 == 0.0);
  return g / std::sqrt(n2);
}

Vec sample_unit_ball(int dim, Rng& rng) {
  Vec s = sample_unit_sphere(dim, rng);
  std::uniform_real_distribution<double> unif;
  return s * std::pow(unif(rng), 1.0 / dim);
}

Vec smoothed_projection(const ConstraintSet& set, const Vec& z, double delta, int n_samples,
                        Rng& rng) {
  if (n_samples < 1) throw std::invalid_argument("smoothed_projection: n_samples must be >= 1");
  if (!(delta > 0.0)) throw std::invalid_argument("smoothed_projection: delta must be positive");
  require_dim(z, set.dim(), "smoothed_projection");
  Vec acc = Vec::Zero(z.size());
  for (int j = 0; j < n_samples; ++j) {
    const Vec u = delta * sample_unit_ball(set.dim(), rng);
    acc += project(set, z + u);
    acc += project(set, z - u);
  }
  return acc / (2.0 * n_samples);
}

JacobianEstimate estimate_jacobian(const ConstraintSet& set, const Vec& z,
                                   const SmoothingParams& params, Rng& rng) {
  if (!(params.delta > 0.0)) throw std::invalid_argument("estimate_jacobian: delta must be positive");
  require_dim(z, set.dim(), "estimate_jacobian");
  const int d = set.dim();
  const int n = params.directions_for(d);
  const double scale = (static_cast<double>(d) / n) / (2.0 * params.delta);
  Mat diffs(d, n);
  Mat dirs(d, n);
  for (int i = 0; i < n; ++i) {
    const Vec u = params.sampler == DirectionSampler::kSphere ? sample_unit_sphere(d, rng)
                                                              : sample_unit_ball(d, rng);
    dirs.col(i) = u;
    diffs.col(i) = scale * (project(set, z + params.delta * u) - project(set, z - params.delta * u));
  }
  return JacobianEstimate(std::move(diffs), std::move(dirs));
}

Mat mc_mean_jacobian(const ConstraintSet& set, const Vec& z, const SmoothingParams& params,
                     int n_samples, Rng& rng) {
  if (n_samples < 1) throw std::invalid_argument("mc_mean_jacobian: n_samples must be >= 1");
  Mat acc = Mat::Zero(set.dim(), set.dim());
  for (int s = 0; s < n_samples; ++s) {
    const JacobianEstimate h = estimate_jacobian(set, z, params, rng);
    acc.noalias() += h.differences() * h.directions().transpose();
  }
  return acc / n_samples;
}

}  // namespace dmlcbo
