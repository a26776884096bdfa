#pragma once

#include "dmlcbo/projections.hpp"
#include "dmlcbo/types.hpp"

namespace dmlcbo {

/// Where the Jacobian estimator draws its random directions from.
///
/// kSphere makes the two-point estimator exactly unbiased for the Jacobian of
/// the ball-smoothed projection. kBall reproduces the literal ball-sampled
/// variant, whose mean is scaled by d2 / (d2 + 2) in the locally linear case.
enum class DirectionSampler { kSphere, kBall };

struct SmoothingParams {
  double delta = 1e-6;
  // Directions per estimate; 0 means "use the set dimension".
  int n_directions = 0;
  DirectionSampler sampler = DirectionSampler::kSphere;

  int directions_for(int dim) const { return n_directions > 0 ? n_directions : dim; }
};

/// Uniform sample from the closed unit l2 ball (Gaussian direction scaled by
/// U^{1/dim}).
Vec sample_unit_ball(int dim, Rng& rng);

/// Uniform sample from the unit l2 sphere.
Vec sample_unit_sphere(int dim, Rng& rng);

/// Monte-Carlo estimate of P_delta(z) = E_{u ~ ball}[P(z + delta u)] using
/// n_samples antithetic pairs (+u, -u).
Vec smoothed_projection(const ConstraintSet& set, const Vec& z, double delta, int n_samples,
                        Rng& rng);

/// Two-point Jacobian estimate
///   H = (d2 / n) sum_i (P(z + delta u_i) - P(z - delta u_i)) / (2 delta) u_i^T,
/// kept in factored form H = D U^T. With n = d2 the prefactor is one.
class JacobianEstimate {
 public:
  JacobianEstimate(Mat differences, Mat directions)
      : differences_(std::move(differences)), directions_(std::move(directions)) {}

  int dim() const { return static_cast<int>(directions_.rows()); }
  int n_directions() const { return static_cast<int>(directions_.cols()); }

  Vec apply(const Vec& v) const { return differences_ * (directions_.transpose() * v); }
  Vec apply_transpose(const Vec& w) const {
    return directions_ * (differences_.transpose() * w);
  }
  Mat dense() const { return differences_ * directions_.transpose(); }

  // Difference columns already carry the (d2 / n) / (2 delta) scaling.
  const Mat& differences() const { return differences_; }
  const Mat& directions() const { return directions_; }

 private:
  Mat differences_;
  Mat directions_;
};

JacobianEstimate estimate_jacobian(const ConstraintSet& set, const Vec& z,
                                   const SmoothingParams& params, Rng& rng);

/// Average of n_samples independent estimates as a dense d2 x d2 matrix.
Mat mc_mean_jacobian(const ConstraintSet& set, const Vec& z, const SmoothingParams& params,
                     int n_samples, Rng& rng);

}  // namespace dmlcbo
