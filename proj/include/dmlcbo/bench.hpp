#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "dmlcbo/problem.hpp"

namespace dmlcbo {

// ---------------------------------------------------------------------------
// Synthetic quadratic family
// ---------------------------------------------------------------------------

/// g(x, y) = 0.5 y^T A y - (B x)^T y,   f(x, y) = 0.5 |y - y_target|^2 + 0.5 rho |x|^2,
/// with y restricted to a box. All derivatives are analytic and the declared
/// constants are exact.
struct QuadraticBilevel {
  Mat A;  // d2 x d2, SPD
  Mat B;  // d2 x d1
  Vec y_target;
  double rho = 0.5;
  ConstraintSet box = ConstraintSet::unconstrained(1);
  double mu_g = 1.0;
  double L_g = 1.0;

  int d1() const { return static_cast<int>(B.cols()); }
  int d2() const { return static_cast<int>(B.rows()); }

  BilevelProblem problem() const;

  /// Unconstrained lower-level solution A^{-1} B x.
  Vec unconstrained_solution(const Vec& x) const;
};

struct QuadraticOptions {
  double target_scale = 1.0;
  double rho = 0.5;
  // When positive, B has singular values spaced geometrically in
  // [coupling_scale / coupling_condition, coupling_scale]; otherwise B is a
  // rescaled Gaussian matrix.
  double coupling_condition = 0.0;
};

/// A = R diag(spectrum) R^T for a random orthogonal R with spectrum in
/// [mu_g, L_g] (both endpoints attained when d2 >= 2); B is Gaussian rescaled
/// to spectral norm `coupling_scale`; the box is [-halfwidth, halfwidth]^d2
/// (halfwidth may be infinite).
QuadraticBilevel make_quadratic(int d1, int d2, double mu_g, double L_g, double coupling_scale,
                                double box_halfwidth, std::uint64_t seed,
                                const QuadraticOptions& opts = {});

// ---------------------------------------------------------------------------
// Datasets
// ---------------------------------------------------------------------------

struct Dataset {
  Mat features;  // n x dim, one sample per row
  Vec labels;    // entries in {-1, +1}
  std::string name;

  int size() const { return static_cast<int>(labels.size()); }
  int dim() const { return static_cast<int>(features.cols()); }
};

class ParseError : public std::runtime_error {
 public:
  ParseError(int line, int column, std::string token, const std::string& what);
  int line() const noexcept { return line_; }
  int column() const noexcept { return column_; }
  const std::string& token() const noexcept { return token_; }

 private:
  int line_;
  int column_;
  std::string token_;
};

struct LibsvmOptions {
  // Feature matrices are widened to at least this many columns so that train
  // and validation files agree on the dimension.
  int min_dim = 0;
  // When set, samples whose raw label equals this value map to +1 and all
  // others to -1 (e.g. 6 for an "MNIST 6 vs 9" file). Otherwise raw > 0 maps
  // to +1 and raw <= 0 to -1.
  std::optional<double> positive_label;
};

/// Reads "label idx:val idx:val ..." lines with 1-based indices into a dense
/// dataset. Blank lines are skipped; anything after '#' is a comment.
Dataset load_libsvm(const std::filesystem::path& path, const LibsvmOptions& opts = {});

/// Writes nonzero features with round-trip precision.
void write_libsvm(const Dataset& ds, const std::filesystem::path& path);

/// Negates floor(fraction * n) uniformly chosen labels. Returns the mask of
/// flipped samples.
std::pair<Dataset, std::vector<bool>> flip_labels(const Dataset& ds, double fraction,
                                                  std::uint64_t seed);

struct SyntheticBinaryOptions {
  int n = 200;
  int dim = 20;
  int informative = 4;      // leading coordinates carrying the class signal
  double separation = 0.4;  // class-mean offset per informative coordinate, in noise units
  double feature_scale = 0.02;
  std::uint64_t seed = 0;
};

/// Two Gaussian classes with means +-mu, mu supported on the informative
/// coordinates, balanced labels, isotropic noise; every value multiplied by
/// feature_scale.
Dataset make_synthetic_binary(const SyntheticBinaryOptions& opts);

// ---------------------------------------------------------------------------
// Data hyper-cleaning
// ---------------------------------------------------------------------------

/// Upper level: f(x, y) = sum_val loss(b y^T a).
/// Lower level: g(x, y) = sum_train sigmoid(x_i) loss(b y^T a) + c |y|^2 over the
/// l1 ball of radius r. The loss is logistic. d1 = |train|, d2 = feature dim.
struct HypercleanProblem {
  Dataset train;
  Dataset val;
  double c_reg = 1e-2;
  double radius = 1.0;

  int d1() const { return train.size(); }
  int d2() const { return train.dim(); }

  BilevelProblem problem() const;
};

HypercleanProblem make_hyperclean(Dataset train, Dataset val, double c_reg = 1e-2,
                                  double radius = 1.0);

/// Fraction of samples with sign(y^T a) equal to the label (0 counts as -1).
double accuracy(const Dataset& ds, const Vec& y);

double sigmoid(double t);

}  // namespace dmlcbo
