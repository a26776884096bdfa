#pragma once

#include <string>
#include <variant>

#include "dmlcbo/types.hpp"

namespace dmlcbo {

struct Box {
  Vec lo;
  Vec hi;
};

struct L2Ball {
  Vec center;
  double radius;
};

// Centered at the origin.
struct L1Ball {
  double radius;
};

// {y >= 0, sum(y) = total}
struct Simplex {
  double total;
};

// {y : <a, y> <= b}
struct HalfSpace {
  Vec a;
  double b;
};

struct Unconstrained {};

/// Closed convex feasible set for the lower-level variable. Constructed
/// through the static factories, which validate the parameters.
class ConstraintSet {
 public:
  using Kind = std::variant<Box, L2Ball, L1Ball, Simplex, HalfSpace, Unconstrained>;

  static ConstraintSet box(Vec lo, Vec hi);
  static ConstraintSet box(int dim, double lo, double hi);
  static ConstraintSet l2_ball(Vec center, double radius);
  static ConstraintSet l1_ball(int dim, double radius);
  static ConstraintSet simplex(int dim, double total);
  static ConstraintSet half_space(Vec a, double b);
  static ConstraintSet unconstrained(int dim);

  int dim() const { return dim_; }
  const Kind& kind() const { return kind_; }
  std::string kind_name() const;

  // Per-component Lipschitz constant of the projection. Euclidean
  // projections are non-expansive, so this is 1 for every kind.
  double lipschitz() const { return 1.0; }

  /// Membership test with absolute slack `tol`.
  bool contains(const Vec& y, double tol = 1e-10) const;

 private:
  ConstraintSet(Kind kind, int dim) : kind_(std::move(kind)), dim_(dim) {}

  Kind kind_;
  int dim_;
};

/// Euclidean projection argmin_{y in set} 0.5 |y - z|^2.
/// Throws std::invalid_argument on dimension mismatch or non-finite z.
Vec project(const ConstraintSet& set, const Vec& z);

/// Largest observed <z - p, w - p> over feasible probe points w. Non-positive
/// (up to rounding) exactly when p is the projection of z. Probes include the
/// set's extreme points where they are finite in number and cheap to list.
double check_variational_inequality(const ConstraintSet& set, const Vec& z, const Vec& p,
                                    int probes, std::uint64_t seed);

}  // namespace dmlcbo
