// SPDX-License-Identifier: Apache-2.0
//
// B-spline bases on extended knot vectors, curve evaluation with analytic
// derivatives, least-squares fitting and grid refinement.

#pragma once

#include <span>
#include <vector>

namespace kan {

/// What to do with an argument outside the spline domain.
enum class OutOfDomain {
  Clamp,   // clamp into [lo, hi]; used by training-time forward passes
  Strict,  // throw DomainError outside the extended knot span
};

enum class KnotPlacement {
  Uniform,
  Quantile,  // sample quantiles mixed with a small uniform share
};

/// Knot vector with `order` extra knots on each side of [lo, hi].
class Grid {
 public:
  Grid() = default;
  /// `knots` must hold num_intervals + 1 + 2*order strictly increasing values.
  Grid(std::vector<double> knots, int num_intervals, int order);

  static Grid uniform(double lo, double hi, int num_intervals, int order = 3);
  /// Domain from the sample range; knots placed per `placement`.
  /// `uniform_share` is the weight of the uniform knots in quantile mode.
  static Grid from_samples(std::span<const double> samples, int num_intervals,
                           int order = 3,
                           KnotPlacement placement = KnotPlacement::Uniform,
                           double uniform_share = 0.02);

  const std::vector<double>& knots() const { return knots_; }
  int num_intervals() const { return num_intervals_; }
  int order() const { return order_; }
  int num_basis() const { return num_intervals_ + order_; }
  double lo() const { return knots_[order_]; }
  double hi() const { return knots_[order_ + num_intervals_]; }

  bool operator==(const Grid&) const = default;

 private:
  std::vector<double> knots_;
  int num_intervals_ = 0;
  int order_ = 0;
};

/// The k+1 possibly-nonzero basis functions at one point, plus their first
/// and second derivatives. Entry r belongs to basis index `first + r`;
/// indices outside [0, num_basis) carry zeros.
struct LocalBasis {
  int first = 0;
  int count = 0;
  double value[8] = {};
  double d1[8] = {};
  double d2[8] = {};
};

constexpr int kMaxOrder = 7;

/// Evaluates the local basis at x, which must already lie in the extended
/// span (see resolve_argument).
void local_basis(const Grid& grid, double x, LocalBasis& out);

/// Applies the out-of-domain policy; returns the argument to evaluate at.
double resolve_argument(const Grid& grid, double x, OutOfDomain policy);

/// All G+k basis values at x.
std::vector<double> basis_eval(double x, const Grid& grid,
                               OutOfDomain policy = OutOfDomain::Strict);

struct SplineCurve {
  Grid grid;
  std::vector<double> coef;

  SplineCurve() = default;
  SplineCurve(Grid g, std::vector<double> c);
  /// Identically zero curve on the grid.
  explicit SplineCurve(Grid g);

  bool operator==(const SplineCurve&) const = default;
};

/// Value (deriv_order 0) or analytic first/second derivative of the curve.
/// Clamped arguments have zero derivative.
double curve_eval(const SplineCurve& curve, double x, int deriv_order = 0,
                  OutOfDomain policy = OutOfDomain::Strict);

/// Least-squares coefficients on `grid` (normal equations with a ridge).
SplineCurve fit_least_squares(std::span<const double> xs,
                              std::span<const double> ys, const Grid& grid,
                              double ridge = 1e-8);

/// Refits the curve on a new grid of `new_intervals` built from the sample
/// range, matching the old curve's values at the samples.
SplineCurve refine_grid(const SplineCurve& curve, int new_intervals,
                        std::span<const double> sample_xs,
                        KnotPlacement placement = KnotPlacement::Uniform,
                        double uniform_share = 0.02);

}  // namespace kan
