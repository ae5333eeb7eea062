// SPDX-License-Identifier: Apache-2.0

#include "kan/spline.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <string>

#include "kan/errors.hpp"

namespace kan {

Grid::Grid(std::vector<double> knots, int num_intervals, int order)
    : knots_(std::move(knots)), num_intervals_(num_intervals), order_(order) {
  if (num_intervals_ < 1) throw InvalidArgument("grid needs at least one interval");
  if (order_ < 0 || order_ > kMaxOrder)
    throw InvalidArgument("spline order must be in [0, " +
                          std::to_string(kMaxOrder) + "]");
  if (static_cast<int>(knots_.size()) != num_intervals_ + 1 + 2 * order_)
    throw InvalidArgument("knot vector has wrong length");
  for (std::size_t i = 1; i < knots_.size(); ++i) {
    if (!(knots_[i] > knots_[i - 1]))
      throw InvalidArgument("knots must be strictly increasing");
  }
}

Grid Grid::uniform(double lo, double hi, int num_intervals, int order) {
  if (!(hi > lo)) throw InvalidArgument("grid range must satisfy lo < hi");
  if (num_intervals < 1) throw InvalidArgument("grid needs at least one interval");
  const double h = (hi - lo) / num_intervals;
  std::vector<double> knots(num_intervals + 1 + 2 * order);
  for (int m = -order; m <= num_intervals + order; ++m) {
    knots[m + order] = lo + m * h;
  }
  // Pin the endpoints so the domain is exactly [lo, hi].
  knots[order] = lo;
  knots[order + num_intervals] = hi;
  return Grid(std::move(knots), num_intervals, order);
}

Grid Grid::from_samples(std::span<const double> samples, int num_intervals,
                        int order, KnotPlacement placement,
                        double uniform_share) {
  if (samples.empty()) throw InvalidArgument("empty sample set");
  std::vector<double> sorted(samples.begin(), samples.end());
  std::sort(sorted.begin(), sorted.end());
  const double lo = sorted.front();
  const double hi = sorted.back();
  if (!(hi > lo)) throw InvalidArgument("degenerate sample range");
  if (placement == KnotPlacement::Uniform)
    return uniform(lo, hi, num_intervals, order);

  const double h = (hi - lo) / num_intervals;
  const auto n = sorted.size();
  std::vector<double> knots(num_intervals + 1 + 2 * order);
  for (int m = 0; m <= num_intervals; ++m) {
    const auto idx = static_cast<std::size_t>(
        std::floor(static_cast<double>(m) * static_cast<double>(n - 1) /
                   num_intervals));
    const double q = sorted[std::min(idx, n - 1)];
    const double u = lo + m * h;
    knots[m + order] = uniform_share * u + (1.0 - uniform_share) * q;
  }
  knots[order] = lo;
  knots[order + num_intervals] = hi;
  for (int m = 1; m <= order; ++m) {
    knots[order - m] = lo - m * h;
    knots[order + num_intervals + m] = hi + m * h;
  }
  return Grid(std::move(knots), num_intervals, order);
}

namespace {

double safe_ratio(double num, double den) { return den > 0.0 ? num / den : 0.0; }

}  // namespace

void local_basis(const Grid& grid, double x, LocalBasis& out) {
  const auto& t = grid.knots();
  const int k = grid.order();
  const int nk = static_cast<int>(t.size());
  const int nb = grid.num_basis();

  int mu;
  if (x >= grid.lo() && x <= grid.hi()) {
    // Inside the domain only core intervals are used, so x == hi belongs to
    // the last interval.
    mu = static_cast<int>(std::upper_bound(t.begin(), t.end(), x) - t.begin()) - 1;
    mu = std::clamp(mu, k, k + grid.num_intervals() - 1);
  } else {
    mu = static_cast<int>(std::upper_bound(t.begin(), t.end(), x) - t.begin()) - 1;
    mu = std::clamp(mu, 0, nk - 2);
  }

  // table[p][r] holds N_{i,p}(x) with i = mu - k + r.
  double table[kMaxOrder + 1][kMaxOrder + 2] = {};
  auto valid = [&](int i, int p) { return i >= 0 && i + p + 1 <= nk - 1; };
  if (valid(mu, 0)) table[0][k] = 1.0;
  for (int p = 1; p <= k; ++p) {
    for (int r = k - p; r <= k; ++r) {
      const int i = mu - k + r;
      if (!valid(i, p)) {
        table[p][r] = 0.0;
        continue;
      }
      const double left = safe_ratio(x - t[i], t[i + p] - t[i]) * table[p - 1][r];
      const double right =
          safe_ratio(t[i + p + 1] - x, t[i + p + 1] - t[i + 1]) * table[p - 1][r + 1];
      table[p][r] = left + right;
    }
  }

  // Derivative of N_{i,p} expressed through degree p-1 values `lower`.
  auto deriv = [&](int i, int p, const double* lower, int r) {
    if (p == 0 || !valid(i, p)) return 0.0;
    const double a = safe_ratio(lower[r], t[i + p] - t[i]);
    const double b = safe_ratio(lower[r + 1], t[i + p + 1] - t[i + 1]);
    return p * (a - b);
  };

  // First derivatives at degree k-1, needed for the second derivative at k.
  double d1_lower[kMaxOrder + 2] = {};
  if (k >= 1) {
    for (int r = 0; r <= k; ++r) {
      const int i = mu - k + r;
      d1_lower[r] = deriv(i, k - 1, table[k >= 2 ? k - 2 : 0], r);
      if (k - 1 == 0) d1_lower[r] = 0.0;
    }
  }

  out.first = mu - k;
  out.count = k + 1;
  for (int r = 0; r <= k; ++r) {
    const int i = mu - k + r;
    if (i < 0 || i >= nb) {
      out.value[r] = out.d1[r] = out.d2[r] = 0.0;
      continue;
    }
    out.value[r] = table[k][r];
    out.d1[r] = k >= 1 ? deriv(i, k, table[k - 1], r) : 0.0;
    out.d2[r] = k >= 2 ? deriv(i, k, d1_lower, r) : 0.0;
  }
}

double resolve_argument(const Grid& grid, double x, OutOfDomain policy) {
  if (std::isnan(x)) throw DomainError("spline argument is NaN");
  if (policy == OutOfDomain::Clamp) return std::clamp(x, grid.lo(), grid.hi());
  if (x < grid.knots().front() || x > grid.knots().back())
    throw DomainError("spline argument " + std::to_string(x) +
                      " outside extended knot span [" +
                      std::to_string(grid.knots().front()) + ", " +
                      std::to_string(grid.knots().back()) + "]");
  return x;
}

std::vector<double> basis_eval(double x, const Grid& grid, OutOfDomain policy) {
  const double arg = resolve_argument(grid, x, policy);
  LocalBasis lb;
  local_basis(grid, arg, lb);
  std::vector<double> out(grid.num_basis(), 0.0);
  for (int r = 0; r < lb.count; ++r) {
    const int i = lb.first + r;
    if (i >= 0 && i < grid.num_basis()) out[i] = lb.value[r];
  }
  return out;
}

SplineCurve::SplineCurve(Grid g, std::vector<double> c)
    : grid(std::move(g)), coef(std::move(c)) {
  if (static_cast<int>(coef.size()) != grid.num_basis())
    throw InvalidArgument("coefficient count must equal G + k");
}

SplineCurve::SplineCurve(Grid g) : grid(std::move(g)) {
  coef.assign(grid.num_basis(), 0.0);
}

double curve_eval(const SplineCurve& curve, double x, int deriv_order,
                  OutOfDomain policy) {
  if (deriv_order < 0 || deriv_order > 2)
    throw InvalidArgument("deriv_order must be 0, 1 or 2");
  const double arg = resolve_argument(curve.grid, x, policy);
  if (deriv_order > 0 && arg != x) return 0.0;
  LocalBasis lb;
  local_basis(curve.grid, arg, lb);
  const double* row = deriv_order == 0 ? lb.value : deriv_order == 1 ? lb.d1 : lb.d2;
  double sum = 0.0;
  for (int r = 0; r < lb.count; ++r) {
    const int i = lb.first + r;
    if (i >= 0 && i < curve.grid.num_basis()) sum += curve.coef[i] * row[r];
  }
  return sum;
}

SplineCurve fit_least_squares(std::span<const double> xs,
                              std::span<const double> ys, const Grid& grid,
                              double ridge) {
  if (xs.size() != ys.size()) throw InvalidArgument("xs and ys differ in length");
  const int nb = grid.num_basis();
  if (static_cast<int>(xs.size()) < nb)
    throw UnderdeterminedError("least-squares fit needs at least " +
                               std::to_string(nb) + " samples, got " +
                               std::to_string(xs.size()));
  Eigen::MatrixXd normal = Eigen::MatrixXd::Zero(nb, nb);
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(nb);
  LocalBasis lb;
  for (std::size_t s = 0; s < xs.size(); ++s) {
    const double arg = resolve_argument(grid, xs[s], OutOfDomain::Strict);
    local_basis(grid, arg, lb);
    for (int r = 0; r < lb.count; ++r) {
      const int i = lb.first + r;
      if (i < 0 || i >= nb) continue;
      rhs(i) += lb.value[r] * ys[s];
      for (int q = 0; q < lb.count; ++q) {
        const int j = lb.first + q;
        if (j < 0 || j >= nb) continue;
        normal(i, j) += lb.value[r] * lb.value[q];
      }
    }
  }
  normal.diagonal().array() += ridge;
  const Eigen::VectorXd c = normal.ldlt().solve(rhs);
  return SplineCurve(grid, std::vector<double>(c.data(), c.data() + nb));
}

SplineCurve refine_grid(const SplineCurve& curve, int new_intervals,
                        std::span<const double> sample_xs,
                        KnotPlacement placement, double uniform_share) {
  if (sample_xs.empty()) throw InvalidArgument("refine_grid: empty sample set");
  if (new_intervals < 1) throw InvalidArgument("refine_grid: new_G must be >= 1");
  std::vector<double> ys(sample_xs.size());
  for (std::size_t s = 0; s < sample_xs.size(); ++s)
    ys[s] = curve_eval(curve, sample_xs[s], 0, OutOfDomain::Clamp);
  const Grid grid = Grid::from_samples(sample_xs, new_intervals,
                                       curve.grid.order(), placement,
                                       uniform_share);
  return fit_least_squares(sample_xs, ys, grid);
}

}  // namespace kan
