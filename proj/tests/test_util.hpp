// SPDX-License-Identifier: Apache-2.0
//
// Shared helpers for the unit tests.

#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "kan/model.hpp"

namespace kan::testing {

inline Eigen::MatrixXd uniform_matrix(Eigen::Index rows, Eigen::Index cols, double lo, double hi,
                                      std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(lo, hi);
  Eigen::MatrixXd X(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) X(r, c) = u(rng);
  return X;
}

/// Relative error with an absolute floor for values near zero.
inline double rel_err(double a, double b, double floor = 1e-6) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

/// Small random model whose coefficients are large enough that every edge
/// matters (the default init noise is tiny).
inline MultKanModel random_model(const WidthSpec& w, std::uint64_t seed, double scale = 0.5) {
  InitOptions o;
  o.seed = seed;
  o.noise = 1.0;
  MultKanModel m = init_model(w, o);
  std::mt19937_64 rng(seed + 17);
  std::normal_distribution<double> n(0.0, scale);
  for (auto& layer : m.layers)
    for (auto& e : layer.edges) {
      for (double& c : e.spline.coef) c = n(rng);
      e.base_scale = 0.5 + 0.25 * n(rng);
      e.spline_scale = 1.0 + 0.25 * n(rng);
    }
  return m;
}

inline double max_abs_diff(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  return (a - b).cwiseAbs().maxCoeff();
}

}  // namespace kan::testing

namespace kan::testing {

struct GradCheck {
  double worst = 0.0;  // max relative error
  int checked = 0;
};

/// Central differences of `loss(params)` against `analytic` at up to
/// `max_coords` evenly spread coordinates.
template <class Loss>
GradCheck check_gradient(Loss&& loss, std::vector<double> params,
                         const std::vector<double>& analytic, int max_coords = 1 << 30,
                         double h = 1e-4, double floor = 1e-6) {
  GradCheck r;
  const int n = static_cast<int>(params.size());
  const int stride = std::max(1, n / std::max(1, max_coords));
  for (int p = 0; p < n; p += stride) {
    const double keep = params[p];
    params[p] = keep + h;
    const double up = loss(params);
    params[p] = keep - h;
    const double down = loss(params);
    params[p] = keep;
    const double fd = (up - down) / (2.0 * h);
    r.worst = std::max(r.worst, rel_err(analytic[p], fd, floor));
    ++r.checked;
  }
  return r;
}

}  // namespace kan::testing
