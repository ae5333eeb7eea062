// SPDX-License-Identifier: Apache-2.0

#include "kan/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace kan {

namespace {

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  return std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
}

struct Point {
  double alpha = 0.0;
  double f = 0.0;
  double dphi = 0.0;
  std::vector<double> x, g;
};

// Minimizer of the cubic interpolating (a, fa, da) and (b, fb, db),
// safeguarded into the middle of [a, b].
double cubic_step(const Point& a, const Point& b) {
  const double d1 = a.dphi + b.dphi - 3.0 * (a.f - b.f) / (a.alpha - b.alpha);
  const double disc = d1 * d1 - a.dphi * b.dphi;
  const double lo = std::min(a.alpha, b.alpha);
  const double hi = std::max(a.alpha, b.alpha);
  double t = 0.5 * (lo + hi);
  if (disc >= 0.0) {
    const double d2 = std::copysign(std::sqrt(disc), b.alpha - a.alpha);
    const double cand =
        b.alpha - (b.alpha - a.alpha) * (b.dphi + d2 - d1) / (b.dphi - a.dphi + 2.0 * d2);
    if (std::isfinite(cand)) t = cand;
  }
  const double margin = 0.1 * (hi - lo);
  return std::clamp(t, lo + margin, hi - margin);
}

}  // namespace

void Adam::step(std::vector<double>& x, const std::vector<double>& grad) {
  if (m_.size() != x.size()) {
    m_.assign(x.size(), 0.0);
    v_.assign(x.size(), 0.0);
    t_ = 0;
  }
  ++t_;
  const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t i = 0; i < x.size(); ++i) {
    m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * grad[i];
    v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * grad[i] * grad[i];
    const double mh = m_[i] / bc1;
    const double vh = v_[i] / bc2;
    x[i] -= lr_ * mh / (std::sqrt(vh) + eps_);
  }
}

LineSearchResult strong_wolfe(const Objective& obj, std::vector<double>& x, double f0,
                              std::vector<double>& grad, const std::vector<double>& dir,
                              double step0, double c1, double c2, int max_evals) {
  const double dphi0 = dot(grad, dir);
  LineSearchResult res;
  res.f = f0;
  if (!(dphi0 < 0.0)) return res;

  int evals = 0;
  auto eval = [&](double alpha) {
    Point p;
    p.alpha = alpha;
    p.x = x;
    for (std::size_t i = 0; i < x.size(); ++i) p.x[i] += alpha * dir[i];
    p.g.assign(x.size(), 0.0);
    p.f = obj(p.x, p.g);
    p.dphi = dot(p.g, dir);
    ++evals;
    return p;
  };

  Point start;
  start.alpha = 0.0;
  start.f = f0;
  start.dphi = dphi0;

  Point best = start;
  auto accept = [&](const Point& p) {
    x = p.x;
    grad = p.g;
    res.step = p.alpha;
    res.f = p.f;
    res.ok = true;
    return res;
  };
  auto track = [&](const Point& p) {
    if (std::isfinite(p.f) && p.f < best.f) best = p;
  };

  auto zoom = [&](Point lo, Point hi) {
    while (evals < max_evals) {
      const double a = cubic_step(lo, hi);
      Point p = eval(a);
      track(p);
      if (!std::isfinite(p.f) || p.f > f0 + c1 * a * dphi0 || p.f >= lo.f) {
        hi = std::move(p);
      } else {
        if (std::abs(p.dphi) <= -c2 * dphi0) return true;
        if (p.dphi * (hi.alpha - lo.alpha) >= 0.0) hi = lo;
        lo = std::move(p);
      }
      if (std::abs(hi.alpha - lo.alpha) < 1e-16) break;
    }
    return false;
  };

  Point prev = start;
  double alpha = step0;
  for (int iter = 0; evals < max_evals; ++iter) {
    Point p = eval(alpha);
    track(p);
    if (!std::isfinite(p.f) || p.f > f0 + c1 * alpha * dphi0 || (iter > 0 && p.f >= prev.f)) {
      if (!std::isfinite(p.f)) {
        // Shrink towards the last finite point before zooming.
        alpha = 0.5 * (prev.alpha + alpha);
        if (alpha - prev.alpha < 1e-16) break;
        continue;
      }
      zoom(prev, p);
      break;
    }
    if (std::abs(p.dphi) <= -c2 * dphi0) return accept(p);
    if (p.dphi >= 0.0) {
      zoom(p, prev);
      break;
    }
    prev = std::move(p);
    alpha *= 2.0;
  }
  if (best.alpha > 0.0) return accept(best);
  return res;
}

bool Lbfgs::step(std::vector<double>& x, double& f, std::vector<double>& grad,
                 const Objective& obj) {
  const std::size_t n = x.size();
  std::vector<double> q = grad;
  const std::size_t m = s_.size();
  std::vector<double> alpha(m), rho(m);
  for (std::size_t k = m; k-- > 0;) {
    rho[k] = 1.0 / dot(y_[k], s_[k]);
    alpha[k] = rho[k] * dot(s_[k], q);
    for (std::size_t i = 0; i < n; ++i) q[i] -= alpha[k] * y_[k][i];
  }
  double gamma = 1.0;
  if (m > 0) gamma = dot(s_.back(), y_.back()) / dot(y_.back(), y_.back());
  for (double& v : q) v *= gamma;
  for (std::size_t k = 0; k < m; ++k) {
    const double beta = rho[k] * dot(y_[k], q);
    for (std::size_t i = 0; i < n; ++i) q[i] += s_[k][i] * (alpha[k] - beta);
  }
  std::vector<double> dir(n);
  for (std::size_t i = 0; i < n; ++i) dir[i] = -q[i];

  double step0 = 1.0;
  if (m == 0) {
    const double gn = std::sqrt(dot(grad, grad));
    step0 = gn > 0.0 ? std::min(1.0, initial_step_ / gn) : 1.0;
  }
  if (dot(dir, grad) >= 0.0) {
    // Lost descent: restart from steepest descent.
    reset();
    for (std::size_t i = 0; i < n; ++i) dir[i] = -grad[i];
    const double gn = std::sqrt(dot(grad, grad));
    if (gn == 0.0) return false;
    step0 = std::min(1.0, initial_step_ / gn);
  }

  const std::vector<double> x_old = x;
  const std::vector<double> g_old = grad;
  const LineSearchResult ls = strong_wolfe(obj, x, f, grad, dir, step0);
  if (!ls.ok) {
    reset();
    return false;
  }
  f = ls.f;
  std::vector<double> s(n), y(n);
  for (std::size_t i = 0; i < n; ++i) {
    s[i] = x[i] - x_old[i];
    y[i] = grad[i] - g_old[i];
  }
  if (dot(s, y) > 1e-12 * std::sqrt(dot(s, s) * dot(y, y))) {
    s_.push_back(std::move(s));
    y_.push_back(std::move(y));
    if (static_cast<int>(s_.size()) > history_) {
      s_.pop_front();
      y_.pop_front();
    }
  }
  return true;
}

}  // namespace kan
