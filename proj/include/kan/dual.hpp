// SPDX-License-Identifier: Apache-2.0
//
// First-order forward-mode dual numbers. The network kernels are templated on
// the scalar type; running the reverse pass on Dual values yields directional
// derivatives of parameter gradients (forward-over-reverse).

#pragma once

#include <cmath>

namespace kan {

struct Dual {
  double v = 0.0;  // value
  double t = 0.0;  // tangent

  constexpr Dual() = default;
  constexpr Dual(double value) : v(value) {}  // NOLINT: implicit lift
  constexpr Dual(double value, double tangent) : v(value), t(tangent) {}

  Dual& operator+=(const Dual& o) {
    v += o.v;
    t += o.t;
    return *this;
  }
  Dual& operator-=(const Dual& o) {
    v -= o.v;
    t -= o.t;
    return *this;
  }
  Dual& operator*=(const Dual& o) {
    t = t * o.v + v * o.t;
    v *= o.v;
    return *this;
  }
};

inline Dual operator+(Dual a, const Dual& b) { return a += b; }
inline Dual operator-(Dual a, const Dual& b) { return a -= b; }
inline Dual operator*(Dual a, const Dual& b) { return a *= b; }
inline Dual operator/(const Dual& a, const Dual& b) {
  return {a.v / b.v, (a.t * b.v - a.v * b.t) / (b.v * b.v)};
}
inline Dual operator-(const Dual& a) { return {-a.v, -a.t}; }

inline bool operator<(const Dual& a, const Dual& b) { return a.v < b.v; }
inline bool operator>(const Dual& a, const Dual& b) { return a.v > b.v; }
inline bool operator<=(const Dual& a, const Dual& b) { return a.v <= b.v; }
inline bool operator>=(const Dual& a, const Dual& b) { return a.v >= b.v; }

inline Dual sin(const Dual& a) { return {std::sin(a.v), std::cos(a.v) * a.t}; }
inline Dual cos(const Dual& a) { return {std::cos(a.v), -std::sin(a.v) * a.t}; }
inline Dual tan(const Dual& a) {
  const double c = std::cos(a.v);
  return {std::tan(a.v), a.t / (c * c)};
}
inline Dual exp(const Dual& a) {
  const double e = std::exp(a.v);
  return {e, e * a.t};
}
inline Dual log(const Dual& a) { return {std::log(a.v), a.t / a.v}; }
inline Dual sqrt(const Dual& a) {
  const double s = std::sqrt(a.v);
  return {s, a.t / (2.0 * s)};
}
inline Dual tanh(const Dual& a) {
  const double th = std::tanh(a.v);
  return {th, (1.0 - th * th) * a.t};
}
inline Dual asin(const Dual& a) {
  return {std::asin(a.v), a.t / std::sqrt(1.0 - a.v * a.v)};
}
inline Dual atan(const Dual& a) {
  return {std::atan(a.v), a.t / (1.0 + a.v * a.v)};
}
inline Dual abs(const Dual& a) { return a.v < 0.0 ? -a : a; }

inline double value_of(double x) { return x; }
inline double value_of(const Dual& x) { return x.v; }

/// Builds g(x) from g(x.v) and g'(x.v) by the chain rule.
inline double lift(double g, double /*dg*/, double /*x*/) { return g; }
inline Dual lift(double g, double dg, const Dual& x) { return {g, dg * x.t}; }

/// Drops the tangent (used where a quantity is treated as locally constant).
inline double constant_like(double /*ref*/, double value) { return value; }
inline Dual constant_like(const Dual& /*ref*/, double value) { return {value}; }

}  // namespace kan
