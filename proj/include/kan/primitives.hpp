// SPDX-License-Identifier: Apache-2.0
//
// Library of scalar primitives used by symbolic edges, the formula compiler
// and the symbolic fitter. Evaluation is templated so the same code runs on
// doubles and on dual numbers.

#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <string_view>
#include <vector>

#include "kan/dual.hpp"
#include "kan/errors.hpp"

namespace kan {

enum class Prim {
  Zero,
  X,
  X2,
  X3,
  X4,
  Inv,
  Inv2,
  Sqrt,
  InvSqrt,
  Exp,
  Log,
  Sin,
  Cos,
  Tan,
  Tanh,
  Abs,
  Asin,
  Atan,
  Gaussian,
};

/// Every primitive in a fixed order (used for iteration and ranking).
const std::vector<Prim>& all_primitives();

std::string_view prim_name(Prim p);
int prim_complexity(Prim p);
/// Accepts canonical names plus a few aliases ("identity", "square", ...).
Prim prim_from_name(std::string_view name);
bool is_prim_name(std::string_view name);

/// True when the primitive has a pole or a half-line domain.
bool prim_is_singular(Prim p);

// Arguments this close to a pole or domain edge are clamped in training mode.
constexpr double kDomainEps = 1e-6;

namespace detail {

inline bool near_zero(double u) { return std::abs(u) < kDomainEps; }

[[noreturn]] inline void domain_fail(Prim p, double u) {
  throw DomainError(std::string(prim_name(p)) + " undefined at " +
                    std::to_string(u));
}

/// Moves u into the primitive's domain. Returns false if nothing changed.
inline bool guard(Prim p, double u, bool strict, double& out) {
  out = u;
  switch (p) {
    case Prim::Inv:
    case Prim::Inv2:
      if (near_zero(u)) {
        if (strict && u == 0.0) domain_fail(p, u);
        if (strict) return false;
        out = u < 0.0 ? -kDomainEps : kDomainEps;
        return true;
      }
      return false;
    case Prim::Sqrt:
      if (u < 0.0) {
        if (strict) domain_fail(p, u);
        out = 0.0;
        return true;
      }
      return false;
    case Prim::InvSqrt:
    case Prim::Log:
      if (u < kDomainEps) {
        if (strict && u <= 0.0) domain_fail(p, u);
        if (strict) return false;
        out = kDomainEps;
        return true;
      }
      return false;
    case Prim::Asin:
      if (u < -1.0 || u > 1.0) {
        if (strict) domain_fail(p, u);
        out = std::clamp(u, -1.0, 1.0);
        return true;
      }
      return false;
    default:
      return false;
  }
}

template <class T>
T raw_eval(Prim p, const T& u) {
  using std::abs, std::asin, std::atan, std::cos, std::exp, std::log,
      std::sin, std::sqrt, std::tan, std::tanh;
  switch (p) {
    case Prim::Zero: return T(0.0) * u;
    case Prim::X: return u;
    case Prim::X2: return u * u;
    case Prim::X3: return u * u * u;
    case Prim::X4: {
      const T s = u * u;
      return s * s;
    }
    case Prim::Inv: return T(1.0) / u;
    case Prim::Inv2: return T(1.0) / (u * u);
    case Prim::Sqrt: return sqrt(u);
    case Prim::InvSqrt: return T(1.0) / sqrt(u);
    case Prim::Exp: return exp(u);
    case Prim::Log: return log(u);
    case Prim::Sin: return sin(u);
    case Prim::Cos: return cos(u);
    case Prim::Tan: return tan(u);
    case Prim::Tanh: return tanh(u);
    case Prim::Abs: return abs(u);
    case Prim::Asin: return asin(u);
    case Prim::Atan: return atan(u);
    case Prim::Gaussian: return exp(-(u * u));
  }
  return u;
}

template <class T>
T raw_deriv(Prim p, const T& u) {
  using std::cos, std::exp, std::sin, std::sqrt, std::tanh;
  switch (p) {
    case Prim::Zero: return T(0.0) * u;
    case Prim::X: return T(1.0) + T(0.0) * u;
    case Prim::X2: return T(2.0) * u;
    case Prim::X3: return T(3.0) * u * u;
    case Prim::X4: return T(4.0) * u * u * u;
    case Prim::Inv: return T(-1.0) / (u * u);
    case Prim::Inv2: return T(-2.0) / (u * u * u);
    case Prim::Sqrt: return T(0.5) / sqrt(u);
    case Prim::InvSqrt: return T(-0.5) / (u * sqrt(u));
    case Prim::Exp: return exp(u);
    case Prim::Log: return T(1.0) / u;
    case Prim::Sin: return cos(u);
    case Prim::Cos: return -sin(u);
    case Prim::Tan: {
      const T c = cos(u);
      return T(1.0) / (c * c);
    }
    case Prim::Tanh: {
      const T th = tanh(u);
      return T(1.0) - th * th;
    }
    case Prim::Abs: return T(value_of(u) < 0.0 ? -1.0 : 1.0) + T(0.0) * u;
    case Prim::Asin: return T(1.0) / sqrt(T(1.0) - u * u);
    case Prim::Atan: return T(1.0) / (T(1.0) + u * u);
    case Prim::Gaussian: return T(-2.0) * u * exp(-(u * u));
  }
  return u;
}

}  // namespace detail

/// f(u). Outside the domain: DomainError if strict, otherwise the argument
/// is clamped and treated as a constant.
template <class T>
T prim_eval(Prim p, const T& u, bool strict) {
  double clamped;
  if (detail::guard(p, value_of(u), strict, clamped)) {
    // Sqrt at exactly 0 is fine; everything else evaluates at the clamp.
    return constant_like(u, detail::raw_eval(p, clamped));
  }
  return detail::raw_eval(p, u);
}

/// f'(u), zero where the argument was clamped.
template <class T>
T prim_deriv(Prim p, const T& u, bool strict) {
  double clamped;
  if (detail::guard(p, value_of(u), strict, clamped)) return constant_like(u, 0.0);
  if (p == Prim::Sqrt && value_of(u) == 0.0) return constant_like(u, 0.0);
  return detail::raw_deriv(p, u);
}

}  // namespace kan
