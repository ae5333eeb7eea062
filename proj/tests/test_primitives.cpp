// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>
#include <set>

#include "kan/errors.hpp"
#include "kan/primitives.hpp"

using namespace kan;

namespace {

// Points inside every primitive's domain.
constexpr double kSafe[] = {0.13, 0.37, 0.58, 0.81};

double reference(Prim p, double u) {
  switch (p) {
    case Prim::Zero: return 0.0;
    case Prim::X: return u;
    case Prim::X2: return u * u;
    case Prim::X3: return u * u * u;
    case Prim::X4: return u * u * u * u;
    case Prim::Inv: return 1.0 / u;
    case Prim::Inv2: return 1.0 / (u * u);
    case Prim::Sqrt: return std::sqrt(u);
    case Prim::InvSqrt: return 1.0 / std::sqrt(u);
    case Prim::Exp: return std::exp(u);
    case Prim::Log: return std::log(u);
    case Prim::Sin: return std::sin(u);
    case Prim::Cos: return std::cos(u);
    case Prim::Tan: return std::tan(u);
    case Prim::Tanh: return std::tanh(u);
    case Prim::Abs: return std::abs(u);
    case Prim::Asin: return std::asin(u);
    case Prim::Atan: return std::atan(u);
    case Prim::Gaussian: return std::exp(-u * u);
  }
  return 0.0;
}

}  // namespace

TEST_CASE("names are unique and round-trip") {
  std::set<std::string_view> names;
  for (Prim p : all_primitives()) {
    CHECK(names.insert(prim_name(p)).second);
    CHECK(prim_from_name(prim_name(p)) == p);
    CHECK(is_prim_name(prim_name(p)));
  }
  CHECK(prim_from_name("identity") == Prim::X);
  CHECK(prim_from_name("square") == Prim::X2);
  CHECK(prim_from_name("x^{-1/2}") == Prim::InvSqrt);
  CHECK_THROWS_AS(prim_from_name("sinh"), InvalidArgument);
  CHECK_FALSE(is_prim_name("sinh"));
}

TEST_CASE("complexity ranks are ordered from zero to identity upward") {
  CHECK(prim_complexity(Prim::Zero) < prim_complexity(Prim::X));
  for (Prim p : all_primitives())
    if (p != Prim::Zero && p != Prim::X) CHECK(prim_complexity(p) > prim_complexity(Prim::X));
}

TEST_CASE("values and derivatives against libm and finite differences") {
  for (Prim p : all_primitives()) {
    for (double u : kSafe) {
      CAPTURE(prim_name(p));
      CAPTURE(u);
      CHECK(prim_eval(p, u, true) == doctest::Approx(reference(p, u)).epsilon(1e-14));
      const double h = 1e-6;
      const double fd = (reference(p, u + h) - reference(p, u - h)) / (2 * h);
      CHECK(prim_deriv(p, u, true) == doctest::Approx(fd).epsilon(1e-6));
    }
  }
}

TEST_CASE("strict mode rejects arguments outside the domain") {
  CHECK_THROWS_AS(prim_eval(Prim::Inv, 0.0, true), DomainError);
  CHECK_THROWS_AS(prim_eval(Prim::Log, -1.0, true), DomainError);
  CHECK_THROWS_AS(prim_eval(Prim::Sqrt, -0.5, true), DomainError);
  CHECK_THROWS_AS(prim_eval(Prim::Asin, 1.5, true), DomainError);
  CHECK_NOTHROW(prim_eval(Prim::Sqrt, 0.0, true));
}

TEST_CASE("training mode clamps and zeroes the derivative") {
  const double v = prim_eval(Prim::Log, -1.0, false);
  CHECK(std::isfinite(v));
  CHECK(prim_deriv(Prim::Log, -1.0, false) == 0.0);
  CHECK(std::isfinite(prim_eval(Prim::Inv, 0.0, false)));
  CHECK(prim_eval(Prim::Asin, 2.0, false) == doctest::Approx(std::asin(1.0)).epsilon(1e-3));
}

TEST_CASE("singular primitives are flagged") {
  CHECK(prim_is_singular(Prim::Inv));
  CHECK(prim_is_singular(Prim::Log));
  CHECK_FALSE(prim_is_singular(Prim::Sin));
  CHECK_FALSE(prim_is_singular(Prim::X2));
}
