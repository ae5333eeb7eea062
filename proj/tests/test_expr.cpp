// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>
#include <map>
#include <numbers>
#include <random>

#include "formula_corpus.hpp"
#include "kan/errors.hpp"
#include "kan/expr.hpp"

using namespace kan;
using namespace kan::testing;

namespace {

std::vector<double> draw(const CorpusFormula& f, std::mt19937_64& rng) {
  std::vector<double> x;
  for (auto [lo, hi] : f.box) x.push_back(std::uniform_real_distribution<double>(lo, hi)(rng));
  return x;
}

}  // namespace

TEST_CASE("precedence and tree shape") {
  const ExprPtr p = parse_formula("x1*x2", {"x1", "x2"});
  CHECK(p->kind == ExprKind::Product);
  CHECK(p->children.size() == 2);

  const ExprPtr s = parse_formula("x1+x2*x3", {"x1", "x2", "x3"});
  REQUIRE(s->kind == ExprKind::Sum);
  CHECK(s->children[0]->kind == ExprKind::Variable);
  CHECK(s->children[1]->kind == ExprKind::Product);

  CHECK(parse_formula("a+b+c", {"a", "b", "c"})->children.size() == 3);
  const ExprPtr pw = parse_formula("x^2^0.5", {"x"});
  REQUIRE(pw->kind == ExprKind::Power);
  CHECK(pw->value == doctest::Approx(std::sqrt(2.0)));
  const ExprPtr div = parse_formula("x/y", {"x", "y"});
  REQUIRE(div->kind == ExprKind::Product);
  CHECK(div->children[1]->kind == ExprKind::Power);
  CHECK(div->children[1]->value == -1.0);
  CHECK(eval_expr(parse_formula("-x^2", {"x"}), {{"x", 3.0}}) == -9.0);
  CHECK(eval_expr(parse_formula("2^3^2", {}), {}) == 512.0);
  CHECK(eval_expr(parse_formula("-2*-3", {}), {}) == 6.0);
}

TEST_CASE("hand-evaluated values") {
  const ExprPtr e = parse_formula("m0/sqrt(1-(v/c)^2)", {"m0", "v", "c"});
  CHECK(eval_expr(e, {{"m0", 1.0}, {"v", 0.5}, {"c", 1.0}}) ==
        doctest::Approx(1.0 / std::sqrt(0.75)).epsilon(1e-14));
  CHECK(eval_expr(parse_formula("3.5", {}), {}) == 3.5);
  CHECK(eval_expr(parse_formula("sin(x1)+exp(x2)", {"x1", "x2"}), {{"x1", 0.0}, {"x2", 0.0}}) == 1.0);
  CHECK(eval_expr(parse_formula("pi", {}), {}) == std::numbers::pi);
  CHECK(eval_expr(parse_formula("e", {}), {}) == std::numbers::e);
  CHECK(eval_expr(parse_formula("1.5e-3*x", {"x"}), {{"x", 2.0}}) == doctest::Approx(3e-3));
}

TEST_CASE("matches a direct evaluator") {
  const ExprPtr e = parse_formula("q*(Ef+v*B*sin(theta))", {"q", "Ef", "v", "B", "theta"});
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-2, 2);
  for (int t = 0; t < 200; ++t) {
    const double q = u(rng), ef = u(rng), v = u(rng), b = u(rng), th = u(rng);
    const double direct = q * (ef + v * b * std::sin(th));
    const double got = eval_expr(e, {{"q", q}, {"Ef", ef}, {"v", v}, {"B", b}, {"theta", th}});
    CHECK(std::abs(got - direct) <= 1e-14 * std::max(1.0, std::abs(direct)));
  }
}

TEST_CASE("errors carry positions") {
  const std::vector<std::string> n{"x", "y"};
  auto pos = [&](const char* text) -> long {
    try {
      parse_formula(text, n);
    } catch (const ParseError& e) {
      return static_cast<long>(e.position());
    }
    return -1;
  };
  CHECK(pos("x+") == 2);
  CHECK(pos("(x") == 2);
  CHECK(pos("x)") == 1);
  CHECK(pos("sin()") == 4);
  CHECK(pos("foo(x)") == 0);
  CHECK(pos("x + z") == 4);
  CHECK(pos("x+*y") == 2);
  CHECK(pos("") == 0);
  CHECK_THROWS_AS(parse_formula("x^y", n), UnsupportedError);
}

TEST_CASE("strict evaluation errors") {
  const ExprPtr e = parse_formula("log(x)+sqrt(y)", {"x", "y"});
  CHECK_THROWS_AS(eval_expr(e, {{"x", -1.0}, {"y", 1.0}}), DomainError);
  CHECK_THROWS_AS(eval_expr(e, {{"x", 1.0}, {"y", -1.0}}), DomainError);
  CHECK_THROWS_AS(eval_expr(e, {{"x", 1.0}}), InvalidArgument);
  CHECK_THROWS_AS(eval_expr(parse_formula("x^0.5", {"x"}), {{"x", -4.0}}), DomainError);
}

TEST_CASE("printing round trip is structural") {
  std::vector<std::string> texts = {"-x^2", "x/(y+1)", "2^-3", "sin(cos(x))*y^(-0.5)", "1e-300*x",
                                    "x - -y", "abs(x)^3 + tanh(-y)"};
  for (const auto& f : formula_corpus()) texts.push_back(f.text);
  for (const auto& t : texts) {
    CAPTURE(t);
    const ExprPtr e = parse_formula_open(t);
    const std::string printed = to_string(e);
    const ExprPtr back = parse_formula_open(printed);
    CHECK(structurally_equal(e, back));
    CHECK(to_string(back) == printed);
  }
}

TEST_CASE("number formatting is shortest round trip") {
  for (double v : {0.1, 1.0 / 3.0, 1e-300, 6.02214076e23, -2.5, 0.0}) {
    const std::string s = format_number(v);
    CHECK(std::stod(s) == v);
  }
  CHECK(format_number(0.1) == "0.1");
}

TEST_CASE("canonicalization folds constants and preserves values") {
  CHECK(to_string(canonicalize(parse_formula("2*3+x", {"x"}))) == "x + 6");
  CHECK(to_string(canonicalize(parse_formula("x*1+0", {"x"}))) == "x");
  CHECK(to_string(canonicalize(parse_formula("(x^2)^3", {"x"}))) == "x^6");
  for (const auto& f : formula_corpus()) {
    CAPTURE(f.text);
    const ExprPtr e = parse_formula(f.text, f.inputs);
    const ExprPtr c = canonicalize(e);
    CHECK(expr_depth(c) <= expr_depth(e));
    std::mt19937_64 rng(3);
    for (int t = 0; t < 50; ++t) {
      const auto x = draw(f, rng);
      const double a = eval_expr(e, f.inputs, x), b = eval_expr(c, f.inputs, x);
      CHECK(std::abs(a - b) <= 1e-12 * std::max(1.0, std::abs(a)));
    }
  }
}

TEST_CASE("free variables and open parsing") {
  const ExprPtr e = parse_formula_open("b*sin(a)+pi*c");
  CHECK(free_variables(e) == std::vector<std::string>{"a", "b", "c"});
  CHECK_THROWS_AS(parse_formula("b*sin(a)", {"a"}), ParseError);
}

TEST_CASE("rounding constants") {
  const ExprPtr e = parse_formula("1.23456789*x^3+0.000049", {"x"});
  CHECK(to_string(round_constants(e, 2)) == to_string(parse_formula("1.23*x^3+0", {"x"})));
  const ExprPtr r4 = round_constants(e, 4);
  CHECK(eval_expr(r4, {{"x", 1.0}}) == doctest::Approx(1.2346 + 0.0));
}
