// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>
#include <random>

#include "formula_corpus.hpp"
#include "kan/errors.hpp"
#include "kan/expr.hpp"
#include "kan/kanpiler.hpp"
#include "kan/trainer.hpp"
#include "test_util.hpp"

using namespace kan;
using namespace kan::testing;

namespace {

double worst_vs_eval(const MultKanModel& m, const ExprPtr& e, const CorpusFormula& f,
                     const Eigen::MatrixXd& X) {
  const Eigen::MatrixXd Y = evaluate(m, X, OutOfDomain::Strict);
  double worst = 0.0;
  std::vector<double> x(X.cols());
  for (Eigen::Index s = 0; s < X.rows(); ++s) {
    for (Eigen::Index i = 0; i < X.cols(); ++i) x[i] = X(s, i);
    worst = std::max(worst, std::abs(Y(s, 0) - eval_expr(e, f.inputs, x)));
  }
  return worst;
}

}  // namespace

TEST_CASE("product compiles to one mult node") {
  MultKanModel m = compile_to_kan(parse_formula("x*y", {"x", "y"}), {"x", "y"});
  CHECK(format_width(m.width) == "[[2,0],[0,1],[1,0]]");
  Eigen::MatrixXd X(1, 2);
  X << 3, 4;
  CHECK(std::abs(forward(m, X)(0, 0) - 12.0) < 1e-12);
}

TEST_CASE("identity compiles to one edge") {
  MultKanModel m = compile_to_kan(parse_formula("x", {"x"}), {"x"});
  CHECK(m.num_layers() == 1);
  CHECK(count_unmasked(m) == 1);
  const Eigen::MatrixXd X = uniform_matrix(30, 1, -3, 3, 1);
  CHECK(max_abs_diff(forward(m, X), X) == 0.0);
}

TEST_CASE("corpus compiles and agrees with the evaluator") {
  for (const auto& f : formula_corpus()) {
    CAPTURE(f.text);
    const ExprPtr e = parse_formula(f.text, f.inputs);
    const MultKanModel m = compile_to_kan(e, f.inputs);
    const Eigen::MatrixXd X = sample_box(f, 100, 5);
    CHECK(worst_vs_eval(m, e, f, X) < 1e-10);
    // No gratuitous layers.
    CHECK(m.num_layers() <= expr_depth(canonicalize(e)));
    CHECK(m.input_names == f.inputs);
  }
}

TEST_CASE("expansion of compiled models preserves the function") {
  for (const auto& f : formula_corpus()) {
    CAPTURE(f.text);
    const ExprPtr e = parse_formula(f.text, f.inputs);
    const MultKanModel m = compile_to_kan(e, f.inputs);
    const Eigen::MatrixXd X = sample_box(f, 100, 6);
    const Eigen::MatrixXd ref = evaluate(m, X);
    for (int l = 1; l < m.num_layers(); ++l)
      CHECK(max_abs_diff(evaluate(expand(m, ExpandMode::Width, l, 1, 1), X), ref) < 1e-9);
    for (int l = 0; l <= m.num_layers(); ++l)
      CHECK(max_abs_diff(evaluate(expand(m, ExpandMode::Depth, l), X), ref) < 1e-9);
  }
}

TEST_CASE("compiled models are symbolic and spline gradients vanish") {
  const auto& f = formula_corpus()[0];
  const MultKanModel m = compile_to_kan(parse_formula(f.text, f.inputs), f.inputs);
  for (const auto& layer : m.layers)
    for (const auto& e : layer.edges)
      if (e.mask) CHECK(e.mode == EdgeMode::Symbolic);
  const Eigen::MatrixXd X = sample_box(f, 40, 2);
  const Eigen::MatrixXd Y = evaluate(m, X).array() + 0.1;
  const ParamLayout layout = ParamLayout::build(m);
  const LossGrad lg = loss_and_grad(m, layout, X, Y, TrainConfig{});
  for (const auto& ent : layout.entries) {
    CHECK(layout.spline_size(ent) == 0);
    CHECK(ent.symbolic);
  }
  CHECK(lg.mse > 0.0);
}

TEST_CASE("unsupported constructs are rejected") {
  CHECK_THROWS_AS(compile_to_kan(parse_formula("x^1.5", {"x"}), {"x"}), UnsupportedError);
  CHECK_THROWS_AS(compile_to_kan(parse_formula("x^5", {"x"}), {"x"}), UnsupportedError);
  CHECK_THROWS_AS(parse_formula("x^y", {"x", "y"}), UnsupportedError);
  CHECK_THROWS_AS(compile_to_kan(parse_formula("x+y", {"x", "y"}), {"x"}), InvalidArgument);
}

TEST_CASE("supported powers compile") {
  for (const char* t : {"x^2", "x^3", "x^4", "x^-1", "x^-2", "x^0.5", "x^-0.5", "(x+2)^(1/2)"}) {
    CAPTURE(t);
    const ExprPtr e = parse_formula(t, {"x"});
    const MultKanModel m = compile_to_kan(e, {"x"});
    const CorpusFormula f{t, {"x"}, {{0.5, 2}}};
    CHECK(worst_vs_eval(m, e, f, sample_box(f, 50, 1)) < 1e-12);
  }
}

TEST_CASE("multiple outputs share inputs") {
  const std::vector<std::string> in{"x", "y"};
  const std::vector<ExprPtr> outs{parse_formula("x*y", in), parse_formula("sin(x)+y^2", in)};
  const MultKanModel m = compile_to_kan(outs, in);
  CHECK(m.num_outputs() == 2);
  const Eigen::MatrixXd X = uniform_matrix(50, 2, -1, 1, 3);
  const Eigen::MatrixXd Y = evaluate(m, X);
  for (int s = 0; s < 50; ++s) {
    CHECK(std::abs(Y(s, 0) - X(s, 0) * X(s, 1)) < 1e-12);
    CHECK(std::abs(Y(s, 1) - std::sin(X(s, 0)) - X(s, 1) * X(s, 1)) < 1e-12);
  }
}

TEST_CASE("plan describes the layout") {
  const CompilePlan p = plan_compile({parse_formula("x*y+sin(x)", {"x", "y"})}, {"x", "y"});
  CHECK(p.layers.size() >= 2);
  CHECK_FALSE(p.describe().empty());
  CHECK(p.width().front().n_nodes() == 2);
}
