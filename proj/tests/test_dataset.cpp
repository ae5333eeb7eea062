// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <Eigen/LU>

#include <cmath>
#include <filesystem>
#include <random>

#include "kan/conserved.hpp"
#include "kan/dataset.hpp"
#include "kan/errors.hpp"
#include "kan/expr.hpp"
#include "kan/kanpiler.hpp"
#include "kan/kernel.hpp"
#include "kan/model_io.hpp"
#include "test_util.hpp"

#include <unistd.h>

using namespace kan;
using namespace kan::testing;

namespace {

const char* kDeterminant =
    "F11*(F22*F33-F23*F32)-F12*(F21*F33-F23*F31)+F13*(F21*F32-F22*F31)";

TaskSpec formula_task(const std::string& formula, int samples, std::uint64_t seed) {
  TaskSpec s;
  s.formula = formula;
  s.samples = samples;
  s.seed = seed;
  return s;
}

bool same_dataset(const Dataset& a, const Dataset& b) {
  return a.input_names == b.input_names && a.output_names == b.output_names &&
         a.train_inputs == b.train_inputs && a.train_labels == b.train_labels &&
         a.test_inputs == b.test_inputs && a.test_labels == b.test_labels;
}

}  // namespace

TEST_CASE("formula task labels are exact without noise") {
  const Dataset d = gen_dataset(formula_task("x1*x2", 1000, 3));
  CHECK(d.input_names == std::vector<std::string>{"x1", "x2"});
  CHECK(d.train_inputs.rows() + d.test_inputs.rows() == 1000);
  CHECK(d.train_inputs.minCoeff() >= -1.0);
  CHECK(d.train_inputs.maxCoeff() <= 1.0);
  for (Eigen::Index r = 0; r < d.train_inputs.rows(); ++r)
    CHECK(d.train_labels(r, 0) == d.train_inputs(r, 0) * d.train_inputs(r, 1));
}

TEST_CASE("comparison task generator matches the formula") {
  const Dataset d = gen_dataset(formula_task("exp(sin(pi*x1)+x2^2)", 200, 1));
  for (Eigen::Index r = 0; r < d.test_inputs.rows(); ++r) {
    const double x1 = d.test_inputs(r, 0), x2 = d.test_inputs(r, 1);
    CHECK(rel_err(d.test_labels(r, 0), std::exp(std::sin(M_PI * x1) + x2 * x2)) < 1e-14);
  }
}

TEST_CASE("same seed gives byte-identical files") {
  TaskSpec s = formula_task("sin(x)+y^2", 300, 42);
  s.noise = 0.01;
  const auto dir = std::filesystem::temp_directory_path();
  const std::string a = (dir / ("kan_gen_a_" + std::to_string(::getpid()) + ".csv")).string();
  const std::string b = (dir / ("kan_gen_b_" + std::to_string(::getpid()) + ".csv")).string();
  write_csv(a, dataset_to_table(gen_dataset(s)));
  write_csv(b, dataset_to_table(gen_dataset(s)));
  CHECK(read_file(a) == read_file(b));
  s.seed = 43;
  CHECK(table_to_csv(dataset_to_table(gen_dataset(s))) !=
        table_to_csv(dataset_to_table(gen_dataset(formula_task("sin(x)+y^2", 300, 42)))));
  std::filesystem::remove(a);
  std::filesystem::remove(b);
}

TEST_CASE("task validation") {
  CHECK_THROWS_AS(gen_dataset(formula_task("x+", 10, 0)), ParseError);
  CHECK_THROWS_AS(gen_dataset(formula_task("x", 0, 0)), InvalidArgument);
  TaskSpec s = formula_task("x", 10, 0);
  s.box = {{1.0, 1.0}};
  CHECK_THROWS_AS(gen_dataset(s), InvalidArgument);
  s.box = {{0.0, 1.0}};
  s.formula = "log(x-2)";
  CHECK_THROWS_AS(gen_dataset(s), DomainError);
  TaskSpec f;
  f.kind = TaskKind::ConservedQuantity;
  f.field = "pendulum";
  CHECK_THROWS_AS(gen_dataset(f), InvalidArgument);
}

TEST_CASE("CSV round trip keeps full precision") {
  Table t;
  t.names = {"a", "b", "y"};
  t.values = uniform_matrix(25, 3, -1e3, 1e3, 9);
  t.values(0, 0) = 1.0 / 3.0;
  t.values(1, 1) = -2.5e-300;
  const std::string path =
      (std::filesystem::temp_directory_path() / ("kan_rt_" + std::to_string(::getpid()) + ".csv"))
          .string();
  write_csv(path, t);
  const Table back = read_csv(path);
  std::filesystem::remove(path);
  CHECK(back.names == t.names);
  CHECK(back.values == t.values);
  const Dataset d = dataset_from_table(t, 1, 0.2);
  CHECK(d.train_inputs.rows() == 20);
  CHECK(d.test_inputs.rows() == 5);
  CHECK(d.output_names == std::vector<std::string>{"y"});
  CHECK(dataset_to_table(d).values == t.values);
}

TEST_CASE("malformed CSV is rejected") {
  const std::string path =
      (std::filesystem::temp_directory_path() / ("kan_bad_" + std::to_string(::getpid()) + ".csv"))
          .string();
  write_file_atomic(path, "a,b\n1,2\n3\n");
  CHECK_THROWS_AS(read_csv(path), InvalidArgument);
  write_file_atomic(path, "a,b\n1,zz\n");
  CHECK_THROWS_AS(read_csv(path), InvalidArgument);
  std::filesystem::remove(path);
  CHECK_THROWS_AS(read_csv(path), IoError);
}

TEST_CASE("relativistic augmentation adds beta and gamma") {
  TaskSpec s;
  s.formula = "m0/sqrt(1-(v/c)^2)";
  s.input_names = {"m0", "v", "c"};
  s.box = {{1, 2}, {0, 0.5}, {1, 2}};
  s.samples = 100;
  const Dataset d = gen_dataset(s);
  const Dataset a = augment_input(d, {{"beta", "v/c"}, {"gamma", "1/sqrt(1-beta^2)"}});
  CHECK(a.input_names == std::vector<std::string>{"m0", "v", "c", "beta", "gamma"});
  CHECK(a.train_inputs.leftCols(3) == d.train_inputs);
  for (Eigen::Index r = 0; r < a.train_inputs.rows(); ++r) {
    const double beta = a.train_inputs(r, 1) / a.train_inputs(r, 2);
    CHECK(rel_err(a.train_inputs(r, 3), beta) < 1e-15);
    CHECK(rel_err(a.train_inputs(r, 4), 1.0 / std::sqrt(1.0 - beta * beta)) < 1e-15);
  }
  CHECK(same_dataset(augment_input(d, {}), d));
  CHECK(same_dataset(select_inputs(a, d.input_names), d));
  CHECK_THROWS_AS(augment_input(d, {{"v", "2*v"}}), InvalidArgument);
  CHECK_THROWS_AS(augment_input(d, {{"w", "q*v"}}), ParseError);

  CHECK_THROWS_AS(augment_input(gen_dataset(formula_task("v+c", 50, 2)),
                                {{"gamma", "1/sqrt(1-(v/c)^2)"}}),
                  DomainError);
}

TEST_CASE("determinant column matches an LU determinant") {
  TaskSpec s;
  s.formula = "F11+F22+F33";
  s.input_names = {"F11", "F12", "F13", "F21", "F22", "F23", "F31", "F32", "F33"};
  s.box = {{0.8, 1.2}, {-0.2, 0.2}, {-0.2, 0.2}, {-0.2, 0.2}, {0.8, 1.2},
           {-0.2, 0.2}, {-0.2, 0.2}, {-0.2, 0.2}, {0.8, 1.2}};
  s.samples = 500;
  const Dataset d = augment_input(gen_dataset(s), {{"detF", kDeterminant}});
  for (Eigen::Index r = 0; r < d.train_inputs.rows(); ++r) {
    Eigen::Matrix3d F;
    for (int k = 0; k < 9; ++k) F(k / 3, k % 3) = d.train_inputs(r, k);
    CHECK(std::abs(d.train_inputs(r, 9) - F.determinant()) < 1e-14);
  }
}

TEST_CASE("symbolic 1D oscillator energy is conserved exactly") {
  const std::vector<std::string> names = field_variables("harmonic1d");
  CHECK(names == std::vector<std::string>{"x", "p"});
  const MultKanModel h = compile_to_kan(parse_formula("(x^2+p^2)/2", names), names);
  const Eigen::MatrixXd Z = uniform_matrix(500, 2, -1, 1, 6);
  const ConservedLoss cl = conserved_quantity_loss(h, Z, "harmonic1d");
  CHECK(cl.loss < 1e-12);
  CHECK(cl.used == 500);
  CHECK(cl.skipped == 0);

  // x alone is not conserved: the loss is the mean of p^2.
  const MultKanModel bad = compile_to_kan(parse_formula("x", names), names);
  const ConservedLoss wrong = conserved_quantity_loss(bad, Z, "harmonic1d");
  CHECK(rel_err(wrong.loss, Z.col(1).squaredNorm() / 500.0) < 1e-12);
}

TEST_CASE("constant model is inconclusive") {
  InitOptions o;
  o.use_base = false;
  MultKanModel m = init_model(parse_width("[2,1]"), o);
  for (auto& e : m.layers[0].edges) std::fill(e.spline.coef.begin(), e.spline.coef.end(), 0.0);
  CHECK_THROWS_AS(conserved_quantity_loss(m, uniform_matrix(20, 2, -1, 1, 1), "harmonic1d"),
                  InconclusiveError);
}

TEST_CASE("conserved loss gradient matches finite differences") {
  for (const char* w : {"[4,[0,2],1]", "[2,3,1]"}) {
    CAPTURE(w);
    MultKanModel m = random_model(parse_width(w), 21);
    const std::string field = m.num_inputs() == 4 ? "harmonic2d" : "harmonic1d";
    const Eigen::MatrixXd Z = uniform_matrix(40, m.num_inputs(), -0.9, 0.9, 2);
    const Eigen::MatrixXd F = field_matrix(field, Z);
    const ParamLayout layout = ParamLayout::build(m);
    const std::vector<double> p0 = layout.gather(m);
    const ConservedLoss cl = conserved_quantity_loss(m, layout, Z, F);
    MultKanModel work = m;
    const GradCheck gc = check_gradient(
        [&](const std::vector<double>& p) {
          layout.scatter(work, p);
          return conserved_quantity_loss(work, layout, Z, F).loss;
        },
        p0, cl.grad, 120, 1e-5, 1e-7);
    CHECK(gc.checked >= 60);
    CHECK(gc.worst < 1e-4);
  }
}
