// SPDX-License-Identifier: Apache-2.0
//
// Acceptance run. Each criterion prints one PASS/FAIL line; the exit code is
// the number of failures.

#include <Eigen/Dense>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "formula_corpus.hpp"
#include "kan/attribution.hpp"
#include "kan/conserved.hpp"
#include "kan/dataset.hpp"
#include "kan/errors.hpp"
#include "kan/expr.hpp"
#include "kan/kanpiler.hpp"
#include "kan/kernel.hpp"
#include "kan/model_io.hpp"
#include "kan/modularity.hpp"
#include "kan/spline.hpp"
#include "kan/symbolic_fit.hpp"
#include "kan/trainer.hpp"
#include "kan/versioning.hpp"
#include "modularity_corpus.hpp"
#include "test_util.hpp"

using namespace kan;
using namespace kan::testing;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

class Checks {
 public:
  void require(bool ok, const std::string& what) {
    if (!ok) {
      failed_ = true;
      if (!first_failure_.empty()) return;
      first_failure_ = what;
    }
  }
  void note(const std::string& s) {
    if (!notes_.empty()) notes_ += "; ";
    notes_ += s;
  }
  Outcome done() const {
    return {!failed_, failed_ ? "failed: " + first_failure_ + (notes_.empty() ? "" : " | " + notes_)
                              : notes_};
  }

 private:
  bool failed_ = false;
  std::string first_failure_, notes_;
};

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

std::filesystem::path scratch_dir(const std::string& tag) {
  auto p = std::filesystem::temp_directory_path() /
           ("kan_acceptance_" + std::to_string(getpid()) + "_" + tag);
  std::filesystem::remove_all(p);
  return p;
}

std::vector<std::string> xnames(int n) {
  std::vector<std::string> v;
  for (int i = 0; i < n; ++i) v.push_back("x" + std::to_string(i + 1));
  return v;
}

// 1 ---------------------------------------------------------------------

Outcome spline_convergence() {
  Checks c;
  std::vector<double> xs, ys;
  for (int i = 0; i < 2000; ++i) {
    xs.push_back(-1.0 + 2.0 * i / 1999.0);
    ys.push_back(std::sin(std::numbers::pi * xs.back()));
  }
  std::vector<double> lg, lm;
  for (int G : {5, 10, 20, 40}) {
    const SplineCurve s = fit_least_squares(xs, ys, Grid::uniform(-1, 1, G, 3), 0.0);
    double mse = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) mse += std::pow(curve_eval(s, xs[i]) - ys[i], 2);
    mse /= static_cast<double>(xs.size());
    lg.push_back(std::log(G));
    lm.push_back(std::log(mse));
  }
  const double mg = (lg[0] + lg[1] + lg[2] + lg[3]) / 4, mm = (lm[0] + lm[1] + lm[2] + lm[3]) / 4;
  double num = 0.0, den = 0.0;
  for (int k = 0; k < 4; ++k) {
    num += (lg[k] - mg) * (lm[k] - mm);
    den += (lg[k] - mg) * (lg[k] - mg);
  }
  const double slope = num / den;
  c.note("slope " + fmt(slope) + ", mse(G=40) " + fmt(std::exp(lm[3])));
  c.require(slope >= -9.0 && slope <= -7.0, "slope outside [-9,-7]");
  return c.done();
}

// 2 ---------------------------------------------------------------------

Outcome gradient_correctness() {
  Checks c;
  int coords = 0;
  double worst = 0.0, worst_input = 0.0;
  int seed = 31;
  for (const char* spec : {"[2,[1,1],1]", "[3,[0,1,[3]],2,1]", "[3,2,[2,1,[3]],1]"}) {
    MultKanModel m = random_model(parse_width(spec), seed++);
    m.layers[0].at(0, 0).mode = EdgeMode::Both;
    m.layers[0].at(0, 0).sym = SymbolicPart{Prim::Sin, 1.1, 0.2, 0.7, 0.05};
    const Eigen::MatrixXd X = uniform_matrix(40, m.num_inputs(), -0.95, 0.95, seed);
    const Eigen::MatrixXd Y = uniform_matrix(40, m.num_outputs(), -1, 1, seed + 1);
    TrainConfig cfg;
    cfg.lambda_l1 = 0.05;
    cfg.lambda_entropy = 0.05;
    const ParamLayout layout = ParamLayout::build(m);
    const std::vector<double> p0 = layout.gather(m);
    const LossGrad lg = loss_and_grad(m, layout, X, Y, cfg);
    auto loss = [&](const std::vector<double>& p) {
      layout.scatter(m, p);
      return loss_and_grad(m, layout, X, Y, cfg).loss;
    };
    const GradCheck r = check_gradient(loss, p0, lg.grad, 250);
    layout.scatter(m, p0);
    coords += r.checked;
    worst = std::max(worst, r.worst);

    // Input gradients of the first output.
    const Eigen::MatrixXd G = input_gradient(m, X);
    const double h = 1e-5;
    for (Eigen::Index s = 0; s < 10; ++s)
      for (int i = 0; i < m.num_inputs(); ++i) {
        Eigen::MatrixXd up = X.row(s), down = X.row(s);
        up(0, i) += h;
        down(0, i) -= h;
        const double fd = (evaluate(m, up)(0, 0) - evaluate(m, down)(0, 0)) / (2 * h);
        worst_input = std::max(worst_input, rel_err(G(s, i), fd));
        ++coords;
      }
  }
  c.require(coords >= 200, "fewer than 200 coordinates");
  c.note("coordinates " + std::to_string(coords) + ", worst param rel err " + fmt(worst) +
         ", worst input rel err " + fmt(worst_input));
  c.require(worst < 1e-4, "parameter gradient mismatch");
  c.require(worst_input < 1e-4, "input gradient mismatch");
  return c.done();
}

// 3 ---------------------------------------------------------------------

double linear_r2(const EdgeFunction& e, bool use_base) {
  std::vector<double> xs, ys;
  for (int k = 0; k < 201; ++k) {
    xs.push_back(-1.0 + 2.0 * k / 200.0);
    ys.push_back(eval_edge(e, xs.back(), use_base, OutOfDomain::Clamp));
  }
  return fit_primitive(xs, ys, Prim::X).r2;
}

Outcome multiplication_discovery() {
  Checks c;
  TaskSpec t;
  t.formula = "x*y";
  t.input_names = {"x", "y"};
  t.samples = 1000;
  t.box = {{-1, 1}};
  t.test_fraction = 0.0;
  t.seed = 0;
  const Dataset d = gen_dataset(t);
  InitOptions o;
  o.seed = 0;
  MultKanModel m = init_model(parse_width("[[2,0],[0,1],[1,0]]"), o);
  TrainConfig cfg;
  cfg.optimizer = OptimizerKind::Lbfgs;
  cfg.learning_rate = 1.0;
  cfg.steps = 500;
  train(m, d, cfg);
  const double r = rmse(m, d.train_inputs, d.train_labels);
  const double r0 = linear_r2(m.layers[0].at(0, 0), m.use_base);
  const double r1 = linear_r2(m.layers[0].at(1, 1), m.use_base);
  c.note("train rmse " + fmt(r) + ", edge r2 " + fmt(r0) + " / " + fmt(r1));
  c.require(r < 1e-3, "rmse >= 1e-3");
  c.require(r0 > 0.99 && r1 > 0.99, "layer-0 edge not linear");
  return c.done();
}

// 4 ---------------------------------------------------------------------

Outcome compiler_equivalence() {
  Checks c;
  double worst_eval = 0.0, worst_expand = 0.0;
  for (const auto& f : formula_corpus()) {
    const ExprPtr e = parse_formula(f.text, f.inputs);
    const MultKanModel m = compile_to_kan(e, f.inputs);
    const Eigen::MatrixXd X = sample_box(f, 100, 11);
    const Eigen::MatrixXd Y = evaluate(m, X, OutOfDomain::Strict);
    std::vector<double> x(X.cols());
    for (Eigen::Index s = 0; s < X.rows(); ++s) {
      for (Eigen::Index i = 0; i < X.cols(); ++i) x[i] = X(s, i);
      worst_eval = std::max(worst_eval, std::abs(Y(s, 0) - eval_expr(e, f.inputs, x)));
    }
    for (int l = 1; l < m.num_layers(); ++l)
      worst_expand = std::max(
          worst_expand, max_abs_diff(evaluate(expand(m, ExpandMode::Width, l, 1, 1), X), Y));
    for (int l = 0; l <= m.num_layers(); ++l)
      worst_expand =
          std::max(worst_expand, max_abs_diff(evaluate(expand(m, ExpandMode::Depth, l), X), Y));
  }
  c.note(std::to_string(formula_corpus().size()) + " formulas, worst vs evaluator " +
         fmt(worst_eval) + ", worst after expand " + fmt(worst_expand));
  c.require(formula_corpus().size() == 10, "corpus is not 10 formulas");
  c.require(worst_eval < 1e-10, "compiled model disagrees with evaluator");
  c.require(worst_expand < 1e-9, "expansion changed the function");
  return c.done();
}

// 5 ---------------------------------------------------------------------

Outcome attribution_scores() {
  Checks c;
  {
    TaskSpec t;
    t.formula = "(x1^2+x2^2)^2+(x3^2+x4^2)^2";
    t.input_names = xnames(4);
    t.box = {{-1, 1}};
    t.seed = 0;
    const Dataset d = gen_dataset(t);
    InitOptions o;
    MultKanModel m = init_model(parse_width("[4,2,1]"), o);
    TrainConfig cfg;
    cfg.optimizer = OptimizerKind::Lbfgs;
    cfg.learning_rate = 1.0;
    cfg.steps = 100;
    train(m, d, cfg);
    const std::vector<double> a = compute_attribution(m, d.train_inputs).node[0];
    const double lo = *std::min_element(a.begin(), a.end());
    const double hi = *std::max_element(a.begin(), a.end());
    c.note("four-input scores max/min " + fmt(hi / lo));
    c.require(lo > 0.0 && hi <= 2.0 * lo, "input scores not within 2x");
  }
  {
    std::string f;
    for (int i = 0; i < 100; ++i) {
      if (i) f += "+";
      f += "x" + std::to_string(i + 1) + "^2/2^" + std::to_string(i);
    }
    TaskSpec t;
    t.formula = f;
    t.input_names = xnames(100);
    t.samples = 3000;
    t.box = {{-1, 1}};
    t.seed = 0;
    const Dataset d = gen_dataset(t);
    InitOptions o;
    MultKanModel m = init_model(parse_width("[100,1]"), o);
    TrainConfig cfg;
    cfg.optimizer = OptimizerKind::Lbfgs;
    cfg.learning_rate = 1.0;
    cfg.steps = 100;
    train(m, d, cfg);
    const auto r = prune_inputs(m, compute_attribution(m, d.train_inputs));
    std::string kept;
    for (int i : r.retained_indices) kept += (kept.empty() ? "" : ",") + std::to_string(i);
    c.note("100-input sum keeps {" + kept + "}");
    c.require(r.retained_indices == std::vector<int>{0, 1, 2, 3, 4}, "retained set is not 0-4");
  }
  return c.done();
}

// 6 ---------------------------------------------------------------------

Outcome modularity_oracles() {
  Checks c;
  int chain = 0;
  for (const auto& mc : modularity_corpus()) {
    const auto names = xnames(mc.n);
    const auto f = function_from_expr(parse_formula(mc.text, names), names, mc.box);
    const bool add = test_separability(f, {mc.a, mc.b}, SepMode::Additive).passed;
    const bool mul = test_separability(f, {mc.a, mc.b}, SepMode::Multiplicative).passed;
    const bool gen = test_general_separability(f, mc.a, mc.b).passed;
    const bool sym = (mc.a.size() < 2 || test_symmetry(f, mc.a).passed) &&
                     (mc.b.size() < 2 || test_symmetry(f, mc.b).passed);
    const bool ok = (!(add || mul) || gen) && (!gen || sym);
    c.require(ok, "hierarchy chain broken on " + mc.text);
    chain += ok ? 1 : 0;
  }
  c.note("chain holds on " + std::to_string(chain) + "/" +
         std::to_string(modularity_corpus().size()));

  const auto n8 = xnames(8);
  const auto f8 = function_from_expr(
      parse_formula("((x1^2+x2^2)^2+(x3^2+x4^2)^2)^2+((x5^2+x6^2)^2+(x7^2+x8^2)^2)^2", n8), n8,
      {{-1, 1}});
  const ModularityTree t8 = tree_convert(f8, n8);
  c.note("8-var tree " + t8.to_string());
  c.require(t8.to_string() == "(((x1,x2),(x3,x4)),((x5,x6),(x7,x8)))", "8-var tree shape");

  const auto n3 = xnames(3);
  const auto f3 = function_from_expr(parse_formula("sin(x1)/sqrt(x2^2+x3^2)", n3), n3, {{0.2, 1.2}});
  const ModularityTree t3 = tree_convert(f3, n3);
  bool sym23 = false;
  for (const auto& ch : t3.root.children)
    if (ch.vars == std::vector<int>{1, 2}) sym23 = ch.kind != GroupKind::Leaf;
  c.note("3-var tree " + t3.to_string());
  c.require(t3.to_string() == "(x1,(x2,x3))" && sym23, "{x2,x3} not grouped");

  TestConfig cfg;
  cfg.seed = 7;
  const ModularityTree a = tree_convert(f8, n8, cfg), b = tree_convert(f8, n8, cfg);
  c.require(a.to_string() == b.to_string() && a.root.score == b.root.score, "not deterministic");
  return c.done();
}

// 7 ---------------------------------------------------------------------

// Share of connection cost carried by edges whose endpoints sit in different
// positional blocks, one block per task.
double cross_share(const MultKanModel& m, const AttributionScores& s, int tasks) {
  double cross = 0.0, total = 0.0;
  for (int l = 0; l < m.num_layers(); ++l) {
    const auto& layer = m.layers[l];
    const NodeSpec& next = m.width[l + 1];
    const int nin = layer.n_in, nout = next.n_nodes();
    for (int i = 0; i < nin; ++i) {
      const double pi = (i + 0.5) / nin;
      for (int j = 0; j < layer.n_out; ++j) {
        const double b = s.edge[l][static_cast<std::size_t>(i) * layer.n_out + j];
        if (b == 0.0) continue;
        const double po = (subnode_owner(next, j) + 0.5) / nout;
        const double cost = b * std::abs(pi - po);
        total += cost;
        if (static_cast<int>(pi * tasks) != static_cast<int>(po * tasks)) cross += cost;
      }
    }
  }
  return total > 0.0 ? cross / total : 0.0;
}

bool trace_monotone(const std::vector<double>& t) {
  for (std::size_t k = 1; k < t.size(); ++k)
    if (t[k] > t[k - 1]) return false;
  return true;
}

Outcome swap_modularity() {
  Checks c;
  double worst_preserve = 0.0;
  for (const char* spec : {"[3,4,2]", "[4,[3,2],3,2]", "[5,[2,1,[3]],4,1]"}) {
    const MultKanModel m = random_model(parse_width(spec), 5);
    const Eigen::MatrixXd X = uniform_matrix(100, m.num_inputs(), -1, 1, 6);
    const SwapResult r = auto_swap(m, X);
    worst_preserve = std::max(worst_preserve, max_abs_diff(evaluate(m, X), evaluate(r.model, X)));
    c.require(trace_monotone(r.cost_trace), std::string(spec) + ": cost trace increases");
  }

  // Binary multitask parity: y_k = x_{2k-1} xor x_{2k}, all 1024 inputs.
  Eigen::MatrixXd X(1024, 10), Y(1024, 5);
  for (int r = 0; r < 1024; ++r) {
    for (int i = 0; i < 10; ++i) X(r, i) = (r >> i) & 1;
    for (int k = 0; k < 5; ++k) Y(r, k) = ((r >> (2 * k)) ^ (r >> (2 * k + 1))) & 1;
  }
  Dataset d;
  d.train_inputs = X;
  d.train_labels = Y;
  d.input_names = xnames(10);
  for (int k = 0; k < 5; ++k) d.output_names.push_back("y" + std::to_string(k + 1));
  const Eigen::MatrixXd probes = uniform_matrix(100, 10, 0, 1, 8);
  std::string shares;
  for (std::uint64_t seed : {1, 2, 3}) {
    InitOptions o;
    o.seed = seed;
    MultKanModel m = init_model(parse_width("[10,5,5]"), o);
    TrainConfig cfg;
    cfg.optimizer = OptimizerKind::Lbfgs;
    cfg.learning_rate = 1.0;
    cfg.steps = 500;
    cfg.update_grid = false;
    train(m, d, cfg);
    m = prune(m, compute_attribution(m, X));
    const double fit = rmse(m, X, Y);
    const AttributionScores s0 = compute_attribution(m, X);
    const double before = cross_share(m, s0, 5);
    const SwapResult r = auto_swap(m, s0);
    const double after = cross_share(r.model, compute_attribution(r.model, X), 5);
    worst_preserve =
        std::max(worst_preserve, max_abs_diff(evaluate(m, probes), evaluate(r.model, probes)));
    c.require(trace_monotone(r.cost_trace), "parity cost trace increases");
    c.require(after < 0.10, "seed " + std::to_string(seed) + " cross share " + fmt(after));
    shares += (shares.empty() ? "" : ", ") + std::string("seed ") + std::to_string(seed) + " " +
              fmt(before) + "->" + fmt(after) + " (rmse " + fmt(fit) + ")";
  }
  c.note("parity cross share " + shares);
  c.note("worst preservation " + fmt(worst_preserve));
  c.require(worst_preserve < 1e-12, "swap changed the function");
  return c.done();
}

// 8 ---------------------------------------------------------------------

MultKanModel zero_input(MultKanModel m, int input) {
  for (int j = 0; j < m.layers[0].n_out; ++j)
    if (m.layers[0].at(input, j).mask) m = fix_symbolic(m, {0, input, j}, "0", false, true);
  return m;
}

Outcome hypothesis_testing() {
  Checks c;
  const auto dir = scratch_dir("relativity");
  std::string gaps;
  for (std::uint64_t seed : {0, 1, 2}) {
    TaskSpec t;
    t.formula = "m0/sqrt(1-(v/c)^2)";
    t.input_names = {"m0", "v", "c"};
    t.box = {{1, 2}, {0, 0.9}, {1, 2}};
    t.seed = seed;
    const Dataset d = augment_input(gen_dataset(t), {{"beta", "v/c"}, {"gamma", "1/sqrt(1-beta^2)"}});
    const int ib = 3, ig = 4;

    CheckpointStore store((dir / std::to_string(seed)).string());
    InitOptions o;
    o.seed = seed;
    MultKanModel m = init_model(parse_width("[5,[0,1],1]"), o);
    m.input_names = d.input_names;
    m = apply_module_constraint(m, 0, "[0]->[0]");
    store.commit(m, "init");
    TrainConfig cfg;
    cfg.optimizer = OptimizerKind::Lbfgs;
    cfg.learning_rate = 1.0;
    cfg.steps = 300;
    train(m, d, cfg);
    store.commit(m, "train");

    cfg.steps = 1000;
    MultKanModel no_gamma = zero_input(m, ig);
    train(no_gamma, d, cfg);
    store.commit(no_gamma, "fix gamma edges to 0; train");
    const double r_no_gamma = rmse(no_gamma, d.test_inputs, d.test_labels);

    MultKanModel no_beta = zero_input(store.rewind(VersionId{0, 1}).first, ib);
    train(no_beta, d, cfg);
    store.commit(no_beta, "fix beta edges to 0; train");
    const double r_no_beta = rmse(no_beta, d.test_inputs, d.test_labels);

    std::vector<std::string> ids, parents;
    for (const auto& e : store.history()) {
      ids.push_back(e.id.to_string());
      parents.push_back(e.parent ? e.parent->to_string() : "-");
    }
    c.require(ids == std::vector<std::string>{"0.0", "0.1", "0.2", "1.1", "1.2"},
              "unexpected version ids");
    c.require(parents == std::vector<std::string>{"-", "0.0", "0.1", "0.1", "1.1"},
              "unexpected version parents");
    c.require(r_no_beta * 10.0 <= r_no_gamma,
              "seed " + std::to_string(seed) + " gap below 10x");
    gaps += (gaps.empty() ? "" : ", ") + std::string("seed ") + std::to_string(seed) +
            ": gamma kept " + fmt(r_no_beta) + " vs beta kept " + fmt(r_no_gamma);
  }
  c.note("test rmse " + gaps);
  std::filesystem::remove_all(dir);
  return c.done();
}

// 9 ---------------------------------------------------------------------

Outcome conserved_quantities() {
  Checks c;
  {
    const std::vector<std::string> names{"x", "p"};
    const MultKanModel h = compile_to_kan(parse_formula("(x^2+p^2)/2", names), names);
    const Eigen::MatrixXd Z = uniform_matrix(500, 2, -1, 1, 3);
    const double l = conserved_quantity_loss(h, Z, "harmonic1d").loss;
    c.note("1D anchor loss " + fmt(l));
    c.require(l < 1e-12, "1D anchor loss");
  }
  std::string summary;
  for (std::uint64_t seed : {0, 1, 2}) {
    TaskSpec t;
    t.kind = TaskKind::ConservedQuantity;
    t.field = "harmonic2d";
    t.samples = 2000;
    t.seed = seed;
    const Dataset d = gen_dataset(t);
    InitOptions o;
    o.seed = seed;
    MultKanModel m = init_model(parse_width("[4,[0,2],1]"), o);
    TrainConfig cfg;
    cfg.optimizer = OptimizerKind::Adam;
    cfg.learning_rate = 3e-2;
    cfg.steps = 2000;
    train_conserved(m, d, cfg);
    const double loss = conserved_quantity_loss(m, d.train_inputs, "harmonic2d").loss;

    // Interior probes; the hidden grids are fitted to the sampled range.
    const Eigen::MatrixXd P = uniform_matrix(500, 4, -0.9, 0.9, 100 + seed);
    const Eigen::MatrixXd G = input_gradient(m, P);
    double num = 0.0, den = 0.0, worst = 0.0;
    for (Eigen::Index r = 0; r < P.rows(); ++r) {
      const double x = P(r, 0), y = P(r, 1), px = P(r, 2), py = P(r, 3);
      Eigen::Matrix<double, 4, 3> B;
      B << 2 * x, 0, py, 0, 2 * y, -px, 2 * px, 0, -y, 0, 2 * py, x;
      const Eigen::Vector4d g = G.row(r).transpose();
      const Eigen::Vector4d res = g - B * B.colPivHouseholderQr().solve(g);
      num += res.squaredNorm();
      den += g.squaredNorm();
      worst = std::max(worst, res.norm() / g.norm());
    }
    const double resid = std::sqrt(num / den);
    c.require(loss < 1e-3, "seed " + std::to_string(seed) + " loss " + fmt(loss));
    c.require(resid < 0.05, "seed " + std::to_string(seed) + " residual " + fmt(resid));
    summary += (summary.empty() ? "" : ", ") + std::string("seed ") + std::to_string(seed) +
               " loss " + fmt(loss) + " residual " + fmt(resid) + " (worst point " + fmt(worst) +
               ")";
  }
  c.note("config [4,[0,2],1] adam lr 0.03 x2000; " + summary);
  return c.done();
}

// 10 --------------------------------------------------------------------

Outcome versioning_fidelity() {
  Checks c;
  const auto dir = scratch_dir("versions");
  {
    CheckpointStore store(dir.string());
    TaskSpec t;
    t.formula = "sin(x1)+x2^2";
    t.input_names = xnames(2);
    t.samples = 200;
    t.box = {{-1, 1}};
    const Dataset d = gen_dataset(t);
    MultKanModel m = init_model(parse_width("[2,3,1]"), {});
    store.commit(m, "init");
    TrainConfig cfg;
    cfg.steps = 20;
    train(m, d, cfg);
    const MultKanModel at01 = m;
    const std::string json01 = model_to_json(m);
    store.commit(m, "train");
    forward(m, d.train_inputs, true);
    MultKanModel branch_a = fix_symbolic(m, {0, 0, 0}, "sin", true, false);
    train(branch_a, d, cfg);
    store.commit(branch_a, "fix sin; train");

    auto [restored, id] = store.rewind(VersionId{0, 1});
    c.require(id.to_string() == "1.1", "rewind id " + id.to_string());
    c.require(restored.same_parameters(at01), "restored parameters differ");
    c.require(model_to_json(restored) == json01, "restored JSON differs");
    c.require(max_abs_diff(evaluate(restored, d.train_inputs), evaluate(at01, d.train_inputs)) ==
                  0.0,
              "restored forward differs");
    forward(restored, d.train_inputs, true);
    MultKanModel branch_b = fix_symbolic(restored, {0, 1, 0}, "x^2", true, false);
    train(branch_b, d, cfg);
    store.commit(branch_b, "fix x^2; train");

    // The store reopened from disk sees the same tree.
    CheckpointStore again(dir.string());
    std::vector<std::string> lines;
    for (const auto& e : again.history())
      lines.push_back((e.parent ? e.parent->to_string() : "-") + ">" + e.id.to_string());
    c.require(lines == std::vector<std::string>{"->0.0", "0.0>0.1", "0.1>0.2", "0.1>1.1",
                                                 "1.1>1.2"},
              "version tree shape");
    c.require(again.load(VersionId{0, 1}).same_parameters(at01), "reloaded 0.1 differs");
    c.note("tree 0.0->0.1->0.2 and 0.1->1.1->1.2; restore byte-exact");
  }
  std::filesystem::remove_all(dir);
  return c.done();
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"spline convergence", spline_convergence},
      {"gradient correctness", gradient_correctness},
      {"multiplication discovery", multiplication_discovery},
      {"compiler equivalence", compiler_equivalence},
      {"attribution", attribution_scores},
      {"modularity oracles", modularity_oracles},
      {"auto_swap", swap_modularity},
      {"hypothesis testing", hypothesis_testing},
      {"conserved quantities", conserved_quantities},
      {"versioning fidelity", versioning_fidelity},
  };
  int failures = 0;
  for (std::size_t k = 0; k < criteria.size(); ++k) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome out;
    try {
      out = criteria[k].second();
    } catch (const std::exception& e) {
      out = {false, std::string("exception: ") + e.what()};
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    failures += out.pass ? 0 : 1;
    std::printf("[%2zu] %s  %-26s %7.1fs  %s\n", k + 1, out.pass ? "PASS" : "FAIL",
                criteria[k].first.c_str(), secs, out.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failures,
              criteria.size());
  return failures;
}
