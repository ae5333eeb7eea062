// SPDX-License-Identifier: Apache-2.0
//
// Black-box modularity tests (separability, generalized separability,
// generalized symmetry) on finite-difference Hessians, the recursive tree
// converter, and neuron swapping for anatomical modularity.

#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "kan/attribution.hpp"
#include "kan/expr.hpp"
#include "kan/model.hpp"

namespace kan {

struct FunctionHandle {
  int n = 0;
  std::function<double(std::span<const double>)> eval;
  std::vector<std::pair<double, double>> box;  // per variable

  double operator()(std::span<const double> x) const { return eval(x); }
  void validate() const;
};

/// Compiles an expression into an index-based evaluator (strict domains).
FunctionHandle function_from_expr(const ExprPtr& e, const std::vector<std::string>& names,
                                  std::vector<std::pair<double, double>> box);
/// One output of a model; the box defaults to the layer-0 grid ranges.
FunctionHandle function_from_model(const MultKanModel& model, int output = 0);

struct TestConfig {
  int probes = 100;
  double h = 1e-3;     // relative to each variable's box width
  double tau = 1e-2;
  std::uint64_t seed = 0;

  void validate() const;
};

struct TestResult {
  bool passed = false;
  double score = 0.0;  // worst normalized violation; compare with tau
  int used = 0;        // probe points that contributed
  int skipped = 0;
};

enum class SepMode { Additive, Multiplicative };

/// Central-difference Hessian at x with per-variable steps h. Throws
/// DomainError when the stencil leaves the box.
Eigen::MatrixXd estimate_hessian(const FunctionHandle& f, std::span<const double> x,
                                 std::span<const double> h);
Eigen::MatrixXd estimate_hessian(const FunctionHandle& f, std::span<const double> x, double h);

/// Cross-group second derivatives vanish (of f, or of log|f|). Groups need
/// not cover every variable.
TestResult test_separability(const FunctionHandle& f, const std::vector<std::vector<int>>& groups,
                             SepMode mode, const TestConfig& cfg = {});

/// f = F(g(A) + h(B)) locally: the ratio of partials across A and B is
/// multiplicatively separable. The additive and multiplicative forms share
/// this test.
TestResult test_general_separability(const FunctionHandle& f, const std::vector<int>& group_a,
                                     const std::vector<int>& group_b, const TestConfig& cfg = {});
/// Split after the first k variables.
TestResult test_general_separability(const FunctionHandle& f, int k, const TestConfig& cfg = {});

/// f depends on the variables in S only through one scalar function of S.
TestResult test_symmetry(const FunctionHandle& f, const std::vector<int>& subset,
                         const TestConfig& cfg = {});

enum class GroupKind { Leaf, Symmetry, GeneralizedSeparable, SeparableAdd, SeparableMul };

std::string_view group_kind_name(GroupKind k);

struct ModularityNode {
  std::vector<int> vars;  // sorted
  GroupKind kind = GroupKind::Leaf;
  double score = 0.0;
  std::vector<ModularityNode> children;
};

struct ModularityTree {
  ModularityNode root;
  std::vector<std::string> names;

  /// Nested group notation, e.g. "((x1,x2),(x3,x4))".
  std::string to_string() const;
  std::string to_dot() const;
  /// Indented box form, one group per line.
  std::string to_box() const;
};

ModularityTree tree_convert(const FunctionHandle& f, const std::vector<std::string>& names,
                            const TestConfig& cfg = {});

struct SwapResult {
  MultKanModel model;
  std::vector<std::vector<int>> permutations;  // per node layer: new position -> old index
  std::vector<double> cost_trace;              // initial cost, then after each accepted swap
};

/// Node positions are (k + 0.5) / n within each node layer.
double connection_cost(const MultKanModel& model, const AttributionScores& scores);

/// Greedy pairwise swaps of same-type hidden nodes until no swap lowers the
/// connection cost.
SwapResult auto_swap(const MultKanModel& model, const AttributionScores& scores);
SwapResult auto_swap(const MultKanModel& model, const Eigen::MatrixXd& X);

}  // namespace kan
