// SPDX-License-Identifier: Apache-2.0
//
// Formula compiler: canonical expression trees become symbolic-mode MultKAN
// models whose forward pass computes the formula.

#pragma once

#include <string>
#include <vector>

#include "kan/expr.hpp"
#include "kan/model.hpp"

namespace kan {

/// One edge of the compiled network: c * f(a * src + b) + d.
struct PlanTerm {
  int src = 0;  // position of the source node in the previous node layer
  Prim prim = Prim::X;
  double a = 1.0, b = 0.0, c = 1.0, d = 0.0;
};

struct PlanSubnode {
  std::vector<PlanTerm> terms;
};

struct PlanNode {
  bool mult = false;
  std::vector<PlanSubnode> subnodes;  // one for add nodes
  std::string label;                  // printed subexpression (for diagnostics)
};

/// Node layers of the compiled network. Layer 0 are the inputs; in every
/// other layer add nodes precede mult nodes.
struct CompilePlan {
  std::vector<std::string> input_names;
  std::vector<std::vector<PlanNode>> layers;  // layers[0] is empty (inputs)

  WidthSpec width() const;
  std::string describe() const;
};

CompilePlan plan_compile(const std::vector<ExprPtr>& outputs,
                         const std::vector<std::string>& input_names);

/// Compiles one or more output formulas over shared inputs. Throws
/// UnsupportedError for powers outside {2, 3, 4, -1, -2, 1/2, -1/2}.
MultKanModel compile_to_kan(const std::vector<ExprPtr>& outputs,
                            const std::vector<std::string>& input_names, int grid_intervals = 5,
                            int order = 3);
MultKanModel compile_to_kan(const ExprPtr& tree, const std::vector<std::string>& input_names,
                            int grid_intervals = 5, int order = 3);

}  // namespace kan
