// SPDX-License-Identifier: Apache-2.0
//
// Expression trees: parsing, printing, evaluation and canonicalization.
// The grammar is documented in docs/grammar.md.

#pragma once

#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace kan {

enum class ExprKind { Variable, Constant, Unary, Sum, Product, Power };

struct Expr;
using ExprPtr = std::shared_ptr<const Expr>;

struct Expr {
  ExprKind kind = ExprKind::Constant;
  std::string name;   // variable name or unary function name
  double value = 0.0; // constant value, or the exponent of a power
  std::vector<ExprPtr> children;
};

ExprPtr make_var(const std::string& name);
ExprPtr make_const(double v);
ExprPtr make_unary(const std::string& fn, ExprPtr arg);
/// Sums and products flatten nested children of the same kind; a single
/// child is returned as is.
ExprPtr make_sum(std::vector<ExprPtr> children);
ExprPtr make_product(std::vector<ExprPtr> children);
ExprPtr make_power(ExprPtr base, double exponent);

/// Function names accepted in calls.
bool is_unary_function(const std::string& name);

/// Throws ParseError (with position) on syntax errors and unknown names,
/// UnsupportedError on non-constant exponents.
ExprPtr parse_formula(const std::string& text, const std::vector<std::string>& input_names);
/// Every identifier that is not a function, pi or e becomes a variable.
ExprPtr parse_formula_open(const std::string& text);

/// Prints in the grammar parse_formula accepts; reparsing yields a
/// structurally equal tree.
std::string to_string(const ExprPtr& e);
/// Shortest decimal text that reads back as exactly `v`.
std::string format_number(double v);

bool structurally_equal(const ExprPtr& a, const ExprPtr& b);

/// Strict evaluation: DomainError outside a function's domain,
/// InvalidArgument for unbound variables.
double eval_expr(const ExprPtr& e, const std::map<std::string, double>& binding);
double eval_expr(const ExprPtr& e, const std::vector<std::string>& names,
                 std::span<const double> values);

/// Folds constants, merges nested powers and sqrt-powers, and removes
/// neutral elements. Evaluates identically on the tree's domain.
ExprPtr canonicalize(const ExprPtr& e);

/// Variable names occurring in the tree (sorted, unique).
std::vector<std::string> free_variables(const ExprPtr& e);

/// Operator depth: variables and constants have depth 0.
int expr_depth(const ExprPtr& e);

/// Rounds every constant to `digits` decimal places; exponents are kept.
ExprPtr round_constants(const ExprPtr& e, int digits);

}  // namespace kan
