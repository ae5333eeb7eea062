// SPDX-License-Identifier: Apache-2.0
//
// Fitting edges against symbolic primitives, locking edges symbolically and
// reading a closed-form formula back out of a symbolic network.

#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "kan/errors.hpp"
#include "kan/expr.hpp"
#include "kan/model.hpp"

namespace kan {

struct SymbolicFitResult {
  Prim prim = Prim::X;
  std::string name;
  double a = 1.0, b = 0.0, c = 1.0, d = 0.0;
  double r2 = 0.0;
  int complexity = 0;
};

struct FitOptions {
  std::vector<Prim> library;  // empty: default library (everything but "0")
  int top_k = 5;
  int r2_digits = 3;
  int grid_points = 41;
  double search_range = 10.0;  // (a, b) box in input-range units
  int refine_iters = 60;
  int max_search_samples = 256;
  double min_retained = 0.9;  // required share outside a pole guard band
};

const std::vector<Prim>& default_library();

/// y ≈ c * f(a * x + b) + d for one primitive. r2 is measured on every
/// sample with the guarded primitive (see prim_eval).
SymbolicFitResult fit_primitive(std::span<const double> xs, std::span<const double> ys, Prim p,
                                const FitOptions& opts = {});

/// r2 of a given affine-wrapped primitive on (xs, ys).
double symbolic_r2(std::span<const double> xs, std::span<const double> ys, const SymbolicPart& s);

/// Candidates for one edge, best first. Requires the model's activation
/// cache (run forward with keep_cache first).
std::vector<SymbolicFitResult> suggest_symbolic(const MultKanModel& model, const EdgeId& id,
                                                const FitOptions& opts = {});
std::vector<SymbolicFitResult> rank_fits(std::span<const double> xs, std::span<const double> ys,
                                         const FitOptions& opts = {});

/// Switches the edge to symbolic-only mode. With fit_affine the affine
/// parameters come from a fit against the cached edge activations; otherwise
/// (1, 0, 1, 0). The spline is kept so unfix_symbolic restores it exactly.
MultKanModel fix_symbolic(const MultKanModel& model, const EdgeId& id, const std::string& name,
                          bool fit_affine = true, bool freeze = false);
MultKanModel fix_symbolic(const MultKanModel& model, const EdgeId& id, const SymbolicPart& part,
                          bool freeze = false);
MultKanModel unfix_symbolic(const MultKanModel& model, const EdgeId& id);

struct AutoSymbolicEntry {
  EdgeId edge;
  bool resolved = false;
  SymbolicFitResult fit;
};

struct AutoSymbolicReport {
  std::vector<AutoSymbolicEntry> entries;
  std::size_t resolved() const;
  std::size_t unresolved() const;
  std::string to_text() const;
};

/// Fixes every unmasked spline or both-mode edge whose best fit reaches
/// r2_floor, layer by layer with activations recomputed on X.
AutoSymbolicReport auto_symbolic(MultKanModel& model, const Eigen::MatrixXd& X,
                                 double r2_floor = 0.99, const FitOptions& opts = {});

class NotSymbolicError : public Error {
 public:
  NotSymbolicError(const std::string& what, std::vector<EdgeId> offenders)
      : Error(what), offenders_(std::move(offenders)) {}
  const std::vector<EdgeId>& offenders() const { return offenders_; }

 private:
  std::vector<EdgeId> offenders_;
};

struct ExtractOptions {
  int digits = 4;  // starting precision for constant rounding
  int probes = 100;
  std::uint64_t seed = 0;
  // Reference data for the rounding check; the model itself when absent.
  std::optional<Eigen::MatrixXd> inputs;
  std::optional<Eigen::MatrixXd> labels;
};

/// Raw composition of the symbolic edges (no rounding).
std::vector<ExprPtr> compose_formula(const MultKanModel& model);

/// One formula per output with rounded constants. The rounding precision is
/// raised until the rounded formula's probe error is within twice the
/// unrounded error.
std::vector<ExprPtr> extract_formula(const MultKanModel& model, const ExtractOptions& opts = {});

}  // namespace kan
