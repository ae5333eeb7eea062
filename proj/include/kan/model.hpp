// SPDX-License-Identifier: Apache-2.0
//
// MultKAN computation graph: edge functions, add/mult node wiring, batched
// forward pass with an activation cache, and structural editing.

#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "kan/primitives.hpp"
#include "kan/spline.hpp"

namespace kan {

enum class EdgeMode { Spline, Symbolic, Both };

std::string_view edge_mode_name(EdgeMode m);
EdgeMode edge_mode_from_name(std::string_view name);

/// y = c * f(a * x + b) + d
struct SymbolicPart {
  Prim prim = Prim::X;
  double a = 1.0, b = 0.0, c = 1.0, d = 0.0;
  bool operator==(const SymbolicPart&) const = default;
};

struct EdgeFunction {
  SplineCurve spline;
  double base_scale = 1.0;
  double spline_scale = 1.0;
  bool mask = true;     // false: output is exactly 0, nothing evaluated
  bool frozen = false;  // excluded from the optimizer's parameter set
  bool fresh = false;   // created by expand and not perturbed yet
  EdgeMode mode = EdgeMode::Spline;
  SymbolicPart sym;

  bool uses_spline() const { return mode != EdgeMode::Symbolic; }
  bool uses_symbolic() const { return mode != EdgeMode::Spline; }
  bool operator==(const EdgeFunction&) const = default;
};

/// One node layer: n_add copy nodes followed by mult nodes of given arities.
struct NodeSpec {
  int n_add = 0;
  std::vector<int> arities;

  int n_mult() const { return static_cast<int>(arities.size()); }
  int n_nodes() const { return n_add + n_mult(); }
  int n_sub() const;
  /// First subnode index consumed by mult node m.
  int mult_offset(int m) const;
  bool operator==(const NodeSpec&) const = default;
};

using WidthSpec = std::vector<NodeSpec>;

/// Accepts JSON-like "[2,[0,1],1]": an integer n means (n, 0); [a, m] has m
/// binary mult nodes; [a, m, [k1,...,km]] gives explicit arities.
WidthSpec parse_width(const std::string& text);
std::string format_width(const WidthSpec& w);

struct KanLayer {
  int n_in = 0;
  int n_out = 0;
  std::vector<EdgeFunction> edges;  // row-major: edge(i, j) = edges[i * n_out + j]

  EdgeFunction& at(int i, int j) { return edges[static_cast<std::size_t>(i) * n_out + j]; }
  const EdgeFunction& at(int i, int j) const {
    return edges[static_cast<std::size_t>(i) * n_out + j];
  }
  bool operator==(const KanLayer&) const = default;
};

/// Last forward batch: node values per node layer, edge outputs and subnode
/// sums per KAN layer. Matrices are samples x entries.
struct ActivationCache {
  std::vector<Eigen::MatrixXd> nodes;     // L + 1 entries
  std::vector<Eigen::MatrixXd> edge_out;  // L entries, columns = edges
  std::vector<Eigen::MatrixXd> subnodes;  // L entries
  Eigen::Index batch() const { return nodes.empty() ? 0 : nodes[0].rows(); }
};

struct EdgeId {
  int layer = 0;
  int i = 0;
  int j = 0;
  auto operator<=>(const EdgeId&) const = default;
};

class MultKanModel {
 public:
  WidthSpec width;
  std::vector<KanLayer> layers;  // layers[l] maps node layer l to subnodes of l + 1
  std::vector<std::string> input_names;
  bool use_base = true;  // include the base_scale * silu(x) residual
  std::optional<ActivationCache> cache;

  int num_layers() const { return static_cast<int>(layers.size()); }
  int num_inputs() const { return width.front().n_nodes(); }
  int num_outputs() const { return width.back().n_nodes(); }

  EdgeFunction& edge(const EdgeId& id) { return layers[id.layer].at(id.i, id.j); }
  const EdgeFunction& edge(const EdgeId& id) const { return layers[id.layer].at(id.i, id.j); }

  /// Throws InvalidArgument if layer shapes do not match the width spec.
  void validate() const;

  /// Parameters only (the cache is ignored).
  bool same_parameters(const MultKanModel& o) const {
    return width == o.width && layers == o.layers && input_names == o.input_names &&
           use_base == o.use_base;
  }
};

std::vector<std::string> default_input_names(int n);

struct InitOptions {
  int grid_intervals = 5;
  int order = 3;
  std::uint64_t seed = 0;
  bool sparse = false;
  double lo = -1.0;
  double hi = 1.0;
  double noise = 0.1;
  bool use_base = true;
};

MultKanModel init_model(const WidthSpec& width, const InitOptions& opts = {});

/// Batched forward. Rows of X are samples. Strict policy raises DomainError
/// where training mode would clamp.
Eigen::MatrixXd forward(MultKanModel& model, const Eigen::MatrixXd& X,
                        bool keep_cache = false,
                        OutOfDomain policy = OutOfDomain::Clamp);
Eigen::MatrixXd evaluate(const MultKanModel& model, const Eigen::MatrixXd& X,
                         OutOfDomain policy = OutOfDomain::Clamp);
/// Same as evaluate, caching into `cache`.
Eigen::MatrixXd evaluate_cached(const MultKanModel& model, const Eigen::MatrixXd& X,
                                ActivationCache& cache,
                                OutOfDomain policy = OutOfDomain::Clamp);

/// Value of one edge at x (mask honored).
double eval_edge(const EdgeFunction& e, double x, bool use_base,
                 OutOfDomain policy = OutOfDomain::Strict);

/// An edge that outputs exactly zero (masked, spline zeroed).
EdgeFunction zero_edge(const Grid& grid);
/// Symbolic-only identity edge y = x.
EdgeFunction identity_edge(const Grid& grid);

enum class ExpandMode { Width, Depth };

/// Width: adds nodes to hidden node layer `layer_id` (1..L-1); add nodes are
/// inserted after the existing add nodes, mult nodes (binary) appended.
/// Depth: inserts an identity layer after node layer `layer_id` (0..L).
/// New edges are flagged fresh.
MultKanModel expand(const MultKanModel& model, ExpandMode mode, int layer_id,
                    int extra_adds = 1, int extra_mults = 0);

enum class PerturbScope { All, NewOnly };

/// Adds N(0, magnitude) noise to spline coefficients in scope, unmasks those
/// edges and switches symbolic-only ones to both-mode.
MultKanModel perturb(const MultKanModel& model, double magnitude,
                     PerturbScope scope, std::uint64_t seed = 0);

/// Parses "[0,1]->[0,1]->[0]" into index groups (alternating node groups and
/// subnode groups).
std::vector<std::vector<int>> parse_module_spec(const std::string& spec);

/// Masks and freezes edges crossing the module boundary, starting at node
/// layer `start_layer`.
MultKanModel apply_module_constraint(const MultKanModel& model, int start_layer,
                                     const std::string& spec);

// Structural edits used by pruning and swapping.
void remove_hidden_node(MultKanModel& model, int layer, int node);
void remove_input(MultKanModel& model, int input);
/// Swaps two nodes of the same type (add/add, or mult/mult of equal arity)
/// in hidden node layer `layer`.
void swap_nodes(MultKanModel& model, int layer, int a, int b);

/// Subnode indices feeding node `node` of node layer `layer` (layer >= 1).
std::vector<int> node_subnodes(const NodeSpec& spec, int node);
/// Node fed by subnode `sub`.
int subnode_owner(const NodeSpec& spec, int sub);

std::size_t count_unmasked(const MultKanModel& model);
bool has_symbolic_edges(const MultKanModel& model);

}  // namespace kan
