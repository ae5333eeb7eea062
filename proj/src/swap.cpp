// SPDX-License-Identifier: Apache-2.0

#include <cmath>

#include "kan/errors.hpp"
#include "kan/modularity.hpp"

namespace kan {

namespace {

/// pos[l][node] = slot of the node within its layer.
double cost_with(const MultKanModel& m, const AttributionScores& s,
                 const std::vector<std::vector<int>>& pos) {
  double cost = 0.0;
  for (int l = 0; l < m.num_layers(); ++l) {
    const KanLayer& layer = m.layers[l];
    const NodeSpec& spec = m.width[l + 1];
    const double n_in = layer.n_in;
    const double n_out = spec.n_nodes();
    for (int i = 0; i < layer.n_in; ++i) {
      const double pi = (pos[l][i] + 0.5) / n_in;
      for (int j = 0; j < layer.n_out; ++j) {
        const double b = s.edge[l][static_cast<std::size_t>(i) * layer.n_out + j];
        if (b == 0.0) continue;
        const double po = (pos[l + 1][subnode_owner(spec, j)] + 0.5) / n_out;
        cost += b * std::abs(pi - po);
      }
    }
  }
  return cost;
}

std::vector<std::vector<int>> identity_positions(const MultKanModel& m) {
  std::vector<std::vector<int>> pos(m.width.size());
  for (std::size_t l = 0; l < m.width.size(); ++l) {
    pos[l].resize(m.width[l].n_nodes());
    for (int k = 0; k < m.width[l].n_nodes(); ++k) pos[l][k] = k;
  }
  return pos;
}

bool compatible(const NodeSpec& spec, int a, int b) {
  const bool ma = a >= spec.n_add, mb = b >= spec.n_add;
  if (ma != mb) return false;
  if (!ma) return true;
  return spec.arities[a - spec.n_add] == spec.arities[b - spec.n_add];
}

}  // namespace

double connection_cost(const MultKanModel& model, const AttributionScores& scores) {
  if (static_cast<int>(scores.edge.size()) != model.num_layers())
    throw InvalidArgument("scores do not match the model");
  return cost_with(model, scores, identity_positions(model));
}

SwapResult auto_swap(const MultKanModel& model, const AttributionScores& scores) {
  if (model.num_layers() < 2) throw InvalidArgument("auto_swap needs at least one hidden layer");
  if (static_cast<int>(scores.edge.size()) != model.num_layers())
    throw InvalidArgument("scores do not match the model");
  auto pos = identity_positions(model);
  SwapResult r;
  double cost = cost_with(model, scores, pos);
  r.cost_trace.push_back(cost);
  bool improved = true;
  while (improved) {
    improved = false;
    for (int l = 1; l < model.num_layers(); ++l) {
      const NodeSpec& spec = model.width[l];
      for (int a = 0; a < spec.n_nodes(); ++a) {
        for (int b = a + 1; b < spec.n_nodes(); ++b) {
          if (!compatible(spec, a, b)) continue;
          std::swap(pos[l][a], pos[l][b]);
          const double c = cost_with(model, scores, pos);
          if (c < cost - 1e-12 * std::max(1.0, cost)) {
            cost = c;
            r.cost_trace.push_back(cost);
            improved = true;
          } else {
            std::swap(pos[l][a], pos[l][b]);
          }
        }
      }
    }
  }
  // Realize the arrangement on the model with in-layer swaps.
  r.model = model;
  r.model.cache.reset();
  r.permutations.resize(model.width.size());
  for (std::size_t l = 0; l < model.width.size(); ++l) {
    const int n = model.width[l].n_nodes();
    std::vector<int> perm(n);
    for (int k = 0; k < n; ++k) perm[pos[l][k]] = k;
    r.permutations[l] = perm;
    if (l == 0 || l + 1 == model.width.size()) continue;
    std::vector<int> cur(n);
    for (int k = 0; k < n; ++k) cur[k] = k;
    for (int p = 0; p < n; ++p) {
      int q = p;
      while (cur[q] != perm[p]) ++q;
      if (q != p) {
        swap_nodes(r.model, static_cast<int>(l), p, q);
        std::swap(cur[p], cur[q]);
      }
    }
  }
  return r;
}

SwapResult auto_swap(const MultKanModel& model, const Eigen::MatrixXd& X) {
  return auto_swap(model, compute_attribution(model, X));
}

}  // namespace kan
