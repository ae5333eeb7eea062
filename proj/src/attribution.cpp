// SPDX-License-Identifier: Apache-2.0

#include "kan/attribution.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "kan/errors.hpp"

namespace kan {

namespace {

double col_std(const Eigen::MatrixXd& M, Eigen::Index c) {
  const auto col = M.col(c);
  const double mean = col.mean();
  return std::sqrt((col.array() - mean).square().mean());
}

}  // namespace

AttributionScores compute_attribution(const MultKanModel& m, const ActivationCache& cache) {
  if (cache.batch() == 0) throw InvalidArgument("attribution needs a non-empty batch");
  const int L = m.num_layers();
  AttributionScores s;
  s.node.resize(L + 1);
  s.node_std.resize(L + 1);
  s.edge.resize(L);
  s.edge_std.resize(L);
  s.edge_mean.resize(L);
  s.subnode_std.resize(L);
  for (int l = 0; l <= L; ++l) {
    const int n = m.width[l].n_nodes();
    s.node_std[l].resize(n);
    for (int i = 0; i < n; ++i) s.node_std[l][i] = col_std(cache.nodes[l], i);
  }
  for (int l = 0; l < L; ++l) {
    const KanLayer& layer = m.layers[l];
    s.edge_std[l].resize(layer.edges.size());
    s.edge_mean[l].resize(layer.edges.size());
    for (std::size_t e = 0; e < layer.edges.size(); ++e) {
      const auto c = static_cast<Eigen::Index>(e);
      s.edge_std[l][e] = layer.edges[e].mask ? col_std(cache.edge_out[l], c) : 0.0;
      s.edge_mean[l][e] = layer.edges[e].mask ? cache.edge_out[l].col(c).mean() : 0.0;
    }
    s.subnode_std[l].resize(layer.n_out);
    for (int j = 0; j < layer.n_out; ++j) s.subnode_std[l][j] = col_std(cache.subnodes[l], j);
  }

  s.node[L].assign(m.width[L].n_nodes(), 1.0);
  for (int l = L - 1; l >= 0; --l) {
    const KanLayer& layer = m.layers[l];
    const NodeSpec& spec = m.width[l + 1];
    std::vector<double> sub_score(layer.n_out);
    for (int j = 0; j < layer.n_out; ++j) sub_score[j] = s.node[l + 1][subnode_owner(spec, j)];
    s.edge[l].assign(layer.edges.size(), 0.0);
    s.node[l].assign(layer.n_in, 0.0);
    for (int i = 0; i < layer.n_in; ++i) {
      for (int j = 0; j < layer.n_out; ++j) {
        const std::size_t e = static_cast<std::size_t>(i) * layer.n_out + j;
        const double N = s.subnode_std[l][j];
        const double b = N < kStdGuard ? 0.0 : sub_score[j] * s.edge_std[l][e] / N;
        s.edge[l][e] = b;
        s.node[l][i] += b;
      }
    }
  }
  return s;
}

AttributionScores compute_attribution(const MultKanModel& model, const Eigen::MatrixXd& X) {
  if (X.rows() == 0) throw InvalidArgument("attribution needs a non-empty batch");
  ActivationCache cache;
  evaluate_cached(model, X, cache);
  return compute_attribution(model, cache);
}

std::string AttributionScores::to_csv(const MultKanModel& model) const {
  std::ostringstream os;
  os.precision(17);
  os << "kind,layer,i,j,value\n";
  for (std::size_t l = 0; l < node.size(); ++l)
    for (std::size_t i = 0; i < node[l].size(); ++i)
      os << "node," << l << ',' << i << ",," << node[l][i] << '\n';
  for (std::size_t l = 0; l < edge.size(); ++l) {
    const int n_out = model.layers[l].n_out;
    for (std::size_t e = 0; e < edge[l].size(); ++e)
      os << "edge," << l << ',' << e / n_out << ',' << e % n_out << ',' << edge[l][e] << '\n';
  }
  return os.str();
}

namespace {

/// True if some output is still connected to an input through unmasked
/// edges (mult nodes need every subnode connected).
bool connected(const MultKanModel& m, const std::vector<std::vector<bool>>& removed) {
  std::vector<bool> live(m.num_inputs(), true);
  for (int l = 0; l < m.num_layers(); ++l) {
    const KanLayer& layer = m.layers[l];
    std::vector<bool> sub(layer.n_out, false);
    for (int i = 0; i < layer.n_in; ++i) {
      if (!live[i]) continue;
      for (int j = 0; j < layer.n_out; ++j) {
        const EdgeFunction& e = layer.at(i, j);
        const bool constant = e.mode == EdgeMode::Symbolic && e.sym.c == 0.0;
        if (e.mask && !constant) sub[j] = true;
      }
    }
    const NodeSpec& spec = m.width[l + 1];
    std::vector<bool> next(spec.n_nodes(), false);
    for (int k = 0; k < spec.n_nodes(); ++k) {
      if (l + 1 < static_cast<int>(removed.size()) && removed[l + 1][k]) continue;
      bool ok = true;
      for (int j : node_subnodes(spec, k)) ok = ok && sub[j];
      next[k] = ok;
    }
    live = std::move(next);
  }
  return std::find(live.begin(), live.end(), true) != live.end();
}


/// Adds `shift[j]` to subnode j of `layer` through the first live edge from
/// a source in `sources`; when none is live, a masked edge from the first
/// source becomes a constant symbolic edge.
void fold_shifts(KanLayer& layer, const std::vector<double>& shift, const std::vector<int>& sources) {
  for (int j = 0; j < layer.n_out; ++j) {
    if (shift[j] == 0.0) continue;
    EdgeFunction* target = nullptr;
    for (int k : sources)
      if (layer.at(k, j).mask) {
        target = &layer.at(k, j);
        break;
      }
    if (!target) {
      target = &layer.at(sources.front(), j);
      target->mask = true;
      target->mode = EdgeMode::Symbolic;
      target->sym = SymbolicPart{Prim::X, 1.0, 0.0, 0.0, 0.0};
    }
    if (target->uses_symbolic()) {
      target->sym.d += shift[j];
    } else {
      // B-spline bases sum to one on the (clamped) domain.
      for (double& c : target->spline.coef) c += shift[j] / target->spline_scale;
    }
  }
}

}  // namespace

MultKanModel prune(const MultKanModel& model, const AttributionScores& scores,
                   double node_threshold, double edge_threshold) {
  const int L = model.num_layers();
  if (static_cast<int>(scores.edge.size()) != L || static_cast<int>(scores.edge_mean.size()) != L)
    throw InvalidArgument("scores do not match the model");
  for (int l = 0; l < L; ++l)
    if (scores.edge[l].size() != model.layers[l].edges.size() ||
        scores.edge_mean[l].size() != model.layers[l].edges.size())
      throw InvalidArgument("scores do not match the model");
  MultKanModel m = model;
  m.cache.reset();

  std::vector<std::vector<bool>> removed(L + 1);
  for (int l = 0; l <= L; ++l) removed[l].assign(m.width[l].n_nodes(), false);
  for (int l = 1; l < L; ++l) {
    int kept = 0;
    for (int i = 0; i < m.width[l].n_nodes(); ++i) {
      removed[l][i] = scores.node[l][i] < node_threshold;
      kept += removed[l][i] ? 0 : 1;
    }
    if (kept == 0) throw InvalidArgument("pruning thresholds remove every node of layer " +
                                         std::to_string(l));
  }
  // Edges leaving removed nodes go too; every dropped edge's mean output is
  // folded into a surviving edge of the same subnode.
  for (int l = 0; l < L; ++l) {
    KanLayer& layer = m.layers[l];
    std::vector<double> shift(layer.n_out, 0.0);
    std::vector<int> sources;
    for (int i = 0; i < layer.n_in; ++i)
      if (!removed[l][i]) sources.push_back(i);
    for (int i = 0; i < layer.n_in; ++i)
      for (int j = 0; j < layer.n_out; ++j) {
        EdgeFunction& e = layer.at(i, j);
        const std::size_t k = static_cast<std::size_t>(i) * layer.n_out + j;
        if (e.mask && (removed[l][i] || scores.edge[l][k] < edge_threshold)) {
          e.mask = false;
          shift[j] += scores.edge_mean[l][k];
        }
      }
    fold_shifts(layer, shift, sources);
  }
  if (!connected(m, removed))
    throw InvalidArgument("pruning thresholds disconnect every output from the inputs");
  for (int l = L - 1; l >= 1; --l)
    for (int i = m.width[l].n_nodes() - 1; i >= 0; --i)
      if (removed[l][i]) remove_hidden_node(m, l, i);
  m.validate();
  return m;
}

InputPruneResult prune_inputs(const MultKanModel& model, const AttributionScores& scores,
                              const std::vector<int>& keep_in) {
  std::vector<int> keep = keep_in;
  std::sort(keep.begin(), keep.end());
  keep.erase(std::unique(keep.begin(), keep.end()), keep.end());
  if (keep.empty()) throw InvalidArgument("prune_inputs would drop every input");
  for (int k : keep)
    if (k < 0 || k >= model.num_inputs()) throw InvalidArgument("input index out of range");
  if (scores.edge_mean.empty() || scores.edge_mean[0].size() != model.layers[0].edges.size())
    throw InvalidArgument("scores do not match the model");

  MultKanModel m = model;
  m.cache.reset();
  KanLayer& layer = m.layers[0];
  std::vector<bool> kept(model.num_inputs(), false);
  for (int k : keep) kept[k] = true;
  std::vector<double> shift(layer.n_out, 0.0);
  for (int i = 0; i < layer.n_in; ++i)
    for (int j = 0; j < layer.n_out; ++j)
      if (!kept[i] && layer.at(i, j).mask)
        shift[j] += scores.edge_mean[0][static_cast<std::size_t>(i) * layer.n_out + j];
  fold_shifts(layer, shift, keep);
  for (int i = model.num_inputs() - 1; i >= 0; --i)
    if (!kept[i]) remove_input(m, i);
  InputPruneResult r;
  r.retained_indices = keep;
  for (int k : keep) r.retained_names.push_back(model.input_names[k]);
  r.model = std::move(m);
  return r;
}

InputPruneResult prune_inputs(const MultKanModel& model, const AttributionScores& scores,
                              std::optional<double> threshold, double relative) {
  const auto& a = scores.node.at(0);
  if (static_cast<int>(a.size()) != model.num_inputs())
    throw InvalidArgument("scores do not match the model");
  const double cut = threshold ? *threshold : relative * *std::max_element(a.begin(), a.end());
  std::vector<int> keep;
  for (int i = 0; i < model.num_inputs(); ++i)
    if (a[i] >= cut && a[i] > 0.0) keep.push_back(i);
  if (keep.empty()) throw InvalidArgument("all inputs fall below the attribution threshold");
  return prune_inputs(model, scores, keep);
}

}  // namespace kan
