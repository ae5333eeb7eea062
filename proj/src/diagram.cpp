// SPDX-License-Identifier: Apache-2.0

#include "kan/diagram.hpp"

#include <algorithm>
#include <sstream>

namespace kan {

namespace {

std::string node_id(int layer, int k) { return "n" + std::to_string(layer) + "_" + std::to_string(k); }

std::string render(const MultKanModel& m, const AttributionScores* s, const DiagramOptions& o) {
  const int L = m.num_layers();
  double amax = 0.0, bmax = 0.0;
  if (s) {
    for (const auto& layer : s->node)
      for (double a : layer) amax = std::max(amax, a);
    for (const auto& layer : s->edge)
      for (double b : layer) bmax = std::max(bmax, b);
  }
  std::ostringstream os;
  os.precision(4);
  os << "digraph kan {\n  rankdir=BT;\n  node [shape=circle, fixedsize=true, label=\"\"];\n";
  for (int l = 0; l <= L; ++l) {
    const NodeSpec& spec = m.width[l];
    os << "  { rank=same;";
    for (int k = 0; k < spec.n_nodes(); ++k) os << ' ' << node_id(l, k) << ';';
    os << " }\n";
    for (int k = 0; k < spec.n_nodes(); ++k) {
      const double a = s && amax > 0.0 ? s->node[l][k] / amax : 1.0;
      const double size = o.min_node + (o.max_node - o.min_node) * a;
      os << "  " << node_id(l, k) << " [width=" << size;
      if (l == 0) os << ", shape=box, fixedsize=false, label=\"" << m.input_names[k] << "\"";
      if (l > 0 && k >= spec.n_add) os << ", label=\"*\"";
      os << "];\n";
    }
  }
  for (int l = 0; l < L; ++l) {
    const KanLayer& layer = m.layers[l];
    const NodeSpec& spec = m.width[l + 1];
    for (int i = 0; i < layer.n_in; ++i) {
      for (int j = 0; j < layer.n_out; ++j) {
        const EdgeFunction& e = layer.at(i, j);
        if (!e.mask && !o.show_masked) continue;
        const double b = s && bmax > 0.0 ? s->edge_score(l, i, j, layer.n_out) / bmax : 1.0;
        os << "  " << node_id(l, i) << " -> " << node_id(l + 1, subnode_owner(spec, j))
           << " [penwidth=" << std::max(0.05, o.max_pen * (e.mask ? b : 0.0));
        if (!e.mask) os << ", style=dashed";
        if (o.label_edges && e.mask && e.uses_symbolic())
          os << ", label=\"" << prim_name(e.sym.prim) << "\"";
        os << "];\n";
      }
    }
  }
  os << "}\n";
  return os.str();
}

}  // namespace

std::string network_dot(const MultKanModel& model, const AttributionScores& scores,
                        const DiagramOptions& opts) {
  return render(model, &scores, opts);
}

std::string network_dot(const MultKanModel& model, const DiagramOptions& opts) {
  return render(model, nullptr, opts);
}

}  // namespace kan
