// SPDX-License-Identifier: Apache-2.0
//
// Per-sample forward and reverse passes, templated on the scalar type.
// With T = Dual the reverse pass carries tangents, which gives directional
// derivatives of gradients (used by the conserved-quantity loss).

#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "kan/dual.hpp"
#include "kan/errors.hpp"
#include "kan/model.hpp"

namespace kan {

/// Flat index of the trainable parameters: unmasked, unfrozen edges only.
/// Order per edge: spline coefs, base_scale, spline_scale, a, b, c, d
/// (each block present only when it applies to the edge mode).
struct ParamLayout {
  struct Entry {
    int layer = 0;
    int edge = 0;
    int offset = 0;
    int n_coef = 0;  // 0 if the spline branch is not trained
    bool base = false;
    bool symbolic = false;
  };
  std::vector<Entry> entries;
  std::vector<std::vector<int>> lookup;  // [layer][edge] -> entry index or -1
  int size = 0;

  static ParamLayout build(const MultKanModel& model);
  std::vector<double> gather(const MultKanModel& model) const;
  void scatter(MultKanModel& model, const std::vector<double>& params) const;
  int spline_size(const Entry& e) const { return e.n_coef > 0 ? e.n_coef + 1 + (e.base ? 1 : 0) : 0; }
};

namespace kernel {

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }
inline double silu(double x) { return x * sigmoid(x); }
inline double silu_d1(double x) {
  const double s = sigmoid(x);
  return s + x * s * (1.0 - s);
}
inline double silu_d2(double x) {
  const double s = sigmoid(x);
  return s * (1.0 - s) * (2.0 + x * (1.0 - 2.0 * s));
}

template <class T>
struct EdgeRec {
  T x{}, y{}, dydx{};
  bool clamped = false;
  LocalBasis lb;
  T spline{}, silu{};
  T u{}, fu{}, dfu{};
};

template <class T>
void eval_edge_rec(const EdgeFunction& e, bool use_base, const T& x,
                   OutOfDomain policy, EdgeRec<T>& r) {
  r.x = x;
  r.y = constant_like(x, 0.0);
  r.dydx = constant_like(x, 0.0);
  if (!e.mask) return;
  const double xv = value_of(x);
  if (e.uses_spline()) {
    const double arg = resolve_argument(e.spline.grid, xv, policy);
    r.clamped = arg != xv;
    local_basis(e.spline.grid, arg, r.lb);
    double s0 = 0.0, s1 = 0.0, s2 = 0.0;
    const int nb = e.spline.grid.num_basis();
    for (int q = 0; q < r.lb.count; ++q) {
      const int idx = r.lb.first + q;
      if (idx < 0 || idx >= nb) continue;
      const double c = e.spline.coef[idx];
      s0 += c * r.lb.value[q];
      s1 += c * r.lb.d1[q];
      s2 += c * r.lb.d2[q];
    }
    T ds;
    if (r.clamped) {
      r.spline = constant_like(x, s0);
      ds = constant_like(x, 0.0);
    } else {
      r.spline = lift(s0, s1, x);
      ds = lift(s1, s2, x);
    }
    r.y = r.y + e.spline_scale * r.spline;
    r.dydx = r.dydx + e.spline_scale * ds;
    if (use_base) {
      r.silu = lift(silu(xv), silu_d1(xv), x);
      r.y = r.y + e.base_scale * r.silu;
      r.dydx = r.dydx + e.base_scale * lift(silu_d1(xv), silu_d2(xv), x);
    }
  }
  if (e.uses_symbolic()) {
    const bool strict = policy == OutOfDomain::Strict;
    const SymbolicPart& s = e.sym;
    r.u = s.a * x + s.b;
    r.fu = prim_eval(s.prim, r.u, strict);
    r.dfu = prim_deriv(s.prim, r.u, strict);
    r.y = r.y + s.c * r.fu + s.d;
    r.dydx = r.dydx + (s.c * s.a) * r.dfu;
  }
}

/// Reusable storage for one sample's forward pass.
template <class T>
struct SampleTape {
  std::vector<std::vector<T>> nodes;            // L + 1
  std::vector<std::vector<T>> subs;             // L
  std::vector<std::vector<EdgeRec<T>>> edges;   // L
  // Reverse-pass scratch.
  std::vector<std::vector<T>> node_adj;
  std::vector<T> sub_adj;

  void resize(const MultKanModel& m) {
    const int L = m.num_layers();
    nodes.resize(L + 1);
    node_adj.resize(L + 1);
    subs.resize(L);
    edges.resize(L);
    for (int l = 0; l <= L; ++l) {
      nodes[l].assign(m.width[l].n_nodes(), T{});
      node_adj[l].assign(m.width[l].n_nodes(), T{});
    }
    for (int l = 0; l < L; ++l) {
      subs[l].assign(m.layers[l].n_out, T{});
      edges[l].resize(m.layers[l].edges.size());
    }
  }
};

template <class T>
void combine_nodes(const NodeSpec& spec, const std::vector<T>& subs,
                   std::vector<T>& nodes) {
  for (int i = 0; i < spec.n_add; ++i) nodes[i] = subs[i];
  int off = spec.n_add;
  for (int m = 0; m < spec.n_mult(); ++m) {
    T prod = subs[off];
    for (int q = 1; q < spec.arities[m]; ++q) prod = prod * subs[off + q];
    nodes[spec.n_add + m] = prod;
    off += spec.arities[m];
  }
}

template <class T>
void forward_sample(const MultKanModel& m, const T* x, SampleTape<T>& tape,
                    OutOfDomain policy) {
  const int L = m.num_layers();
  for (int i = 0; i < m.num_inputs(); ++i) tape.nodes[0][i] = x[i];
  for (int l = 0; l < L; ++l) {
    const KanLayer& layer = m.layers[l];
    auto& subs = tape.subs[l];
    for (auto& s : subs) s = constant_like(x[0], 0.0);
    for (int i = 0; i < layer.n_in; ++i) {
      const T& xi = tape.nodes[l][i];
      for (int j = 0; j < layer.n_out; ++j) {
        const std::size_t e = static_cast<std::size_t>(i) * layer.n_out + j;
        EdgeRec<T>& rec = tape.edges[l][e];
        eval_edge_rec(layer.edges[e], m.use_base, xi, policy, rec);
        if (layer.edges[e].mask) subs[j] = subs[j] + rec.y;
      }
    }
    combine_nodes(m.width[l + 1], subs, tape.nodes[l + 1]);
    for (const T& v : tape.nodes[l + 1]) {
      if (!std::isfinite(value_of(v)))
        throw NonFiniteError("non-finite activation in layer " + std::to_string(l), l);
    }
  }
}

/// Reverse pass. `out_adj` is dLoss/dOutput; `edge_adj` (optional, indexed
/// [layer][edge]) adds direct adjoints on edge outputs (regularization).
/// Parameter gradients are accumulated into `grads` (layout-sized) when
/// non-null; input adjoints written into `in_adj` when non-null.
template <class T>
void backward_sample(const MultKanModel& m, const ParamLayout* layout,
                     SampleTape<T>& tape, const T* out_adj,
                     const std::vector<std::vector<double>>* edge_adj,
                     std::vector<T>* grads, T* in_adj) {
  const int L = m.num_layers();
  for (int i = 0; i < m.num_outputs(); ++i) tape.node_adj[L][i] = out_adj[i];
  for (int l = L - 1; l >= 0; --l) {
    const KanLayer& layer = m.layers[l];
    const NodeSpec& spec = m.width[l + 1];
    const auto& subs = tape.subs[l];
    const auto& nadj = tape.node_adj[l + 1];
    tape.sub_adj.assign(layer.n_out, constant_like(out_adj[0], 0.0));
    for (int i = 0; i < spec.n_add; ++i) tape.sub_adj[i] = nadj[i];
    int off = spec.n_add;
    for (int mm = 0; mm < spec.n_mult(); ++mm) {
      const int k = spec.arities[mm];
      for (int q = 0; q < k; ++q) {
        T others = constant_like(out_adj[0], 1.0);
        for (int r = 0; r < k; ++r)
          if (r != q) others = others * subs[off + r];
        tape.sub_adj[off + q] = nadj[spec.n_add + mm] * others;
      }
      off += k;
    }
    auto& prev_adj = tape.node_adj[l];
    for (auto& a : prev_adj) a = constant_like(out_adj[0], 0.0);
    for (int i = 0; i < layer.n_in; ++i) {
      for (int j = 0; j < layer.n_out; ++j) {
        const std::size_t e = static_cast<std::size_t>(i) * layer.n_out + j;
        const EdgeFunction& ef = layer.edges[e];
        if (!ef.mask) continue;
        const EdgeRec<T>& rec = tape.edges[l][e];
        T g = tape.sub_adj[j];
        if (edge_adj) g = g + (*edge_adj)[l][e];
        prev_adj[i] = prev_adj[i] + g * rec.dydx;
        if (!grads || !layout) continue;
        const int ent = layout->lookup[l][e];
        if (ent < 0) continue;
        const ParamLayout::Entry& pe = layout->entries[ent];
        auto& G = *grads;
        int p = pe.offset;
        if (pe.n_coef > 0) {
          const int nb = ef.spline.grid.num_basis();
          for (int q = 0; q < rec.lb.count; ++q) {
            const int idx = rec.lb.first + q;
            if (idx < 0 || idx >= nb) continue;
            const T basis = rec.clamped ? constant_like(rec.x, rec.lb.value[q])
                                        : lift(rec.lb.value[q], rec.lb.d1[q], rec.x);
            G[p + idx] = G[p + idx] + g * ef.spline_scale * basis;
          }
          p += pe.n_coef;
          if (pe.base) {
            G[p] = G[p] + g * rec.silu;
            ++p;
          }
          G[p] = G[p] + g * rec.spline;
          ++p;
        }
        if (pe.symbolic) {
          const T gf = g * ef.sym.c * rec.dfu;
          G[p] = G[p] + gf * rec.x;
          G[p + 1] = G[p + 1] + gf;
          G[p + 2] = G[p + 2] + g * rec.fu;
          G[p + 3] = G[p + 3] + g;
        }
      }
    }
  }
  if (in_adj) {
    for (int i = 0; i < m.num_inputs(); ++i) in_adj[i] = tape.node_adj[0][i];
  }
}

}  // namespace kernel
}  // namespace kan
