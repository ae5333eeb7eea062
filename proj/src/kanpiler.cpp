// SPDX-License-Identifier: Apache-2.0

#include "kan/kanpiler.hpp"

#include <algorithm>
#include <map>
#include <sstream>
#include <tuple>

#include "kan/errors.hpp"

namespace kan {

namespace {

struct Term {
  double scale = 1.0;
  Prim prim = Prim::X;
  double a = 1.0, b = 0.0;
  ExprPtr inner;
};

struct BTerm {
  int src = 0;  // builder node id
  Prim prim = Prim::X;
  double a = 1.0, b = 0.0, c = 1.0, d = 0.0;
};

struct BSub {
  std::vector<BTerm> terms;
};

struct BNode {
  int level = 0;
  bool mult = false;
  int input = -1;
  std::vector<BSub> subs;
  std::string label;
};

Prim power_prim(double p) {
  if (p == 2.0) return Prim::X2;
  if (p == 3.0) return Prim::X3;
  if (p == 4.0) return Prim::X4;
  if (p == -1.0) return Prim::Inv;
  if (p == -2.0) return Prim::Inv2;
  if (p == 0.5) return Prim::Sqrt;
  if (p == -0.5) return Prim::InvSqrt;
  throw UnsupportedError("exponent " + format_number(p) + " is not supported by the compiler");
}

bool is_const(const ExprPtr& e) { return e->kind == ExprKind::Constant; }

/// Splits a leading constant factor off a product.
std::pair<double, ExprPtr> split_scale(const ExprPtr& e) {
  if (e->kind != ExprKind::Product || !is_const(e->children.front())) return {1.0, e};
  std::vector<ExprPtr> rest(e->children.begin() + 1, e->children.end());
  return {e->children.front()->value, make_product(std::move(rest))};
}

/// arg = a * g + b
void split_affine(const ExprPtr& arg, double& a, double& b, ExprPtr& g) {
  a = 1.0;
  b = 0.0;
  g = arg;
  if (arg->kind == ExprKind::Sum) {
    std::vector<ExprPtr> rest;
    for (const auto& c : arg->children) {
      if (is_const(c))
        b += c->value;
      else
        rest.push_back(c);
    }
    if (rest.size() == 1) {
      std::tie(a, g) = split_scale(rest.front());
    } else {
      g = make_sum(std::move(rest));
    }
    return;
  }
  std::tie(a, g) = split_scale(arg);
}

Term decompose(const ExprPtr& e) {
  Term t;
  ExprPtr rest;
  std::tie(t.scale, rest) = split_scale(e);
  if (rest->kind == ExprKind::Unary) {
    t.prim = prim_from_name(rest->name);
    split_affine(rest->children[0], t.a, t.b, t.inner);
  } else if (rest->kind == ExprKind::Power) {
    t.prim = power_prim(rest->value);
    split_affine(rest->children[0], t.a, t.b, t.inner);
  } else {
    t.prim = Prim::X;
    t.inner = rest;
  }
  return t;
}

/// Terms of a subnode: a sum contributes one term per child plus an offset.
std::vector<Term> subnode_terms(const ExprPtr& e, double& offset) {
  offset = 0.0;
  std::vector<Term> terms;
  if (e->kind == ExprKind::Sum) {
    for (const auto& c : e->children) {
      if (is_const(c))
        offset += c->value;
      else
        terms.push_back(decompose(c));
    }
  } else {
    terms.push_back(decompose(e));
  }
  return terms;
}

bool is_mult_value(const ExprPtr& e) {
  if (e->kind != ExprKind::Product) return false;
  int factors = 0;
  for (const auto& c : e->children) factors += is_const(c) ? 0 : 1;
  return factors >= 2;
}

class Builder {
 public:
  explicit Builder(const std::vector<std::string>& inputs) : inputs_(inputs) {
    for (std::size_t i = 0; i < inputs.size(); ++i) {
      BNode n;
      n.level = 0;
      n.input = static_cast<int>(i);
      n.label = inputs[i];
      value_memo_[inputs[i]] = add(std::move(n));
    }
  }

  std::vector<BNode> nodes;
  std::vector<int> outputs;
  int top = 0;

  int level(int id) const { return nodes[id].level; }

  /// Node computing e at its natural level.
  int value(const ExprPtr& e) {
    const std::string key = to_string(e);
    if (auto it = value_memo_.find(key); it != value_memo_.end()) return it->second;
    if (e->kind == ExprKind::Variable)
      throw InvalidArgument("formula uses undeclared variable '" + e->name + "'");
    if (is_const(e)) throw InvalidArgument("internal: constant subexpression reached layout");
    BNode n;
    n.label = key;
    if (is_mult_value(e)) {
      const auto [k, prod] = split_scale(e);
      n.mult = true;
      int need = 1;
      for (const auto& f : prod->children) need = std::max(need, subnode_need(f));
      n.level = need;
      for (const auto& f : prod->children) n.subs.push_back(make_sub(f, need));
      for (auto& t : n.subs.front().terms) {
        t.c *= k;
        t.d *= k;
      }
    } else {
      n.level = subnode_need(e);
      n.subs.push_back(make_sub(e, n.level));
    }
    const int id = add(std::move(n));
    value_memo_[key] = id;
    return id;
  }

  /// Lowest level a subnode computing e can sit at.
  int subnode_need(const ExprPtr& e) {
    double offset;
    const auto terms = subnode_terms(e, offset);
    std::map<std::string, int> count;
    int need = 1;
    for (const auto& t : terms) {
      const int src = value(t.inner);
      const int c = ++count[to_string(t.inner)];
      // A second edge from the same source into one subnode must come
      // through a separate identity copy, one level up.
      need = std::max(need, level(src) + (c > 1 ? 2 : 1));
    }
    return need;
  }

  BSub make_sub(const ExprPtr& e, int owner_level) {
    double offset;
    const auto terms = subnode_terms(e, offset);
    std::map<std::string, int> count;
    BSub sub;
    for (const auto& t : terms) {
      const std::string key = to_string(t.inner);
      const int copy = count[key]++;
      const int src = lift(value(t.inner), key, owner_level - 1, copy);
      sub.terms.push_back(BTerm{src, t.prim, t.a, t.b, t.scale, 0.0});
    }
    if (!sub.terms.empty()) sub.terms.front().d += offset;
    return sub;
  }

  /// Identity-chain copy of node `id` at `target` level.
  int lift(int id, const std::string& key, int target, int copy) {
    if (copy == 0 && level(id) == target) return id;
    if (level(id) > target - (copy > 0 ? 1 : 0))
      throw InvalidArgument("internal: cannot lift node below its level");
    const auto mkey = std::make_tuple(key, target, copy);
    if (auto it = chain_memo_.find(mkey); it != chain_memo_.end()) return it->second;
    BNode n;
    n.level = target;
    n.label = key;
    BSub sub;
    sub.terms.push_back(BTerm{lift(id, key, target - 1, 0), Prim::X, 1.0, 0.0, 1.0, 0.0});
    n.subs.push_back(std::move(sub));
    const int nid = add(std::move(n));
    chain_memo_[mkey] = nid;
    return nid;
  }

  void compile_outputs(const std::vector<ExprPtr>& roots) {
    // Roots that are products or bare variables get a wrapping add node.
    std::vector<int> root_nodes(roots.size(), -1);
    int L = 1;
    for (std::size_t o = 0; o < roots.size(); ++o) {
      const ExprPtr& e = roots[o];
      if (is_const(e)) continue;
      int r = value(e);
      if (nodes[r].mult || nodes[r].input >= 0) {
        BNode n;
        n.level = level(r) + 1;
        n.label = to_string(e);
        BSub sub;
        sub.terms.push_back(BTerm{r, Prim::X, 1.0, 0.0, 1.0, 0.0});
        n.subs.push_back(std::move(sub));
        r = add(std::move(n));
      }
      root_nodes[o] = r;
      L = std::max(L, level(r));
    }
    // Two outputs sharing a top-level node need one more layer.
    for (std::size_t o = 0; o < roots.size(); ++o)
      for (std::size_t p = o + 1; p < roots.size(); ++p)
        if (root_nodes[o] >= 0 && root_nodes[o] == root_nodes[p] && level(root_nodes[o]) == L)
          L += 1;
    top = L;
    for (std::size_t o = 0; o < roots.size(); ++o) {
      const int r = root_nodes[o];
      const bool reused =
          r >= 0 && std::find(outputs.begin(), outputs.end(), r) != outputs.end();
      if (r >= 0 && level(r) == L && !reused) {
        outputs.push_back(r);
        continue;
      }
      BNode n;
      n.level = L;
      BSub sub;
      if (r < 0) {
        n.label = to_string(roots[o]);
        const int src = lift(0, inputs_.front(), L - 1, 0);
        sub.terms.push_back(BTerm{src, Prim::X, 1.0, 0.0, 0.0, roots[o]->value});
      } else {
        n.label = nodes[r].label;
        sub.terms.push_back(
            BTerm{lift(r, nodes[r].label, L - 1, 0), Prim::X, 1.0, 0.0, 1.0, 0.0});
      }
      n.subs.push_back(std::move(sub));
      outputs.push_back(add(std::move(n)));
    }
    for (const auto& n : nodes)
      if (n.level >= L && std::find(outputs.begin(), outputs.end(),
                                    static_cast<int>(&n - nodes.data())) == outputs.end())
        throw InvalidArgument("internal: non-output node at the output layer");
  }

 private:
  int add(BNode n) {
    nodes.push_back(std::move(n));
    return static_cast<int>(nodes.size()) - 1;
  }

  const std::vector<std::string>& inputs_;
  std::map<std::string, int> value_memo_;
  std::map<std::tuple<std::string, int, int>, int> chain_memo_;
};

}  // namespace

WidthSpec CompilePlan::width() const {
  WidthSpec w;
  w.push_back(NodeSpec{static_cast<int>(input_names.size()), {}});
  for (std::size_t l = 1; l < layers.size(); ++l) {
    NodeSpec s;
    for (const auto& n : layers[l]) {
      if (n.mult)
        s.arities.push_back(static_cast<int>(n.subnodes.size()));
      else
        ++s.n_add;
    }
    w.push_back(std::move(s));
  }
  return w;
}

std::string CompilePlan::describe() const {
  std::ostringstream os;
  os << "width " << format_width(width()) << '\n';
  for (std::size_t l = 1; l < layers.size(); ++l) {
    os << "layer " << l << '\n';
    for (std::size_t i = 0; i < layers[l].size(); ++i) {
      const auto& n = layers[l][i];
      os << "  " << i << (n.mult ? " mult " : " add  ") << n.label << '\n';
    }
  }
  return os.str();
}

CompilePlan plan_compile(const std::vector<ExprPtr>& outputs,
                         const std::vector<std::string>& input_names) {
  if (outputs.empty()) throw InvalidArgument("nothing to compile");
  if (input_names.empty()) throw InvalidArgument("compile needs at least one input");
  std::vector<ExprPtr> roots;
  for (const auto& e : outputs) {
    for (const auto& v : free_variables(e))
      if (std::find(input_names.begin(), input_names.end(), v) == input_names.end())
        throw InvalidArgument("formula uses undeclared variable '" + v + "'");
    roots.push_back(canonicalize(e));
  }
  Builder b(input_names);
  b.compile_outputs(roots);
  const int L = b.top;

  // Position of every builder node inside its layer.
  std::vector<int> pos(b.nodes.size(), -1);
  CompilePlan plan;
  plan.input_names = input_names;
  plan.layers.resize(L + 1);
  std::vector<std::vector<int>> members(L + 1);
  for (std::size_t id = 0; id < b.nodes.size(); ++id) {
    const auto& n = b.nodes[id];
    if (n.input >= 0) pos[id] = n.input;
  }
  for (int l = 1; l <= L; ++l) {
    std::vector<int> adds, mults;
    if (l == L) {
      adds = b.outputs;
    } else {
      for (std::size_t id = 0; id < b.nodes.size(); ++id) {
        if (b.nodes[id].level != l) continue;
        (b.nodes[id].mult ? mults : adds).push_back(static_cast<int>(id));
      }
    }
    members[l] = adds;
    members[l].insert(members[l].end(), mults.begin(), mults.end());
    for (std::size_t k = 0; k < members[l].size(); ++k) pos[members[l][k]] = static_cast<int>(k);
  }
  for (int l = 1; l <= L; ++l) {
    for (int id : members[l]) {
      const BNode& n = b.nodes[id];
      PlanNode pn;
      pn.mult = n.mult;
      pn.label = n.label;
      for (const auto& s : n.subs) {
        PlanSubnode ps;
        for (const auto& t : s.terms) {
          if (b.nodes[t.src].level != l - 1 || pos[t.src] < 0)
            throw InvalidArgument("internal: term source on the wrong layer");
          ps.terms.push_back(PlanTerm{pos[t.src], t.prim, t.a, t.b, t.c, t.d});
        }
        pn.subnodes.push_back(std::move(ps));
      }
      plan.layers[l].push_back(std::move(pn));
    }
  }
  return plan;
}

MultKanModel compile_to_kan(const std::vector<ExprPtr>& outputs,
                            const std::vector<std::string>& input_names, int grid_intervals,
                            int order) {
  const CompilePlan plan = plan_compile(outputs, input_names);
  const Grid grid = Grid::uniform(-1.0, 1.0, grid_intervals, order);
  MultKanModel m;
  m.width = plan.width();
  m.input_names = input_names;
  for (std::size_t l = 1; l < plan.layers.size(); ++l) {
    KanLayer layer;
    layer.n_in = m.width[l - 1].n_nodes();
    layer.n_out = m.width[l].n_sub();
    layer.edges.assign(static_cast<std::size_t>(layer.n_in) * layer.n_out, zero_edge(grid));
    // Add nodes come first in both the node and the subnode order.
    int sub = 0;
    std::vector<std::pair<int, const PlanSubnode*>> subs;
    for (const auto& n : plan.layers[l])
      if (!n.mult) subs.emplace_back(sub++, &n.subnodes.front());
    for (const auto& n : plan.layers[l])
      if (n.mult)
        for (const auto& s : n.subnodes) subs.emplace_back(sub++, &s);
    for (const auto& [j, s] : subs) {
      for (const auto& t : s->terms) {
        EdgeFunction& e = layer.at(t.src, j);
        if (e.mask) throw InvalidArgument("internal: duplicate compiled edge");
        e = identity_edge(grid);
        e.sym = SymbolicPart{t.prim, t.a, t.b, t.c, t.d};
      }
    }
    m.layers.push_back(std::move(layer));
  }
  m.validate();
  return m;
}

MultKanModel compile_to_kan(const ExprPtr& tree, const std::vector<std::string>& input_names,
                            int grid_intervals, int order) {
  return compile_to_kan(std::vector<ExprPtr>{tree}, input_names, grid_intervals, order);
}

}  // namespace kan
