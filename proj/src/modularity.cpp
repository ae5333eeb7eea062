// SPDX-License-Identifier: Apache-2.0

#include "kan/modularity.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <random>
#include <sstream>

#include "kan/errors.hpp"

namespace kan {

void FunctionHandle::validate() const {
  if (n <= 0) throw InvalidArgument("function arity must be positive");
  if (!eval) throw InvalidArgument("function has no evaluator");
  if (static_cast<int>(box.size()) != n) throw InvalidArgument("domain box must have one range per variable");
  for (const auto& [lo, hi] : box)
    if (!(hi > lo)) throw InvalidArgument("degenerate domain box");
}

void TestConfig::validate() const {
  if (probes <= 0) throw InvalidArgument("probe count must be positive");
  if (!(h > 0.0)) throw InvalidArgument("finite-difference step must be positive");
  if (!(tau > 0.0 && tau < 1.0)) throw InvalidArgument("tau must lie in (0, 1)");
}

namespace {

using Compiled = std::function<double(const double*)>;

Compiled compile_expr(const ExprPtr& e, const std::map<std::string, int>& index) {
  switch (e->kind) {
    case ExprKind::Variable: {
      const auto it = index.find(e->name);
      if (it == index.end()) throw InvalidArgument("unbound variable " + e->name);
      const int k = it->second;
      return [k](const double* x) { return x[k]; };
    }
    case ExprKind::Constant: {
      const double v = e->value;
      return [v](const double*) { return v; };
    }
    case ExprKind::Unary: {
      // Reuse the reference evaluator for the function itself.
      Compiled arg = compile_expr(e->children[0], index);
      const ExprPtr probe = make_unary(e->name, make_var("u"));
      const std::vector<std::string> names{"u"};
      return [arg, probe, names](const double* x) {
        const double u = arg(x);
        return eval_expr(probe, names, std::span<const double>(&u, 1));
      };
    }
    case ExprKind::Sum:
    case ExprKind::Product: {
      std::vector<Compiled> kids;
      for (const auto& c : e->children) kids.push_back(compile_expr(c, index));
      if (e->kind == ExprKind::Sum)
        return [kids](const double* x) {
          double s = 0.0;
          for (const auto& k : kids) s += k(x);
          return s;
        };
      return [kids](const double* x) {
        double p = 1.0;
        for (const auto& k : kids) p *= k(x);
        return p;
      };
    }
    case ExprKind::Power: {
      Compiled base = compile_expr(e->children[0], index);
      const ExprPtr probe = make_power(make_var("u"), e->value);
      const std::vector<std::string> names{"u"};
      return [base, probe, names](const double* x) {
        const double u = base(x);
        return eval_expr(probe, names, std::span<const double>(&u, 1));
      };
    }
  }
  throw InvalidArgument("unknown expression node");
}

}  // namespace

FunctionHandle function_from_expr(const ExprPtr& e, const std::vector<std::string>& names,
                                  std::vector<std::pair<double, double>> box) {
  std::map<std::string, int> index;
  for (std::size_t k = 0; k < names.size(); ++k) index[names[k]] = static_cast<int>(k);
  if (box.size() == 1 && names.size() > 1) box.assign(names.size(), box.front());
  FunctionHandle f;
  f.n = static_cast<int>(names.size());
  Compiled c = compile_expr(e, index);
  f.eval = [c](std::span<const double> x) { return c(x.data()); };
  f.box = std::move(box);
  f.validate();
  return f;
}

FunctionHandle function_from_model(const MultKanModel& model, int output) {
  if (output < 0 || output >= model.num_outputs()) throw InvalidArgument("output index out of range");
  FunctionHandle f;
  f.n = model.num_inputs();
  f.box.assign(f.n, {-1.0, 1.0});
  for (int i = 0; i < f.n; ++i) {
    bool seen = false;
    for (int j = 0; j < model.layers[0].n_out; ++j) {
      const EdgeFunction& e = model.layers[0].at(i, j);
      if (!e.mask) continue;
      auto& [lo, hi] = f.box[i];
      lo = seen ? std::min(lo, e.spline.grid.lo()) : e.spline.grid.lo();
      hi = seen ? std::max(hi, e.spline.grid.hi()) : e.spline.grid.hi();
      seen = true;
    }
  }
  auto m = std::make_shared<MultKanModel>(model);
  m->cache.reset();
  f.eval = [m, output](std::span<const double> x) {
    Eigen::MatrixXd X(1, static_cast<Eigen::Index>(x.size()));
    for (std::size_t k = 0; k < x.size(); ++k) X(0, static_cast<Eigen::Index>(k)) = x[k];
    return evaluate(*m, X)(0, output);
  };
  return f;
}

Eigen::MatrixXd estimate_hessian(const FunctionHandle& f, std::span<const double> x,
                                 std::span<const double> h) {
  const int n = f.n;
  if (static_cast<int>(x.size()) != n || static_cast<int>(h.size()) != n)
    throw InvalidArgument("point and step sizes must match the function arity");
  for (int i = 0; i < n; ++i) {
    if (x[i] - 2.0 * h[i] < f.box[i].first || x[i] + 2.0 * h[i] > f.box[i].second)
      throw DomainError("Hessian stencil leaves the domain box in variable " + std::to_string(i));
  }
  std::vector<double> p(x.begin(), x.end());
  auto at = [&](int i, double si, int j, double sj) {
    p.assign(x.begin(), x.end());
    if (i >= 0) p[i] += si * h[i];
    if (j >= 0) p[j] += sj * h[j];
    return f(p);
  };
  Eigen::MatrixXd H(n, n);
  const double f0 = at(-1, 0, -1, 0);
  for (int i = 0; i < n; ++i) {
    H(i, i) = (at(i, 1, -1, 0) - 2.0 * f0 + at(i, -1, -1, 0)) / (h[i] * h[i]);
    for (int j = i + 1; j < n; ++j) {
      const double v = (at(i, 1, j, 1) - at(i, 1, j, -1) - at(i, -1, j, 1) + at(i, -1, j, -1)) /
                       (4.0 * h[i] * h[j]);
      H(i, j) = v;
      H(j, i) = v;
    }
  }
  return 0.5 * (H + H.transpose());
}

Eigen::MatrixXd estimate_hessian(const FunctionHandle& f, std::span<const double> x, double h) {
  std::vector<double> hv(f.n, h);
  return estimate_hessian(f, x, hv);
}

namespace {

struct SkipProbe {};

double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  const auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
  std::nth_element(v.begin(), mid, v.end());
  return *mid;
}

struct Probes {
  std::vector<std::vector<double>> points;
  std::vector<double> h, width;
};

/// Uniform points in the box shrunk by 5% per side.
Probes make_probes(const FunctionHandle& f, const TestConfig& cfg) {
  f.validate();
  cfg.validate();
  Probes p;
  std::mt19937_64 rng(cfg.seed);
  for (const auto& [lo, hi] : f.box) {
    p.width.push_back(hi - lo);
    p.h.push_back(cfg.h * (hi - lo));
  }
  for (int k = 0; k < cfg.probes; ++k) {
    std::vector<double> x(f.n);
    for (int i = 0; i < f.n; ++i) {
      const double lo = f.box[i].first + 0.05 * p.width[i];
      const double hi = f.box[i].second - 0.05 * p.width[i];
      x[i] = std::uniform_real_distribution<double>(lo, hi)(rng);
    }
    p.points.push_back(std::move(x));
  }
  return p;
}

double safe_eval(const FunctionHandle& f, std::span<const double> x) {
  try {
    const double v = f(x);
    if (!std::isfinite(v)) throw SkipProbe{};
    return v;
  } catch (const DomainError&) {
    throw SkipProbe{};
  } catch (const NonFiniteError&) {
    throw SkipProbe{};
  }
}

std::vector<double> partials(const FunctionHandle& f, std::vector<double> x,
                             const std::vector<int>& vars, const std::vector<double>& h) {
  std::vector<double> g;
  for (int v : vars) {
    const double x0 = x[v];
    x[v] = x0 + h[v];
    const double fp = safe_eval(f, x);
    x[v] = x0 - h[v];
    const double fm = safe_eval(f, x);
    x[v] = x0;
    g.push_back((fp - fm) / (2.0 * h[v]));
  }
  return g;
}

double norm(const std::vector<double>& v) {
  double s = 0.0;
  for (double a : v) s += a * a;
  return std::sqrt(s);
}

void check_vars(const FunctionHandle& f, const std::vector<int>& vars) {
  for (int v : vars)
    if (v < 0 || v >= f.n) throw InvalidArgument("variable index out of range");
}

}  // namespace

TestResult test_separability(const FunctionHandle& f, const std::vector<std::vector<int>>& groups,
                             SepMode mode, const TestConfig& cfg) {
  if (groups.size() < 2) throw InvalidArgument("separability needs at least two groups");
  std::vector<int> owner(f.n, -1);
  for (std::size_t g = 0; g < groups.size(); ++g) {
    check_vars(f, groups[g]);
    for (int v : groups[g]) {
      if (owner[v] != -1) throw InvalidArgument("groups overlap");
      owner[v] = static_cast<int>(g);
    }
  }
  const Probes pr = make_probes(f, cfg);

  double fscale = 0.0;
  if (mode == SepMode::Multiplicative) {
    std::vector<double> mags;
    for (const auto& x : pr.points) {
      try {
        mags.push_back(std::abs(safe_eval(f, x)));
      } catch (const SkipProbe&) {
      }
    }
    fscale = median(mags);
  }
  const double small = 1e-6 * fscale;
  FunctionHandle g = f;
  g.eval = [&](std::span<const double> x) {
    const double v = safe_eval(f, x);
    if (mode == SepMode::Additive) return v;
    if (!(std::abs(v) > small)) throw SkipProbe{};
    return std::log(std::abs(v));
  };

  TestResult r;
  double worst_cross = 0.0;
  std::vector<double> scales, values;
  for (const auto& x : pr.points) {
    Eigen::MatrixXd H;
    try {
      H = estimate_hessian(g, x, pr.h);
      values.push_back(std::abs(g(x)));
    } catch (const SkipProbe&) {
      ++r.skipped;
      continue;
    }
    // Width scaling makes entries invariant to rescaling a variable.
    double cross = 0.0, all = 0.0;
    for (int i = 0; i < f.n; ++i) {
      for (int j = 0; j < f.n; ++j) {
        const double v = std::abs(H(i, j)) * pr.width[i] * pr.width[j];
        all = std::max(all, v);
        if (i != j && owner[i] >= 0 && owner[j] >= 0 && owner[i] != owner[j])
          cross = std::max(cross, v);
      }
    }
    worst_cross = std::max(worst_cross, cross);
    scales.push_back(all);
    ++r.used;
  }
  if (r.used == 0) throw InconclusiveError("separability test: every probe point was skipped");
  const double floor = 1e-6 * (1.0 + median(values));
  r.score = worst_cross / std::max(median(scales), floor);
  r.passed = r.score < cfg.tau;
  return r;
}

TestResult test_general_separability(const FunctionHandle& f, const std::vector<int>& A,
                                     const std::vector<int>& B, const TestConfig& cfg) {
  if (A.empty() || B.empty()) throw InvalidArgument("general separability needs two non-empty groups");
  check_vars(f, A);
  check_vars(f, B);
  for (int a : A)
    if (std::find(B.begin(), B.end(), a) != B.end()) throw InvalidArgument("groups overlap");
  const Probes pr = make_probes(f, cfg);
  // Outer differences of the partial ratio use a wider step than the
  // partials themselves.
  std::vector<double> ho(pr.h.size());
  for (std::size_t k = 0; k < ho.size(); ++k) ho[k] = 10.0 * pr.h[k];
  std::vector<int> both = A;
  both.insert(both.end(), B.begin(), B.end());

  std::vector<double> gnorms;
  for (const auto& x : pr.points) {
    try {
      gnorms.push_back(norm(partials(f, x, both, pr.h)));
    } catch (const SkipProbe&) {
    }
  }
  const double gmin = 1e-3 * median(gnorms);

  TestResult r;
  double worst = 0.0;
  for (const auto& x : pr.points) {
    try {
      const auto g0 = partials(f, x, both, pr.h);
      double worst_here = 0.0;
      int pairs = 0;
      std::vector<double> p = x;
      // Every ratio of partials across the split must be separable.
      for (std::size_t ia = 0; ia < A.size(); ++ia) {
        for (std::size_t jb = A.size(); jb < both.size(); ++jb) {
          if (!(std::abs(g0[ia]) > gmin) || !(std::abs(g0[jb]) > gmin)) continue;
          const std::vector<int> pair{both[ia], both[jb]};
          auto log_ratio = [&](const std::vector<double>& q) {
            const auto g = partials(f, q, pair, pr.h);
            if (!(std::abs(g[0]) > gmin) || !(std::abs(g[1]) > gmin)) throw SkipProbe{};
            return std::log(std::abs(g[0] / g[1]));
          };
          try {
            double worst_pair = 0.0;
            for (int a : A) {
              for (int b : B) {
                auto at = [&](double sa, double sb) {
                  p = x;
                  p[a] += sa * ho[a];
                  p[b] += sb * ho[b];
                  return log_ratio(p);
                };
                const double c =
                    (at(1, 1) - at(1, -1) - at(-1, 1) + at(-1, -1)) / (4.0 * ho[a] * ho[b]);
                worst_pair = std::max(worst_pair, std::abs(c) * pr.width[a] * pr.width[b]);
              }
            }
            worst_here = std::max(worst_here, worst_pair);
            ++pairs;
          } catch (const SkipProbe&) {
          }
        }
      }
      if (pairs == 0) throw SkipProbe{};
      worst = std::max(worst, worst_here);
      ++r.used;
    } catch (const SkipProbe&) {
      ++r.skipped;
    }
  }
  if (r.used == 0)
    throw InconclusiveError("general separability test: partial derivatives vanish at every probe");
  // Ratios inside one group must not depend on the other group either, or
  // the cross ratios could factor with group-dependent pieces.
  for (const auto* g : {&A, &B}) {
    if (g->size() < 2) continue;
    try {
      worst = std::max(worst, test_symmetry(f, *g, cfg).score);
    } catch (const InconclusiveError&) {
    }
  }
  r.score = worst;
  r.passed = r.score < cfg.tau;
  return r;
}

TestResult test_general_separability(const FunctionHandle& f, int k, const TestConfig& cfg) {
  if (k < 1 || k >= f.n) throw InvalidArgument("split must satisfy 1 <= k < n");
  std::vector<int> A, B;
  for (int i = 0; i < f.n; ++i) (i < k ? A : B).push_back(i);
  return test_general_separability(f, A, B, cfg);
}

TestResult test_symmetry(const FunctionHandle& f, const std::vector<int>& S, const TestConfig& cfg) {
  check_vars(f, S);
  if (S.size() < 2) throw InvalidArgument("symmetry needs a subset of at least two variables");
  std::vector<bool> in(f.n, false);
  for (int v : S) in[v] = true;
  std::vector<int> Z;
  for (int i = 0; i < f.n; ++i)
    if (!in[i]) Z.push_back(i);
  const Probes pr = make_probes(f, cfg);
  TestResult r;
  if (Z.empty()) {
    r.passed = true;
    r.used = cfg.probes;
    return r;
  }
  std::vector<double> ho(pr.h.size());
  for (std::size_t k = 0; k < ho.size(); ++k) ho[k] = 10.0 * pr.h[k];

  std::vector<double> gnorms;
  for (const auto& x : pr.points) {
    try {
      gnorms.push_back(norm(partials(f, x, S, pr.h)));
    } catch (const SkipProbe&) {
    }
  }
  const double gmin = 1e-6 * median(gnorms);
  auto unit = [&](const std::vector<double>& p) {
    auto g = partials(f, p, S, pr.h);
    const double nn = norm(g);
    if (!(nn > gmin)) throw SkipProbe{};
    for (double& v : g) v /= nn;
    return g;
  };

  double worst = 0.0;
  for (const auto& x : pr.points) {
    try {
      double worst_here = 0.0;
      std::vector<double> p = x;
      for (int z : Z) {
        p = x;
        p[z] = x[z] + ho[z];
        const auto up = unit(p);
        p[z] = x[z] - ho[z];
        auto um = unit(p);
        double dot = 0.0;
        for (std::size_t k = 0; k < up.size(); ++k) dot += up[k] * um[k];
        if (dot < 0.0)
          for (double& v : um) v = -v;
        double diff = 0.0;
        for (std::size_t k = 0; k < up.size(); ++k) diff += (up[k] - um[k]) * (up[k] - um[k]);
        worst_here = std::max(worst_here, std::sqrt(diff) / (2.0 * ho[z]) * pr.width[z]);
      }
      worst = std::max(worst, worst_here);
      ++r.used;
    } catch (const SkipProbe&) {
      ++r.skipped;
    }
  }
  if (r.used == 0) throw InconclusiveError("symmetry test: gradient vanishes at every probe");
  r.score = worst;
  r.passed = r.score < cfg.tau;
  return r;
}

std::string_view group_kind_name(GroupKind k) {
  switch (k) {
    case GroupKind::Leaf: return "leaf";
    case GroupKind::Symmetry: return "symmetry";
    case GroupKind::GeneralizedSeparable: return "generalized-separable(add)";
    case GroupKind::SeparableAdd: return "separable(add)";
    case GroupKind::SeparableMul: return "separable(mul)";
  }
  return "?";
}

namespace {

bool passes(const std::function<TestResult()>& t) {
  try {
    return t().passed;
  } catch (const InconclusiveError&) {
    return false;
  }
}

void annotate(const FunctionHandle& f, ModularityNode& node, const TestConfig& cfg) {
  if (node.children.size() < 2) {
    node.kind = GroupKind::Leaf;
    return;
  }
  std::vector<std::vector<int>> groups;
  for (const auto& c : node.children) groups.push_back(c.vars);
  if (passes([&] { return test_separability(f, groups, SepMode::Additive, cfg); })) {
    node.kind = GroupKind::SeparableAdd;
    return;
  }
  if (passes([&] { return test_separability(f, groups, SepMode::Multiplicative, cfg); })) {
    node.kind = GroupKind::SeparableMul;
    return;
  }
  bool general = true;
  for (std::size_t c = 0; c < groups.size() && general; ++c) {
    std::vector<int> rest;
    for (std::size_t o = 0; o < groups.size(); ++o)
      if (o != c) rest.insert(rest.end(), groups[o].begin(), groups[o].end());
    general = passes([&] { return test_general_separability(f, groups[c], rest, cfg); });
    if (groups.size() == 2) break;
  }
  node.kind = general ? GroupKind::GeneralizedSeparable : GroupKind::Symmetry;
}

ModularityNode merge(std::vector<ModularityNode> parts) {
  ModularityNode n;
  for (const auto& p : parts) n.vars.insert(n.vars.end(), p.vars.begin(), p.vars.end());
  std::sort(n.vars.begin(), n.vars.end());
  std::sort(parts.begin(), parts.end(),
            [](const auto& a, const auto& b) { return a.vars.front() < b.vars.front(); });
  n.children = std::move(parts);
  return n;
}

/// All k-subsets of {0..n-1} in lexicographic order.
std::vector<std::vector<int>> combinations(int n, int k) {
  std::vector<std::vector<int>> out;
  std::vector<int> c(k);
  for (int i = 0; i < k; ++i) c[i] = i;
  while (true) {
    out.push_back(c);
    int i = k - 1;
    while (i >= 0 && c[i] == n - k + i) --i;
    if (i < 0) break;
    ++c[i];
    for (int j = i + 1; j < k; ++j) c[j] = c[j - 1] + 1;
  }
  return out;
}

}  // namespace

ModularityTree tree_convert(const FunctionHandle& f, const std::vector<std::string>& names,
                            const TestConfig& cfg) {
  f.validate();
  if (f.n < 2) throw InvalidArgument("tree conversion needs at least two variables");
  if (static_cast<int>(names.size()) != f.n) throw InvalidArgument("one name per variable required");
  std::vector<ModularityNode> units;
  for (int i = 0; i < f.n; ++i) {
    ModularityNode leaf;
    leaf.vars = {i};
    units.push_back(leaf);
  }
  constexpr int kExhaustiveUnits = 8;
  while (units.size() > 1) {
    const int m = static_cast<int>(units.size());
    bool merged = false;
    const int max_size = m <= kExhaustiveUnits ? m - 1 : std::min(3, m - 1);
    for (int s = 2; s <= max_size && !merged; ++s) {
      struct Cand {
        std::vector<int> members;
        double score;
      };
      std::vector<Cand> accepted;
      for (const auto& combo : combinations(m, s)) {
        std::vector<int> vars;
        for (int u : combo) vars.insert(vars.end(), units[u].vars.begin(), units[u].vars.end());
        std::sort(vars.begin(), vars.end());
        try {
          const TestResult t = test_symmetry(f, vars, cfg);
          if (t.passed) accepted.push_back({combo, t.score});
        } catch (const InconclusiveError&) {
        }
      }
      if (accepted.empty()) continue;
      std::stable_sort(accepted.begin(), accepted.end(),
                       [](const Cand& a, const Cand& b) { return a.score < b.score; });
      std::vector<bool> taken(m, false);
      std::vector<ModularityNode> next;
      for (const Cand& c : accepted) {
        bool free = true;
        for (int u : c.members) free = free && !taken[u];
        if (!free) continue;
        std::vector<ModularityNode> parts;
        for (int u : c.members) {
          taken[u] = true;
          parts.push_back(units[u]);
        }
        ModularityNode g = merge(std::move(parts));
        g.score = c.score;
        annotate(f, g, cfg);
        next.push_back(std::move(g));
      }
      for (int u = 0; u < m; ++u)
        if (!taken[u]) next.push_back(units[u]);
      std::sort(next.begin(), next.end(),
                [](const auto& a, const auto& b) { return a.vars.front() < b.vars.front(); });
      units = std::move(next);
      merged = true;
    }
    if (!merged) {
      ModularityNode root = merge(std::move(units));
      annotate(f, root, cfg);
      units.clear();
      units.push_back(std::move(root));
    }
  }
  ModularityTree tree;
  tree.root = std::move(units.front());
  tree.names = names;
  return tree;
}

namespace {

void print_nested(const ModularityNode& n, const std::vector<std::string>& names, std::ostream& os) {
  if (n.children.empty()) {
    for (std::size_t k = 0; k < n.vars.size(); ++k) os << (k ? "," : "") << names[n.vars[k]];
    return;
  }
  os << '(';
  for (std::size_t k = 0; k < n.children.size(); ++k) {
    if (k) os << ',';
    print_nested(n.children[k], names, os);
  }
  os << ')';
}

std::string var_list(const ModularityNode& n, const std::vector<std::string>& names) {
  std::string s;
  for (std::size_t k = 0; k < n.vars.size(); ++k) s += (k ? "," : "") + names[n.vars[k]];
  return s;
}

void print_box(const ModularityNode& n, const std::vector<std::string>& names, int depth,
               std::ostream& os) {
  os << std::string(2 * depth, ' ') << '[' << group_kind_name(n.kind) << "] {" << var_list(n, names)
     << "}\n";
  for (const auto& c : n.children) print_box(c, names, depth + 1, os);
}

int print_dot(const ModularityNode& n, const std::vector<std::string>& names, int& next,
              std::ostream& os) {
  const int id = next++;
  os << "  g" << id << " [label=\"" << var_list(n, names) << "\\n" << group_kind_name(n.kind)
     << "\"];\n";
  for (const auto& c : n.children) {
    const int cid = print_dot(c, names, next, os);
    os << "  g" << id << " -> g" << cid << ";\n";
  }
  return id;
}

}  // namespace

std::string ModularityTree::to_string() const {
  std::ostringstream os;
  print_nested(root, names, os);
  return os.str();
}

std::string ModularityTree::to_box() const {
  std::ostringstream os;
  print_box(root, names, 0, os);
  return os.str();
}

std::string ModularityTree::to_dot() const {
  std::ostringstream os;
  os << "digraph modularity {\n  node [shape=box];\n";
  int next = 0;
  print_dot(root, names, next, os);
  os << "}\n";
  return os.str();
}

}  // namespace kan
