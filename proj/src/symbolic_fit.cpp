// SPDX-License-Identifier: Apache-2.0

#include "kan/symbolic_fit.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <sstream>
#include <tuple>

namespace kan {

const std::vector<Prim>& default_library() {
  static const std::vector<Prim> lib = [] {
    std::vector<Prim> v;
    for (Prim p : all_primitives())
      if (p != Prim::Zero) v.push_back(p);
    return v;
  }();
  return lib;
}

namespace {

constexpr double kPoleBand = 1e-2;

bool outside_guard(Prim p, double u) {
  switch (p) {
    case Prim::Inv:
    case Prim::Inv2: return std::abs(u) >= kPoleBand;
    case Prim::Sqrt: return u >= 0.0;
    case Prim::InvSqrt:
    case Prim::Log: return u >= kPoleBand;
    case Prim::Asin: return std::abs(u) <= 1.0;
    case Prim::Tan: return std::abs(std::cos(u)) >= kPoleBand;
    default: return true;
  }
}

struct LinFit {
  double c = 0.0, d = 0.0, r2 = -std::numeric_limits<double>::infinity();
};

double r2_from(double sse, double sst) {
  if (sst <= 1e-300) return sse <= 1e-24 ? 1.0 : 0.0;
  return 1.0 - sse / sst;
}

/// Closed-form (c, d) for y ≈ c f + d; r2 on the given samples.
LinFit linear_fit(const std::vector<double>& f, const std::vector<double>& y) {
  LinFit r;
  const std::size_t n = f.size();
  if (n < 2) return r;
  double fm = 0.0, ym = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    fm += f[k];
    ym += y[k];
  }
  fm /= static_cast<double>(n);
  ym /= static_cast<double>(n);
  double sff = 0.0, sfy = 0.0, syy = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    const double df = f[k] - fm, dy = y[k] - ym;
    sff += df * df;
    sfy += df * dy;
    syy += dy * dy;
  }
  if (!std::isfinite(sff) || !std::isfinite(sfy)) return r;
  r.c = sff > 1e-300 ? sfy / sff : 0.0;
  r.d = ym - r.c * fm;
  double sse = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    const double e = y[k] - (r.c * f[k] + r.d);
    sse += e * e;
  }
  r.r2 = r2_from(sse, syy);
  if (!std::isfinite(r.r2)) r.r2 = -std::numeric_limits<double>::infinity();
  return r;
}

struct Searcher {
  Prim p;
  std::span<const double> xs, ys;
  double min_retained;
  mutable std::vector<double> f, y;

  LinFit eval(double a, double b) const {
    f.clear();
    y.clear();
    for (std::size_t k = 0; k < xs.size(); ++k) {
      const double u = a * xs[k] + b;
      if (!outside_guard(p, u)) continue;
      const double v = prim_eval(p, u, false);
      if (!std::isfinite(v)) continue;
      f.push_back(v);
      y.push_back(ys[k]);
    }
    if (static_cast<double>(f.size()) < min_retained * static_cast<double>(xs.size())) return {};
    return linear_fit(f, y);
  }
};

bool is_odd(Prim p) {
  switch (p) {
    case Prim::X:
    case Prim::X3:
    case Prim::Inv:
    case Prim::Sin:
    case Prim::Tan:
    case Prim::Tanh:
    case Prim::Asin:
    case Prim::Atan: return true;
    default: return false;
  }
}

bool is_even(Prim p) {
  switch (p) {
    case Prim::X2:
    case Prim::X4:
    case Prim::Inv2:
    case Prim::Cos:
    case Prim::Abs:
    case Prim::Gaussian: return true;
    default: return false;
  }
}

double wrap_angle(double b) {
  const double two_pi = 2.0 * std::numbers::pi;
  b = std::fmod(b, two_pi);
  if (b > std::numbers::pi) b -= two_pi;
  if (b <= -std::numbers::pi) b += two_pi;
  return b;
}

/// Canonical sign conventions: a > 0 where parity allows, and for the
/// periodic primitives c > 0 with the phase wrapped into (-pi, pi].
void normalize(SymbolicFitResult& r) {
  if (r.a < 0.0 && is_odd(r.prim)) {
    r.a = -r.a;
    r.b = -r.b;
    r.c = -r.c;
  } else if (r.a < 0.0 && is_even(r.prim)) {
    r.a = -r.a;
    r.b = -r.b;
  }
  if (r.prim == Prim::Sin || r.prim == Prim::Cos) {
    if (r.c < 0.0) {
      r.c = -r.c;
      r.b += std::numbers::pi;
    }
    r.b = wrap_angle(r.b);
  }
}

}  // namespace

double symbolic_r2(std::span<const double> xs, std::span<const double> ys, const SymbolicPart& s) {
  if (xs.size() != ys.size() || xs.empty()) throw InvalidArgument("sample size mismatch");
  double ym = 0.0;
  for (double y : ys) ym += y;
  ym /= static_cast<double>(ys.size());
  double sse = 0.0, sst = 0.0;
  for (std::size_t k = 0; k < xs.size(); ++k) {
    const double pred = s.c * prim_eval(s.prim, s.a * xs[k] + s.b, false) + s.d;
    const double e = ys[k] - pred;
    sse += e * e;
    sst += (ys[k] - ym) * (ys[k] - ym);
  }
  const double r2 = r2_from(sse, sst);
  return std::isfinite(r2) ? r2 : -std::numeric_limits<double>::infinity();
}

SymbolicFitResult fit_primitive(std::span<const double> xs, std::span<const double> ys, Prim p,
                                const FitOptions& opts) {
  if (xs.size() != ys.size()) throw InvalidArgument("sample size mismatch");
  if (xs.size() < 2) throw InvalidArgument("need at least two samples to fit");
  const auto [mn, mx] = std::minmax_element(xs.begin(), xs.end());
  const double lo = *mn, hi = *mx;
  if (!(hi - lo > 1e-12 * std::max(1.0, std::abs(hi)))) throw InvalidArgument("degenerate input range");
  const double center = 0.5 * (lo + hi), hw = 0.5 * (hi - lo);

  SymbolicFitResult out;
  out.prim = p;
  out.name = std::string(prim_name(p));
  out.complexity = prim_complexity(p);

  // (ap, bp) act on the input rescaled to [-1, 1].
  auto to_ab = [&](double ap, double bp) {
    return std::pair{ap / hw, bp - ap * center / hw};
  };

  if (p == Prim::X || p == Prim::Zero) {
    Searcher s{p, xs, ys, 0.0, {}, {}};
    const LinFit lf = s.eval(1.0, 0.0);
    out.a = 1.0;
    out.b = 0.0;
    out.c = p == Prim::Zero ? 0.0 : lf.c;
    out.d = p == Prim::Zero ? 0.0 : lf.d;
    if (p == Prim::Zero) {
      double ym = 0.0;
      for (double y : ys) ym += y;
      out.d = ym / static_cast<double>(ys.size());
    }
    out.r2 = symbolic_r2(xs, ys, {p, out.a, out.b, out.c, out.d});
    return out;
  }

  // Strided subsample for the coarse search.
  std::vector<double> sx, sy;
  const std::size_t n = xs.size();
  const std::size_t m = std::min<std::size_t>(n, std::max(2, opts.max_search_samples));
  for (std::size_t k = 0; k < m; ++k) {
    const std::size_t idx = k * n / m;
    sx.push_back(xs[idx]);
    sy.push_back(ys[idx]);
  }
  Searcher coarse{p, sx, sy, opts.min_retained, {}, {}};
  Searcher full{p, xs, ys, opts.min_retained, {}, {}};

  const int G = std::max(3, opts.grid_points);
  const double R = opts.search_range;
  const double spacing = 2.0 * R / (G - 1);
  double best_ap = 1.0, best_bp = 0.0, best = -std::numeric_limits<double>::infinity();
  for (int ia = 0; ia < G; ++ia) {
    const double ap = -R + spacing * ia;
    if (std::abs(ap) < 1e-12) continue;
    for (int ib = 0; ib < G; ++ib) {
      const double bp = -R + spacing * ib;
      const auto [a, b] = to_ab(ap, bp);
      const double r2 = coarse.eval(a, b).r2;
      if (r2 > best) {
        best = r2;
        best_ap = ap;
        best_bp = bp;
      }
    }
  }

  auto score = [&](double ap, double bp) {
    const auto [a, b] = to_ab(ap, bp);
    return full.eval(a, b).r2;
  };
  best = score(best_ap, best_bp);
  double step = spacing / 2.0;
  int halvings = 0;
  for (int it = 0; it < 20 * opts.refine_iters && halvings < opts.refine_iters; ++it) {
    bool moved = false;
    for (int dim = 0; dim < 2; ++dim) {
      for (double sgn : {1.0, -1.0}) {
        const double ap = best_ap + (dim == 0 ? sgn * step : 0.0);
        const double bp = best_bp + (dim == 1 ? sgn * step : 0.0);
        if (std::abs(ap) < 1e-12) continue;
        const double r2 = score(ap, bp);
        if (r2 > best) {
          best = r2;
          best_ap = ap;
          best_bp = bp;
          moved = true;
        }
      }
    }
    if (!moved) {
      step /= 2.0;
      ++halvings;
      if (step < 1e-12) break;
    }
  }

  const auto [a, b] = to_ab(best_ap, best_bp);
  const LinFit lf = full.eval(a, b);
  out.a = a;
  out.b = b;
  out.c = lf.c;
  out.d = lf.d;
  normalize(out);
  out.r2 = symbolic_r2(xs, ys, {p, out.a, out.b, out.c, out.d});
  return out;
}

std::vector<SymbolicFitResult> rank_fits(std::span<const double> xs, std::span<const double> ys,
                                         const FitOptions& opts) {
  const std::vector<Prim>& lib = opts.library.empty() ? default_library() : opts.library;
  std::vector<SymbolicFitResult> fits;
  fits.reserve(lib.size());
  for (Prim p : lib) fits.push_back(fit_primitive(xs, ys, p, opts));
  const double scale = std::pow(10.0, opts.r2_digits);
  auto key = [&](const SymbolicFitResult& r) {
    const double rounded = std::isfinite(r.r2) ? std::round(r.r2 * scale) : -1e300;
    return std::tuple(-rounded, r.complexity, r.name);
  };
  std::stable_sort(fits.begin(), fits.end(),
                   [&](const auto& u, const auto& v) { return key(u) < key(v); });
  if (opts.top_k > 0 && static_cast<int>(fits.size()) > opts.top_k) fits.resize(opts.top_k);
  return fits;
}

namespace {

void edge_samples(const MultKanModel& m, const EdgeId& id, std::vector<double>& xs,
                  std::vector<double>& ys) {
  if (id.layer < 0 || id.layer >= m.num_layers()) throw InvalidArgument("edge layer out of range");
  const KanLayer& layer = m.layers[id.layer];
  if (id.i < 0 || id.i >= layer.n_in || id.j < 0 || id.j >= layer.n_out)
    throw InvalidArgument("edge index out of range");
  if (!m.cache || m.cache->batch() == 0)
    throw InvalidArgument("edge has no cached samples; run a forward pass first");
  const ActivationCache& c = *m.cache;
  const auto e = static_cast<Eigen::Index>(id.i) * layer.n_out + id.j;
  const Eigen::Index B = c.batch();
  xs.resize(B);
  ys.resize(B);
  for (Eigen::Index k = 0; k < B; ++k) {
    xs[k] = c.nodes[id.layer](k, id.i);
    ys[k] = c.edge_out[id.layer](k, e);
  }
}

}  // namespace

std::vector<SymbolicFitResult> suggest_symbolic(const MultKanModel& model, const EdgeId& id,
                                                const FitOptions& opts) {
  std::vector<double> xs, ys;
  edge_samples(model, id, xs, ys);
  if (!model.edge(id).mask) throw InvalidArgument("edge is masked");
  return rank_fits(xs, ys, opts);
}

MultKanModel fix_symbolic(const MultKanModel& model, const EdgeId& id, const SymbolicPart& part,
                          bool freeze) {
  if (id.layer < 0 || id.layer >= model.num_layers()) throw InvalidArgument("edge layer out of range");
  const KanLayer& layer = model.layers[id.layer];
  if (id.i < 0 || id.i >= layer.n_in || id.j < 0 || id.j >= layer.n_out)
    throw InvalidArgument("edge index out of range");
  MultKanModel m = model;
  m.cache.reset();
  EdgeFunction& e = m.edge(id);
  e.mode = EdgeMode::Symbolic;
  e.mask = true;
  e.sym = part;
  if (freeze) e.frozen = true;
  return m;
}

MultKanModel fix_symbolic(const MultKanModel& model, const EdgeId& id, const std::string& name,
                          bool fit_affine, bool freeze) {
  const Prim p = prim_from_name(name);
  SymbolicPart part{p, 1.0, 0.0, 1.0, 0.0};
  if (fit_affine) {
    std::vector<double> xs, ys;
    edge_samples(model, id, xs, ys);
    const SymbolicFitResult r = fit_primitive(xs, ys, p);
    part = {p, r.a, r.b, r.c, r.d};
  }
  return fix_symbolic(model, id, part, freeze);
}

MultKanModel unfix_symbolic(const MultKanModel& model, const EdgeId& id) {
  if (id.layer < 0 || id.layer >= model.num_layers()) throw InvalidArgument("edge layer out of range");
  MultKanModel m = model;
  m.cache.reset();
  m.edge(id).mode = EdgeMode::Spline;
  return m;
}

std::size_t AutoSymbolicReport::resolved() const {
  return static_cast<std::size_t>(
      std::count_if(entries.begin(), entries.end(), [](const auto& e) { return e.resolved; }));
}

std::size_t AutoSymbolicReport::unresolved() const { return entries.size() - resolved(); }

std::string AutoSymbolicReport::to_text() const {
  std::ostringstream os;
  for (const auto& e : entries) {
    os << '(' << e.edge.layer << ',' << e.edge.i << ',' << e.edge.j << ") ";
    os << (e.resolved ? "fixed " : "unresolved ") << e.fit.name << " r2=" << e.fit.r2;
    if (e.resolved)
      os << " a=" << e.fit.a << " b=" << e.fit.b << " c=" << e.fit.c << " d=" << e.fit.d;
    os << '\n';
  }
  return os.str();
}

AutoSymbolicReport auto_symbolic(MultKanModel& model, const Eigen::MatrixXd& X, double r2_floor,
                                 const FitOptions& opts) {
  AutoSymbolicReport report;
  FitOptions o = opts;
  o.top_k = 1;
  for (int l = 0; l < model.num_layers(); ++l) {
    ActivationCache cache;
    evaluate_cached(model, X, cache);
    KanLayer& layer = model.layers[l];
    for (int i = 0; i < layer.n_in; ++i) {
      for (int j = 0; j < layer.n_out; ++j) {
        EdgeFunction& e = layer.at(i, j);
        if (!e.mask || !e.uses_spline()) continue;
        const auto col = static_cast<Eigen::Index>(i) * layer.n_out + j;
        std::vector<double> xs(cache.nodes[l].col(i).data(),
                               cache.nodes[l].col(i).data() + cache.batch());
        std::vector<double> ys(cache.edge_out[l].col(col).data(),
                               cache.edge_out[l].col(col).data() + cache.batch());
        AutoSymbolicEntry entry;
        entry.edge = {l, i, j};
        const auto fits = rank_fits(xs, ys, o);
        entry.fit = fits.front();
        entry.resolved = entry.fit.r2 >= r2_floor;
        if (entry.resolved) {
          e.mode = EdgeMode::Symbolic;
          e.sym = {entry.fit.prim, entry.fit.a, entry.fit.b, entry.fit.c, entry.fit.d};
        }
        report.entries.push_back(entry);
      }
    }
  }
  model.cache.reset();
  return report;
}

namespace {

ExprPtr prim_expr(Prim p, ExprPtr u) {
  switch (p) {
    case Prim::Zero: return make_const(0.0);
    case Prim::X: return u;
    case Prim::X2: return make_power(u, 2.0);
    case Prim::X3: return make_power(u, 3.0);
    case Prim::X4: return make_power(u, 4.0);
    case Prim::Inv: return make_power(u, -1.0);
    case Prim::Inv2: return make_power(u, -2.0);
    case Prim::InvSqrt: return make_power(u, -0.5);
    default: return make_unary(std::string(prim_name(p)), std::move(u));
  }
}

ExprPtr edge_expr(const SymbolicPart& s, const ExprPtr& x) {
  ExprPtr u = x;
  if (s.a != 1.0 || s.b != 0.0) u = make_sum({make_product({make_const(s.a), x}), make_const(s.b)});
  ExprPtr f = prim_expr(s.prim, u);
  return make_sum({make_product({make_const(s.c), f}), make_const(s.d)});
}

}  // namespace

std::vector<ExprPtr> compose_formula(const MultKanModel& m) {
  std::vector<EdgeId> offenders;
  for (int l = 0; l < m.num_layers(); ++l) {
    const KanLayer& layer = m.layers[l];
    for (int i = 0; i < layer.n_in; ++i)
      for (int j = 0; j < layer.n_out; ++j)
        if (layer.at(i, j).mask && layer.at(i, j).uses_spline()) offenders.push_back({l, i, j});
  }
  if (!offenders.empty()) {
    std::ostringstream os;
    os << "model is not fully symbolic; spline edges:";
    for (const auto& e : offenders) os << " (" << e.layer << ',' << e.i << ',' << e.j << ')';
    throw NotSymbolicError(os.str(), offenders);
  }
  std::vector<ExprPtr> nodes;
  for (int i = 0; i < m.num_inputs(); ++i) nodes.push_back(make_var(m.input_names[i]));
  for (int l = 0; l < m.num_layers(); ++l) {
    const KanLayer& layer = m.layers[l];
    std::vector<ExprPtr> subs(layer.n_out);
    for (int j = 0; j < layer.n_out; ++j) {
      std::vector<ExprPtr> terms;
      for (int i = 0; i < layer.n_in; ++i) {
        const EdgeFunction& e = layer.at(i, j);
        if (e.mask) terms.push_back(edge_expr(e.sym, nodes[i]));
      }
      subs[j] = canonicalize(terms.empty() ? make_const(0.0) : make_sum(std::move(terms)));
    }
    const NodeSpec& spec = m.width[l + 1];
    std::vector<ExprPtr> next;
    for (int k = 0; k < spec.n_nodes(); ++k) {
      const auto members = node_subnodes(spec, k);
      if (members.size() == 1 && k < spec.n_add) {
        next.push_back(subs[members.front()]);
      } else {
        std::vector<ExprPtr> factors;
        for (int j : members) factors.push_back(subs[j]);
        next.push_back(canonicalize(make_product(std::move(factors))));
      }
    }
    nodes = std::move(next);
  }
  return nodes;
}

namespace {

/// Max |formula - reference| over rows where the formula is defined; NaN
/// when no row evaluates.
double probe_error(const ExprPtr& e, const std::vector<std::string>& names, const Eigen::MatrixXd& X,
                   const Eigen::VectorXd& y) {
  double worst = 0.0;
  bool any = false;
  std::vector<double> row(X.cols());
  for (Eigen::Index r = 0; r < X.rows(); ++r) {
    for (Eigen::Index c = 0; c < X.cols(); ++c) row[c] = X(r, c);
    try {
      const double v = eval_expr(e, names, row);
      if (!std::isfinite(v)) continue;
      worst = std::max(worst, std::abs(v - y[r]));
      any = true;
    } catch (const DomainError&) {
    }
  }
  return any ? worst : std::numeric_limits<double>::quiet_NaN();
}

}  // namespace

std::vector<ExprPtr> extract_formula(const MultKanModel& model, const ExtractOptions& opts) {
  std::vector<ExprPtr> raw = compose_formula(model);
  Eigen::MatrixXd X;
  if (opts.inputs) {
    X = *opts.inputs;
    if (X.cols() != model.num_inputs()) throw InvalidArgument("reference inputs have wrong width");
  } else {
    const int n = model.num_inputs();
    std::vector<double> lo(n, -1.0), hi(n, 1.0);
    for (int i = 0; i < n; ++i) {
      bool seen = false;
      for (int j = 0; j < model.layers[0].n_out; ++j) {
        const EdgeFunction& e = model.layers[0].at(i, j);
        if (!e.mask) continue;
        const double a = e.spline.grid.lo(), b = e.spline.grid.hi();
        lo[i] = seen ? std::min(lo[i], a) : a;
        hi[i] = seen ? std::max(hi[i], b) : b;
        seen = true;
      }
    }
    std::mt19937_64 rng(opts.seed);
    X.resize(std::max(1, opts.probes), n);
    for (Eigen::Index r = 0; r < X.rows(); ++r)
      for (int c = 0; c < n; ++c) X(r, c) = std::uniform_real_distribution<double>(lo[c], hi[c])(rng);
  }
  Eigen::MatrixXd Y;
  if (opts.labels) {
    Y = *opts.labels;
    if (Y.rows() != X.rows() || Y.cols() != model.num_outputs())
      throw InvalidArgument("reference labels do not match inputs");
  } else {
    Y = evaluate(model, X);
  }
  std::vector<ExprPtr> out;
  for (std::size_t k = 0; k < raw.size(); ++k) {
    const ExprPtr exact = canonicalize(raw[k]);
    const Eigen::VectorXd y = Y.col(static_cast<Eigen::Index>(k));
    const double err_u = probe_error(exact, model.input_names, X, y);
    ExprPtr chosen = exact;
    if (std::isfinite(err_u)) {
      for (int digits = std::max(0, opts.digits); digits <= 15; ++digits) {
        ExprPtr r = canonicalize(
            round_constants(canonicalize(round_constants(exact, digits)), digits));
        const double err_r = probe_error(r, model.input_names, X, y);
        if (std::isfinite(err_r) && err_r <= 2.0 * err_u + 1e-12) {
          chosen = r;
          break;
        }
      }
    }
    out.push_back(chosen);
  }
  return out;
}

}  // namespace kan
