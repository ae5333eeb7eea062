// SPDX-License-Identifier: Apache-2.0

#include "kan/model.hpp"

#include <json.hpp>

#include <algorithm>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include "kan/errors.hpp"
#include "kan/kernel.hpp"

namespace kan {

std::string_view edge_mode_name(EdgeMode m) {
  switch (m) {
    case EdgeMode::Spline: return "spline";
    case EdgeMode::Symbolic: return "symbolic";
    case EdgeMode::Both: return "both";
  }
  return "spline";
}

EdgeMode edge_mode_from_name(std::string_view name) {
  if (name == "spline") return EdgeMode::Spline;
  if (name == "symbolic") return EdgeMode::Symbolic;
  if (name == "both") return EdgeMode::Both;
  throw InvalidArgument("unknown edge mode '" + std::string(name) + "'");
}

int NodeSpec::n_sub() const {
  return n_add + std::accumulate(arities.begin(), arities.end(), 0);
}

int NodeSpec::mult_offset(int m) const {
  int off = n_add;
  for (int q = 0; q < m; ++q) off += arities[q];
  return off;
}

std::vector<int> node_subnodes(const NodeSpec& spec, int node) {
  if (node < 0 || node >= spec.n_nodes()) throw InvalidArgument("node index out of range");
  if (node < spec.n_add) return {node};
  const int m = node - spec.n_add;
  std::vector<int> out(spec.arities[m]);
  std::iota(out.begin(), out.end(), spec.mult_offset(m));
  return out;
}

int subnode_owner(const NodeSpec& spec, int sub) {
  if (sub < spec.n_add) return sub;
  int off = spec.n_add;
  for (int m = 0; m < spec.n_mult(); ++m) {
    if (sub < off + spec.arities[m]) return spec.n_add + m;
    off += spec.arities[m];
  }
  throw InvalidArgument("subnode index out of range");
}

namespace {

void validate_width(const WidthSpec& w) {
  if (w.size() < 2) throw InvalidArgument("width spec needs at least two node layers");
  if (w.front().n_mult() != 0) throw InvalidArgument("input layer cannot have mult nodes");
  for (const auto& s : w) {
    if (s.n_add < 0) throw InvalidArgument("negative add count in width spec");
    if (s.n_nodes() < 1) throw InvalidArgument("every node layer needs at least one node");
    for (int a : s.arities)
      if (a < 2) throw InvalidArgument("mult node arity must be >= 2");
  }
}

}  // namespace

WidthSpec parse_width(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw InvalidArgument("malformed width spec '" + text + "': " + e.what());
  }
  if (!j.is_array() || j.size() < 2)
    throw InvalidArgument("width spec must list at least two node layers");
  WidthSpec w;
  for (const auto& item : j) {
    NodeSpec s;
    if (!item.is_number_integer() && item.is_array() && (item.size() == 2 || item.size() == 3) &&
        (!item[0].is_number_integer() || !item[1].is_number_integer() ||
         (item.size() == 3 && !item[2].is_array())))
      throw InvalidArgument("malformed width entry " + item.dump());
    if (item.is_number_integer()) {
      s.n_add = item.get<int>();
    } else if (item.is_array() && (item.size() == 2 || item.size() == 3)) {
      s.n_add = item[0].get<int>();
      const int n_mult = item[1].get<int>();
      if (n_mult < 0) throw InvalidArgument("negative mult count in width spec");
      if (item.size() == 3) {
        for (const auto& a : item[2]) {
          if (!a.is_number_integer()) throw InvalidArgument("malformed arity list " + item.dump());
          s.arities.push_back(a.get<int>());
        }
        if (static_cast<int>(s.arities.size()) != n_mult)
          throw InvalidArgument("arity list length must equal the mult count");
      } else {
        s.arities.assign(n_mult, 2);
      }
    } else {
      throw InvalidArgument("malformed width entry " + item.dump());
    }
    w.push_back(std::move(s));
  }
  validate_width(w);
  return w;
}

std::string format_width(const WidthSpec& w) {
  std::ostringstream os;
  os << '[';
  for (std::size_t l = 0; l < w.size(); ++l) {
    if (l) os << ',';
    const auto& s = w[l];
    os << '[' << s.n_add << ',' << s.n_mult();
    if (std::any_of(s.arities.begin(), s.arities.end(), [](int a) { return a != 2; })) {
      os << ",[";
      for (int m = 0; m < s.n_mult(); ++m) os << (m ? "," : "") << s.arities[m];
      os << ']';
    }
    os << ']';
  }
  os << ']';
  return os.str();
}

void MultKanModel::validate() const {
  validate_width(width);
  if (layers.size() + 1 != width.size())
    throw InvalidArgument("layer count does not match width spec");
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const auto& layer = layers[l];
    if (layer.n_in != width[l].n_nodes() || layer.n_out != width[l + 1].n_sub())
      throw InvalidArgument("layer " + std::to_string(l) + " shape mismatch");
    if (layer.edges.size() != static_cast<std::size_t>(layer.n_in) * layer.n_out)
      throw InvalidArgument("layer " + std::to_string(l) + " edge count mismatch");
  }
  if (static_cast<int>(input_names.size()) != num_inputs())
    throw InvalidArgument("input name count does not match input width");
}

std::vector<std::string> default_input_names(int n) {
  std::vector<std::string> names;
  for (int i = 1; i <= n; ++i) names.push_back("x" + std::to_string(i));
  return names;
}

MultKanModel init_model(const WidthSpec& width, const InitOptions& opts) {
  validate_width(width);
  if (opts.grid_intervals < 1 || opts.order < 1)
    throw InvalidArgument("grid intervals and order must be >= 1");
  std::mt19937_64 rng(opts.seed);
  MultKanModel m;
  m.width = width;
  m.use_base = opts.use_base;
  m.input_names = default_input_names(width.front().n_nodes());
  const Grid grid = Grid::uniform(opts.lo, opts.hi, opts.grid_intervals, opts.order);
  for (std::size_t l = 0; l + 1 < width.size(); ++l) {
    KanLayer layer;
    layer.n_in = width[l].n_nodes();
    layer.n_out = width[l + 1].n_sub();
    const double sd = opts.noise / std::sqrt(static_cast<double>(layer.n_in) * grid.num_basis());
    std::normal_distribution<double> noise(0.0, sd);
    layer.edges.reserve(static_cast<std::size_t>(layer.n_in) * layer.n_out);
    for (int i = 0; i < layer.n_in; ++i) {
      for (int j = 0; j < layer.n_out; ++j) {
        EdgeFunction e;
        e.spline = SplineCurve(grid);
        for (double& c : e.spline.coef) c = noise(rng);
        e.base_scale = opts.use_base ? 1.0 : 0.0;
        layer.edges.push_back(std::move(e));
      }
    }
    if (opts.sparse && layer.n_in > 1) {
      const int keep = std::min(layer.n_in, 2);
      for (int j = 0; j < layer.n_out; ++j) {
        std::vector<int> order(layer.n_in);
        std::iota(order.begin(), order.end(), 0);
        std::shuffle(order.begin(), order.end(), rng);
        for (int r = keep; r < layer.n_in; ++r) layer.at(order[r], j).mask = false;
      }
    }
    m.layers.push_back(std::move(layer));
  }
  return m;
}

namespace {

void check_input(const MultKanModel& m, const Eigen::MatrixXd& X) {
  if (X.cols() != m.num_inputs())
    throw InvalidArgument("input has " + std::to_string(X.cols()) + " columns, model expects " +
                          std::to_string(m.num_inputs()));
}

void prepare_cache(const MultKanModel& m, Eigen::Index n, ActivationCache& c) {
  const int L = m.num_layers();
  c.nodes.resize(L + 1);
  c.edge_out.resize(L);
  c.subnodes.resize(L);
  for (int l = 0; l <= L; ++l) c.nodes[l].resize(n, m.width[l].n_nodes());
  for (int l = 0; l < L; ++l) {
    c.edge_out[l].resize(n, static_cast<Eigen::Index>(m.layers[l].edges.size()));
    c.subnodes[l].resize(n, m.layers[l].n_out);
  }
}

Eigen::MatrixXd run(const MultKanModel& m, const Eigen::MatrixXd& X,
                    ActivationCache* cache, OutOfDomain policy) {
  check_input(m, X);
  const Eigen::Index n = X.rows();
  const int L = m.num_layers();
  Eigen::MatrixXd out(n, m.num_outputs());
  if (cache) prepare_cache(m, n, *cache);
  kernel::SampleTape<double> tape;
  tape.resize(m);
  std::vector<double> x(m.num_inputs());
  for (Eigen::Index s = 0; s < n; ++s) {
    for (int i = 0; i < m.num_inputs(); ++i) x[i] = X(s, i);
    kernel::forward_sample(m, x.data(), tape, policy);
    for (int i = 0; i < m.num_outputs(); ++i) out(s, i) = tape.nodes[L][i];
    if (!cache) continue;
    for (int l = 0; l <= L; ++l)
      for (std::size_t i = 0; i < tape.nodes[l].size(); ++i)
        cache->nodes[l](s, static_cast<Eigen::Index>(i)) = tape.nodes[l][i];
    for (int l = 0; l < L; ++l) {
      for (std::size_t e = 0; e < tape.edges[l].size(); ++e)
        cache->edge_out[l](s, static_cast<Eigen::Index>(e)) = tape.edges[l][e].y;
      for (std::size_t j = 0; j < tape.subs[l].size(); ++j)
        cache->subnodes[l](s, static_cast<Eigen::Index>(j)) = tape.subs[l][j];
    }
  }
  return out;
}

}  // namespace

Eigen::MatrixXd forward(MultKanModel& model, const Eigen::MatrixXd& X,
                        bool keep_cache, OutOfDomain policy) {
  if (!keep_cache) return run(model, X, nullptr, policy);
  ActivationCache cache;
  Eigen::MatrixXd out = run(model, X, &cache, policy);
  model.cache = std::move(cache);
  return out;
}

Eigen::MatrixXd evaluate(const MultKanModel& model, const Eigen::MatrixXd& X,
                         OutOfDomain policy) {
  return run(model, X, nullptr, policy);
}

Eigen::MatrixXd evaluate_cached(const MultKanModel& model, const Eigen::MatrixXd& X,
                                ActivationCache& cache, OutOfDomain policy) {
  return run(model, X, &cache, policy);
}

double eval_edge(const EdgeFunction& e, double x, bool use_base, OutOfDomain policy) {
  kernel::EdgeRec<double> rec;
  kernel::eval_edge_rec(e, use_base, x, policy, rec);
  return rec.y;
}

EdgeFunction zero_edge(const Grid& grid) {
  EdgeFunction e;
  e.spline = SplineCurve(grid);
  e.base_scale = 0.0;
  e.mask = false;
  return e;
}

EdgeFunction identity_edge(const Grid& grid) {
  EdgeFunction e;
  e.spline = SplineCurve(grid);
  e.base_scale = 0.0;
  e.mode = EdgeMode::Symbolic;
  e.sym = SymbolicPart{Prim::X, 1.0, 0.0, 1.0, 0.0};
  return e;
}

namespace {

Grid default_grid(const MultKanModel& m) {
  for (const auto& layer : m.layers)
    if (!layer.edges.empty()) {
      const Grid& g = layer.edges.front().spline.grid;
      return Grid::uniform(-1.0, 1.0, g.num_intervals(), g.order());
    }
  return Grid::uniform(-1.0, 1.0, 5, 3);
}

EdgeFunction fresh_zero(const Grid& g) {
  EdgeFunction e = zero_edge(g);
  e.fresh = true;
  return e;
}

/// Rebuilds `layer` with rows/columns remapped: new_rows[i] / new_cols[j]
/// give the old index or -1 for a new zero edge.
KanLayer remap_layer(const KanLayer& old, const std::vector<int>& rows,
                     const std::vector<int>& cols, const Grid& g) {
  KanLayer out;
  out.n_in = static_cast<int>(rows.size());
  out.n_out = static_cast<int>(cols.size());
  out.edges.reserve(rows.size() * cols.size());
  for (int r : rows)
    for (int c : cols)
      out.edges.push_back(r >= 0 && c >= 0 ? old.at(r, c) : fresh_zero(g));
  return out;
}

std::vector<int> iota_vec(int n) {
  std::vector<int> v(n);
  std::iota(v.begin(), v.end(), 0);
  return v;
}

}  // namespace

MultKanModel expand(const MultKanModel& model, ExpandMode mode, int layer_id,
                    int extra_adds, int extra_mults) {
  MultKanModel m = model;
  m.cache.reset();
  const int L = model.num_layers();
  const Grid g = default_grid(model);
  if (mode == ExpandMode::Width) {
    if (layer_id < 1 || layer_id >= L)
      throw InvalidArgument("expand width needs a hidden layer id in [1, " +
                            std::to_string(L - 1) + "]");
    if (extra_adds < 0 || extra_mults < 0) throw InvalidArgument("negative expansion count");
    const NodeSpec& old = model.width[layer_id];
    NodeSpec spec = old;
    spec.n_add += extra_adds;
    spec.arities.insert(spec.arities.end(), extra_mults, 2);

    // Node order: old adds, new adds, old mults, new mults.
    std::vector<int> rows;
    for (int i = 0; i < old.n_add; ++i) rows.push_back(i);
    rows.insert(rows.end(), extra_adds, -1);
    for (int q = 0; q < old.n_mult(); ++q) rows.push_back(old.n_add + q);
    rows.insert(rows.end(), extra_mults, -1);

    std::vector<int> cols;
    for (int i = 0; i < old.n_add; ++i) cols.push_back(i);
    cols.insert(cols.end(), extra_adds, -1);
    for (int s = old.n_add; s < old.n_sub(); ++s) cols.push_back(s);
    cols.insert(cols.end(), 2 * extra_mults, -1);

    const KanLayer& in_layer = model.layers[layer_id - 1];
    m.layers[layer_id - 1] = remap_layer(in_layer, iota_vec(in_layer.n_in), cols, g);
    const KanLayer& out_layer = model.layers[layer_id];
    m.layers[layer_id] = remap_layer(out_layer, rows, iota_vec(out_layer.n_out), g);
    m.width[layer_id] = spec;
  } else {
    if (layer_id < 0 || layer_id > L)
      throw InvalidArgument("expand depth needs a layer id in [0, " + std::to_string(L) + "]");
    const int n = model.width[layer_id].n_nodes();
    KanLayer id_layer;
    id_layer.n_in = n;
    id_layer.n_out = n;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        EdgeFunction e = i == j ? identity_edge(g) : zero_edge(g);
        e.fresh = true;
        id_layer.edges.push_back(std::move(e));
      }
    m.layers.insert(m.layers.begin() + layer_id, std::move(id_layer));
    // The inserted KAN layer has one subnode per node, so the new node layer
    // holds add nodes only.
    m.width.insert(m.width.begin() + layer_id + 1, NodeSpec{n, {}});
  }
  m.validate();
  return m;
}

MultKanModel perturb(const MultKanModel& model, double magnitude, PerturbScope scope,
                     std::uint64_t seed) {
  if (magnitude < 0.0) throw InvalidArgument("perturb magnitude must be >= 0");
  MultKanModel m = model;
  m.cache.reset();
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, 1.0);
  for (auto& layer : m.layers) {
    for (auto& e : layer.edges) {
      const bool in_scope = scope == PerturbScope::All ? !e.frozen : e.fresh;
      if (!in_scope) continue;
      if (!e.mask || e.mode == EdgeMode::Symbolic) {
        std::fill(e.spline.coef.begin(), e.spline.coef.end(), 0.0);
        e.base_scale = 0.0;
        e.spline_scale = 1.0;
        if (e.mode == EdgeMode::Symbolic) e.mode = EdgeMode::Both;
        e.mask = true;
      }
      for (double& c : e.spline.coef) c += magnitude * noise(rng);
      e.fresh = false;
    }
  }
  return m;
}

std::vector<std::vector<int>> parse_module_spec(const std::string& spec) {
  std::vector<std::vector<int>> groups;
  std::size_t pos = 0;
  auto skip_ws = [&] {
    while (pos < spec.size() && std::isspace(static_cast<unsigned char>(spec[pos]))) ++pos;
  };
  while (true) {
    skip_ws();
    if (pos >= spec.size() || spec[pos] != '[') throw ParseError("expected '['", pos);
    ++pos;
    std::vector<int> group;
    skip_ws();
    if (pos < spec.size() && spec[pos] == ']') throw ParseError("empty module group", pos);
    while (true) {
      skip_ws();
      const std::size_t start = pos;
      while (pos < spec.size() && std::isdigit(static_cast<unsigned char>(spec[pos]))) ++pos;
      if (start == pos) throw ParseError("expected node index", pos);
      group.push_back(std::stoi(spec.substr(start, pos - start)));
      skip_ws();
      if (pos < spec.size() && spec[pos] == ',') {
        ++pos;
        continue;
      }
      if (pos < spec.size() && spec[pos] == ']') {
        ++pos;
        break;
      }
      throw ParseError("expected ',' or ']'", pos);
    }
    groups.push_back(std::move(group));
    skip_ws();
    if (pos >= spec.size()) break;
    if (spec.compare(pos, 2, "->") != 0) throw ParseError("expected '->'", pos);
    pos += 2;
  }
  if (groups.size() < 2) throw ParseError("module spec needs at least two groups", spec.size());
  return groups;
}

MultKanModel apply_module_constraint(const MultKanModel& model, int start_layer,
                                     const std::string& spec) {
  const auto groups = parse_module_spec(spec);
  const int L = model.num_layers();
  if (start_layer < 0 || start_layer >= L)
    throw InvalidArgument("module start layer out of range");
  const int steps = static_cast<int>(groups.size()) / 2;
  if (start_layer + steps > L) throw InvalidArgument("module spec runs past the last layer");
  // Validate everything before touching the model.
  for (std::size_t g = 0; g < groups.size(); ++g) {
    const int l = start_layer + static_cast<int>(g / 2);
    const int limit = g % 2 == 0 ? model.width[l].n_nodes() : model.layers[l].n_out;
    for (int idx : groups[g])
      if (idx < 0 || idx >= limit)
        throw InvalidArgument("module index " + std::to_string(idx) + " out of range in group " +
                              std::to_string(g));
  }
  MultKanModel m = model;
  m.cache.reset();
  for (int t = 0; t < steps; ++t) {
    const int l = start_layer + t;
    const std::set<int> nodes(groups[2 * t].begin(), groups[2 * t].end());
    const std::set<int> subs(groups[2 * t + 1].begin(), groups[2 * t + 1].end());
    KanLayer& layer = m.layers[l];
    for (int i = 0; i < layer.n_in; ++i)
      for (int j = 0; j < layer.n_out; ++j) {
        if (nodes.count(i) != subs.count(j)) {
          EdgeFunction& e = layer.at(i, j);
          e.mask = false;
          e.frozen = true;
        }
      }
  }
  return m;
}

void remove_hidden_node(MultKanModel& m, int layer, int node) {
  if (layer < 1 || layer >= m.num_layers()) throw InvalidArgument("not a hidden layer");
  NodeSpec& spec = m.width[layer];
  if (spec.n_nodes() <= 1) throw InvalidArgument("cannot remove the last node of a layer");
  const std::vector<int> subs = node_subnodes(spec, node);
  std::vector<int> rows;
  for (int i = 0; i < m.layers[layer].n_in; ++i)
    if (i != node) rows.push_back(i);
  std::vector<int> cols;
  for (int j = 0; j < m.layers[layer - 1].n_out; ++j)
    if (std::find(subs.begin(), subs.end(), j) == subs.end()) cols.push_back(j);
  const Grid g = default_grid(m);
  m.layers[layer] = remap_layer(m.layers[layer], rows, iota_vec(m.layers[layer].n_out), g);
  m.layers[layer - 1] =
      remap_layer(m.layers[layer - 1], iota_vec(m.layers[layer - 1].n_in), cols, g);
  if (node < spec.n_add)
    --spec.n_add;
  else
    spec.arities.erase(spec.arities.begin() + (node - spec.n_add));
  m.cache.reset();
}

void remove_input(MultKanModel& m, int input) {
  if (input < 0 || input >= m.num_inputs()) throw InvalidArgument("input index out of range");
  if (m.num_inputs() <= 1) throw InvalidArgument("cannot remove the last input");
  std::vector<int> rows;
  for (int i = 0; i < m.num_inputs(); ++i)
    if (i != input) rows.push_back(i);
  m.layers[0] = remap_layer(m.layers[0], rows, iota_vec(m.layers[0].n_out), default_grid(m));
  --m.width[0].n_add;
  m.input_names.erase(m.input_names.begin() + input);
  m.cache.reset();
}

void swap_nodes(MultKanModel& m, int layer, int a, int b) {
  if (layer < 1 || layer >= m.num_layers()) throw InvalidArgument("not a hidden layer");
  if (a == b) return;
  const NodeSpec& spec = m.width[layer];
  const auto sa = node_subnodes(spec, a);
  const auto sb = node_subnodes(spec, b);
  if ((a < spec.n_add) != (b < spec.n_add) || sa.size() != sb.size())
    throw InvalidArgument("can only swap nodes of the same type and arity");
  KanLayer& out = m.layers[layer];
  for (int j = 0; j < out.n_out; ++j) std::swap(out.at(a, j), out.at(b, j));
  KanLayer& in = m.layers[layer - 1];
  for (std::size_t q = 0; q < sa.size(); ++q)
    for (int i = 0; i < in.n_in; ++i) std::swap(in.at(i, sa[q]), in.at(i, sb[q]));
  m.cache.reset();
}

std::size_t count_unmasked(const MultKanModel& m) {
  std::size_t n = 0;
  for (const auto& layer : m.layers)
    for (const auto& e : layer.edges) n += e.mask ? 1 : 0;
  return n;
}

bool has_symbolic_edges(const MultKanModel& m) {
  for (const auto& layer : m.layers)
    for (const auto& e : layer.edges)
      if (e.mask && e.uses_symbolic()) return true;
  return false;
}

ParamLayout ParamLayout::build(const MultKanModel& m) {
  ParamLayout p;
  p.lookup.resize(m.layers.size());
  for (std::size_t l = 0; l < m.layers.size(); ++l) {
    const auto& edges = m.layers[l].edges;
    p.lookup[l].assign(edges.size(), -1);
    for (std::size_t e = 0; e < edges.size(); ++e) {
      const EdgeFunction& ef = edges[e];
      if (!ef.mask || ef.frozen) continue;
      Entry ent;
      ent.layer = static_cast<int>(l);
      ent.edge = static_cast<int>(e);
      ent.offset = p.size;
      if (ef.uses_spline()) {
        ent.n_coef = ef.spline.grid.num_basis();
        ent.base = m.use_base;
      }
      ent.symbolic = ef.uses_symbolic();
      p.size += p.spline_size(ent) + (ent.symbolic ? 4 : 0);
      p.lookup[l][e] = static_cast<int>(p.entries.size());
      p.entries.push_back(ent);
    }
  }
  return p;
}

std::vector<double> ParamLayout::gather(const MultKanModel& m) const {
  std::vector<double> v(size);
  for (const auto& ent : entries) {
    const EdgeFunction& e = m.layers[ent.layer].edges[ent.edge];
    int p = ent.offset;
    if (ent.n_coef > 0) {
      for (int q = 0; q < ent.n_coef; ++q) v[p++] = e.spline.coef[q];
      if (ent.base) v[p++] = e.base_scale;
      v[p++] = e.spline_scale;
    }
    if (ent.symbolic) {
      v[p++] = e.sym.a;
      v[p++] = e.sym.b;
      v[p++] = e.sym.c;
      v[p++] = e.sym.d;
    }
  }
  return v;
}

void ParamLayout::scatter(MultKanModel& m, const std::vector<double>& v) const {
  if (static_cast<int>(v.size()) != size) throw InvalidArgument("parameter vector size mismatch");
  for (const auto& ent : entries) {
    EdgeFunction& e = m.layers[ent.layer].edges[ent.edge];
    int p = ent.offset;
    if (ent.n_coef > 0) {
      for (int q = 0; q < ent.n_coef; ++q) e.spline.coef[q] = v[p++];
      if (ent.base) e.base_scale = v[p++];
      e.spline_scale = v[p++];
    }
    if (ent.symbolic) {
      e.sym.a = v[p++];
      e.sym.b = v[p++];
      e.sym.c = v[p++];
      e.sym.d = v[p++];
    }
  }
}

}  // namespace kan
