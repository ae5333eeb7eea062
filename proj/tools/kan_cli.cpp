// SPDX-License-Identifier: Apache-2.0
//
// kan: command-line front end over the library. Every verb reads its inputs
// from files and writes its results back, so a session is a sequence of
// shell commands over one workspace directory.

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "kan/attribution.hpp"
#include "kan/conserved.hpp"
#include "kan/dataset.hpp"
#include "kan/diagram.hpp"
#include "kan/errors.hpp"
#include "kan/expr.hpp"
#include "kan/kanpiler.hpp"
#include "kan/model_io.hpp"
#include "kan/modularity.hpp"
#include "kan/symbolic_fit.hpp"
#include "kan/trainer.hpp"
#include "kan/versioning.hpp"

using namespace kan;

namespace {

enum Exit { kOk = 0, kUsage = 2, kNumeric = 3, kIo = 4 };

struct Globals {
  std::string model = "model.json";
  std::string data;
  std::string store;
  std::string config;
  std::string out;
  std::uint64_t seed = 0;
  int outputs = -1;  // trailing label columns in the CSV; -1 means the model's or 1
  double test_fraction = 0.2;
};

// key = value lines with optional [section] headers and # comments.
std::map<std::string, std::string> read_config(const std::string& path) {
  std::map<std::string, std::string> kv;
  if (path.empty()) return kv;
  std::istringstream in(read_file(path));
  std::string line, section;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (auto h = line.find('#'); h != std::string::npos) line.erase(h);
    auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t\r");
      if (b == std::string::npos) return std::string();
      return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
    };
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[' && line.back() == ']') {
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw InvalidArgument(path + ":" + std::to_string(number) + ": expected key = value");
    std::string value = trim(line.substr(eq + 1));
    if (value.size() >= 2 && value.front() == '"' && value.back() == '"')
      value = value.substr(1, value.size() - 2);
    kv[trim(line.substr(0, eq))] = value;
  }
  return kv;
}

double to_double(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double d = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw InvalidArgument("config key '" + key + "': '" + v + "' is not a number");
  }
}

int to_int(const std::string& key, const std::string& v) {
  const double d = to_double(key, v);
  if (d != static_cast<int>(d)) throw InvalidArgument("config key '" + key + "' must be an integer");
  return static_cast<int>(d);
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw InvalidArgument("config key '" + key + "' must be true or false");
}

OptimizerKind optimizer_from(const std::string& v) {
  if (v == "adam") return OptimizerKind::Adam;
  if (v == "lbfgs") return OptimizerKind::Lbfgs;
  throw InvalidArgument("optimizer must be adam or lbfgs, got '" + v + "'");
}

std::vector<int> int_list(const std::string& key, const std::string& v) {
  std::vector<int> out;
  std::string s = v;
  std::erase_if(s, [](char c) { return c == '[' || c == ']' || c == ' '; });
  std::stringstream ss(s);
  for (std::string item; std::getline(ss, item, ',');)
    if (!item.empty()) out.push_back(to_int(key, item));
  return out;
}

// Applies the config keys that belong to TrainConfig and TestConfig; other
// keys are an error so typos do not pass silently.
void apply_config(const std::map<std::string, std::string>& kv, TrainConfig& t, TestConfig& m) {
  for (const auto& [key, v] : kv) {
    if (key == "steps") t.steps = to_int(key, v);
    else if (key == "optimizer") t.optimizer = optimizer_from(v);
    else if (key == "learning_rate") t.learning_rate = to_double(key, v);
    else if (key == "lambda_l1") t.lambda_l1 = to_double(key, v);
    else if (key == "lambda_entropy") t.lambda_entropy = to_double(key, v);
    else if (key == "grid_update_steps") t.grid_update_steps = int_list(key, v);
    else if (key == "update_grid") t.update_grid = to_bool(key, v);
    else if (key == "batch_size") t.batch_size = to_int(key, v);
    else if (key == "seed") t.seed = m.seed = static_cast<std::uint64_t>(to_int(key, v));
    else if (key == "divergence_threshold") t.divergence_threshold = to_double(key, v);
    else if (key == "lbfgs_history") t.lbfgs_history = to_int(key, v);
    else if (key == "probes") m.probes = to_int(key, v);
    else if (key == "h") m.h = to_double(key, v);
    else if (key == "tau") m.tau = to_double(key, v);
    else throw InvalidArgument("unknown config key '" + key + "'");
  }
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  for (std::string item; std::getline(ss, item, sep);)
    if (!item.empty()) out.push_back(item);
  return out;
}

std::pair<double, double> parse_range(const std::string& s) {
  const auto colon = s.find(':');
  if (colon == std::string::npos) throw InvalidArgument("range '" + s + "' must be lo:hi");
  return {to_double("box", s.substr(0, colon)), to_double("box", s.substr(colon + 1))};
}

EdgeId parse_edge(const std::string& s) {
  const auto parts = split(s, ',');
  if (parts.size() != 3) throw InvalidArgument("edge '" + s + "' must be layer,i,j");
  return {to_int("edge", parts[0]), to_int("edge", parts[1]), to_int("edge", parts[2])};
}

std::string edge_text(const EdgeId& e) {
  return std::to_string(e.layer) + "," + std::to_string(e.i) + "," + std::to_string(e.j);
}

// The CLI's working state: the loaded model, data and optional store.
class Workspace {
 public:
  explicit Workspace(const Globals& g) : g_(g) {}

  MultKanModel load_model() const { return kan::load_model(g_.model); }

  void save_model(const MultKanModel& m, const std::string& op) const {
    const std::string path = g_.out.empty() ? g_.model : g_.out;
    kan::save_model(path, m);
    if (!g_.store.empty()) {
      CheckpointStore store(g_.store);
      const VersionId id = store.commit(m, op);
      std::cout << "committed " << id.to_string() << "  " << op << "\n";
    }
  }

  Dataset load_data(int outputs) const {
    if (g_.data.empty()) throw InvalidArgument("this command needs --data");
    return dataset_from_table(read_csv(g_.data), outputs, g_.test_fraction);
  }

  // Data for a model: trailing columns are the model's outputs unless
  // --outputs says otherwise, and inputs are matched to the model by name.
  Dataset data_for(const MultKanModel& m) const {
    Dataset d = load_data(g_.outputs > 0 ? g_.outputs : m.num_outputs());
    if (d.input_names != m.input_names) d = select_inputs(d, m.input_names);
    return d;
  }

  Eigen::MatrixXd inputs_for(const MultKanModel& m) const { return data_for(m).train_inputs; }

  CheckpointStore store() const {
    if (g_.store.empty()) throw InvalidArgument("this command needs --store");
    return CheckpointStore(g_.store);
  }

  const Globals& globals() const { return g_; }

 private:
  const Globals& g_;
};

void print_scores(const MultKanModel& m, const AttributionScores& s, double edge_floor) {
  for (std::size_t l = 0; l < s.node.size(); ++l) {
    std::cout << "node layer " << l << ":";
    for (std::size_t i = 0; i < s.node[l].size(); ++i) {
      std::cout << " ";
      if (l == 0 && i < m.input_names.size()) std::cout << m.input_names[i] << "=";
      std::cout << format_number(s.node[l][i]);
    }
    std::cout << "\n";
  }
  for (std::size_t l = 0; l < s.edge.size(); ++l) {
    const int n_out = m.layers[l].n_out;
    for (std::size_t e = 0; e < s.edge[l].size(); ++e)
      if (s.edge[l][e] > edge_floor)
        std::cout << "edge " << l << "," << e / n_out << "," << e % n_out << "  "
                  << format_number(s.edge[l][e]) << "\n";
  }
}

std::string joined(const std::vector<std::string>& v, const std::string& sep) {
  std::string s;
  for (std::size_t k = 0; k < v.size(); ++k) s += (k ? sep : "") + v[k];
  return s;
}

void emit(const Globals& g, const std::string& text) {
  if (g.out.empty()) {
    std::cout << text;
    if (!text.empty() && text.back() != '\n') std::cout << "\n";
  } else {
    write_file_atomic(g.out, text);
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"kan: Kolmogorov-Arnold network toolkit"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--model", g.model, "model file (JSON)");
  app.add_option("--data", g.data, "dataset CSV: inputs then outputs");
  app.add_option("--store", g.store, "checkpoint store directory; model-writing verbs commit");
  app.add_option("--config", g.config, "key = value file with TrainConfig/TestConfig fields");
  app.add_option("--seed", g.seed, "seed for every random choice");
  app.add_option("--outputs", g.outputs, "number of trailing label columns in --data");
  app.add_option("--test-fraction", g.test_fraction, "share of rows held out as the test split");
  app.add_option("-o,--out", g.out, "output file (default: overwrite --model or print)");

  // compile
  auto* compile = app.add_subcommand("compile", "compile formulas (';' separated) into a model");
  std::string formula;
  std::string input_list;
  compile->add_option("formula", formula)->required();
  compile->add_option("--inputs", input_list, "comma-separated input names, in order");

  // gen-data
  auto* gen = app.add_subcommand("gen-data", "sample a synthetic dataset");
  TaskSpec task;
  std::string field;
  std::vector<std::string> boxes;
  gen->add_option("--formula", task.formula, "label formula; ';' separates outputs");
  gen->add_option("--field", field, "conserved-quantity vector field (harmonic1d, harmonic2d)");
  gen->add_option("--inputs", input_list, "comma-separated input names");
  gen->add_option("--samples", task.samples);
  gen->add_option("--box", boxes, "lo:hi, once for all inputs or once per input");
  gen->add_option("--noise", task.noise, "Gaussian label noise std");

  // augment
  auto* augment = app.add_subcommand("augment", "append columns computed from formulas");
  std::vector<std::string> aux;
  augment->add_option("aux", aux, "name=formula, in order")->required();

  // train
  auto* trainc = app.add_subcommand("train", "train a model (initialized with --width)");
  std::string width, optimizer, conserved, log_path;
  int steps = -1, grid = 5, order = 3;
  double lr = -1, lambda = -1, lambda_entropy = -1;
  bool no_grid_update = false;
  trainc->add_option("--width", width, "initialize a fresh model, e.g. [2,[0,1],1]");
  trainc->add_option("--grid", grid, "grid intervals for a fresh model");
  trainc->add_option("--order", order, "spline order for a fresh model");
  trainc->add_option("--steps", steps);
  trainc->add_option("--optimizer", optimizer, "adam or lbfgs");
  trainc->add_option("--lr", lr);
  trainc->add_option("--lambda", lambda, "L1 weight (entropy weight defaults to twice this)");
  trainc->add_option("--lambda-entropy", lambda_entropy);
  trainc->add_flag("--no-grid-update", no_grid_update);
  trainc->add_option("--conserved", conserved, "train H for this vector field instead of regressing");
  trainc->add_option("--log", log_path, "write the training log CSV here");

  // attribute
  auto* attribute = app.add_subcommand("attribute", "print node and edge attribution scores");
  double edge_floor = 0.0;
  attribute->add_option("--edge-floor", edge_floor, "only list edges scoring above this");

  // prune
  auto* prunec = app.add_subcommand("prune", "mask weak edges and nodes, or drop inputs");
  double node_th = 1e-2, edge_th = 1e-2, input_rel = 0.05;
  bool inputs_only = false;
  std::string keep;
  prunec->add_option("--node-threshold", node_th);
  prunec->add_option("--edge-threshold", edge_th);
  prunec->add_flag("--inputs", inputs_only, "prune input variables instead of edges");
  prunec->add_option("--relative", input_rel, "input cut-off relative to the top score");
  prunec->add_option("--keep", keep, "comma-separated inputs to keep (with --inputs)");

  // tree
  auto* tree = app.add_subcommand("tree", "modularity tree of the model or of a formula");
  std::string tree_format = "text";
  tree->add_option("--formula", formula, "test this formula instead of the model");
  tree->add_option("--inputs", input_list);
  tree->add_option("--box", boxes, "lo:hi, once or per input (formula mode)");
  tree->add_option("--format", tree_format, "text, box or dot");

  // swap
  auto* swap = app.add_subcommand("swap", "permute hidden nodes to lower connection cost");

  // suggest
  auto* suggest = app.add_subcommand("suggest", "rank symbolic fits for one edge");
  std::string edge;
  int top_k = 5;
  suggest->add_option("--edge", edge, "layer,i,j")->required();
  suggest->add_option("--top", top_k);

  // symbolify
  auto* symbolify = app.add_subcommand("symbolify", "fix edges to symbolic primitives");
  std::string fn, library;
  bool all_edges = false, freeze = false, unfix = false;
  double floor = 0.99;
  symbolify->add_option("--edge", edge, "layer,i,j");
  symbolify->add_option("--fn", fn, "primitive name for --edge");
  symbolify->add_flag("--freeze", freeze, "freeze the affine parameters");
  symbolify->add_flag("--unfix", unfix, "restore the spline of --edge");
  symbolify->add_flag("--auto", all_edges, "fit every remaining edge");
  symbolify->add_option("--floor", floor, "r2 floor for --auto");
  symbolify->add_option("--library", library, "comma-separated primitives for --auto");

  // extract
  auto* extract = app.add_subcommand("extract", "print the closed-form formula of each output");
  int digits = 4;
  extract->add_option("--digits", digits);

  // plot
  auto* plot = app.add_subcommand("plot", "Graphviz DOT diagram (scored when --data is given)");

  // versions
  auto* versions = app.add_subcommand("versions", "list or rewind checkpoints");
  versions->require_subcommand(1);
  auto* vlist = versions->add_subcommand("list", "print the version tree");
  auto* vrewind = versions->add_subcommand("rewind", "restore a version as a new branch");
  std::string target;
  vrewind->add_option("id", target)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }

  try {
    TrainConfig tcfg;
    TestConfig mcfg;
    tcfg.seed = mcfg.seed = g.seed;
    apply_config(read_config(g.config), tcfg, mcfg);
    if (app.get_option("--seed")->count() > 0) tcfg.seed = mcfg.seed = g.seed;
    Workspace ws(g);

    if (*compile) {
      std::vector<std::string> texts = split(formula, ';');
      std::vector<std::string> names = split(input_list, ',');
      if (names.empty()) {
        for (const auto& t : texts)
          for (const auto& v : free_variables(parse_formula_open(t))) names.push_back(v);
        std::sort(names.begin(), names.end());
        names.erase(std::unique(names.begin(), names.end()), names.end());
      }
      std::vector<ExprPtr> exprs;
      for (const auto& t : texts) exprs.push_back(parse_formula(t, names));
      const MultKanModel m = compile_to_kan(exprs, names);
      ws.save_model(m, "compile " + formula);
      std::cout << "width " << format_width(m.width) << "  inputs " << joined(names, ",") << "\n";

    } else if (*gen) {
      if (g.data.empty() && g.out.empty()) throw InvalidArgument("gen-data needs --data or --out");
      if (!field.empty()) {
        task.kind = TaskKind::ConservedQuantity;
        task.field = field;
      }
      task.input_names = split(input_list, ',');
      for (const auto& b : boxes) task.box.push_back(parse_range(b));
      task.test_fraction = g.test_fraction;
      task.seed = g.seed;
      const Dataset d = gen_dataset(task);
      write_csv(g.out.empty() ? g.data : g.out, dataset_to_table(d));
      std::cout << d.train_inputs.rows() + d.test_inputs.rows() << " rows, inputs "
                << joined(d.input_names, ",") << ", outputs " << joined(d.output_names, ",")
                << "\n";

    } else if (*augment) {
      const Dataset d = ws.load_data(g.outputs > 0 ? g.outputs : 1);
      std::vector<std::pair<std::string, std::string>> pairs;
      for (const auto& a : aux) {
        const auto eq = a.find('=');
        if (eq == std::string::npos || eq == 0)
          throw InvalidArgument("auxiliary column '" + a + "' must be name=formula");
        pairs.emplace_back(a.substr(0, eq), a.substr(eq + 1));
      }
      const Dataset out = augment_input(d, pairs);
      write_csv(g.out.empty() ? g.data : g.out, dataset_to_table(out));
      std::cout << "inputs " << joined(out.input_names, ",") << "\n";

    } else if (*trainc) {
      if (steps >= 0) tcfg.steps = steps;
      if (!optimizer.empty()) tcfg.optimizer = optimizer_from(optimizer);
      if (lr > 0) tcfg.learning_rate = lr;
      if (lambda >= 0) {
        tcfg.lambda_l1 = lambda;
        tcfg.lambda_entropy = 2.0 * lambda;
      }
      if (lambda_entropy >= 0) tcfg.lambda_entropy = lambda_entropy;
      if (no_grid_update) tcfg.update_grid = false;
      MultKanModel m;
      Dataset d;
      if (!width.empty()) {
        InitOptions o;
        o.seed = g.seed;
        o.grid_intervals = grid;
        o.order = order;
        m = init_model(parse_width(width), o);
        const int outs = g.outputs > 0 ? g.outputs
                         : conserved.empty() ? m.num_outputs()
                                             : m.num_inputs();
        d = ws.load_data(outs);
        if (d.train_inputs.cols() != m.num_inputs())
          throw InvalidArgument("the data has " + std::to_string(d.train_inputs.cols()) +
                                " inputs but the width asks for " +
                                std::to_string(m.num_inputs()));
        m.input_names = d.input_names;
      } else {
        m = ws.load_model();
        if (conserved.empty()) {
          d = ws.data_for(m);
        } else {
          d = ws.load_data(g.outputs > 0 ? g.outputs : m.num_inputs());
        }
      }
      TrainLog log;
      try {
        log = conserved.empty() ? train(m, d, tcfg) : train_conserved(m, d, tcfg);
      } catch (const DivergenceError& e) {
        if (!log_path.empty()) write_file_atomic(log_path, e.log().to_csv());
        throw;
      }
      if (!log_path.empty()) write_file_atomic(log_path, log.to_csv());
      ws.save_model(m, "train " + std::to_string(tcfg.steps) + " steps");
      if (!log.rows.empty()) {
        const auto& last = log.rows.back();
        std::cout << "step " << last.step << "  train " << format_number(last.train_loss)
                  << "  test " << format_number(last.test_loss) << "\n";
      }

    } else if (*attribute) {
      const MultKanModel m = ws.load_model();
      print_scores(m, compute_attribution(m, ws.inputs_for(m)), edge_floor);

    } else if (*prunec) {
      const MultKanModel m = ws.load_model();
      const AttributionScores s = compute_attribution(m, ws.inputs_for(m));
      if (inputs_only) {
        InputPruneResult r;
        if (!keep.empty()) {
          std::vector<int> idx;
          for (const auto& name : split(keep, ',')) {
            const auto it = std::find(m.input_names.begin(), m.input_names.end(), name);
            if (it == m.input_names.end()) throw InvalidArgument("no input named '" + name + "'");
            idx.push_back(static_cast<int>(it - m.input_names.begin()));
          }
          r = prune_inputs(m, s, idx);
        } else {
          r = prune_inputs(m, s, std::nullopt, input_rel);
        }
        ws.save_model(r.model, "prune inputs -> " + joined(r.retained_names, ","));
        std::cout << "kept inputs " << joined(r.retained_names, ",") << "\n";
      } else {
        const MultKanModel p = prune(m, s, node_th, edge_th);
        ws.save_model(p, "prune");
        std::cout << "width " << format_width(p.width) << "  edges " << count_unmasked(m)
                  << " -> " << count_unmasked(p) << "\n";
      }

    } else if (*tree) {
      ModularityTree t;
      if (!formula.empty()) {
        std::vector<std::string> names = split(input_list, ',');
        if (names.empty()) names = free_variables(parse_formula_open(formula));
        std::vector<std::pair<double, double>> box;
        for (const auto& b : boxes) box.push_back(parse_range(b));
        if (box.empty()) box.push_back({-1.0, 1.0});
        t = tree_convert(function_from_expr(parse_formula(formula, names), names, box), names,
                         mcfg);
      } else {
        const MultKanModel m = ws.load_model();
        t = tree_convert(function_from_model(m), m.input_names, mcfg);
      }
      if (tree_format == "text") emit(g, t.to_string());
      else if (tree_format == "box") emit(g, t.to_box());
      else if (tree_format == "dot") emit(g, t.to_dot());
      else throw InvalidArgument("tree format must be text, box or dot");

    } else if (*swap) {
      const MultKanModel m = ws.load_model();
      const SwapResult r = auto_swap(m, ws.inputs_for(m));
      ws.save_model(r.model, "swap");
      std::cout << "cost " << format_number(r.cost_trace.front()) << " -> "
                << format_number(r.cost_trace.back()) << " in " << r.cost_trace.size() - 1
                << " swaps\n";

    } else if (*suggest) {
      MultKanModel m = ws.load_model();
      forward(m, ws.inputs_for(m), true);
      FitOptions o;
      o.top_k = top_k;
      const auto fits = suggest_symbolic(m, parse_edge(edge), o);
      for (const auto& f : fits)
        std::printf("%-8s r2=%.6f  c=%.6g a=%.6g b=%.6g d=%.6g\n", f.name.c_str(), f.r2, f.c, f.a,
                    f.b, f.d);

    } else if (*symbolify) {
      MultKanModel m = ws.load_model();
      if (all_edges) {
        FitOptions o;
        for (const auto& name : split(library, ',')) o.library.push_back(prim_from_name(name));
        const AutoSymbolicReport rep = auto_symbolic(m, ws.inputs_for(m), floor, o);
        std::cout << rep.to_text();
        ws.save_model(m, "symbolify auto");
      } else {
        if (edge.empty()) throw InvalidArgument("symbolify needs --edge or --auto");
        const EdgeId id = parse_edge(edge);
        if (unfix) {
          m = unfix_symbolic(m, id);
          ws.save_model(m, "unfix " + edge_text(id));
        } else {
          if (fn.empty()) throw InvalidArgument("symbolify --edge needs --fn");
          if (prim_from_name(fn) != Prim::Zero) forward(m, ws.inputs_for(m), true);
          m = fix_symbolic(m, id, fn, prim_from_name(fn) != Prim::Zero, freeze);
          const SymbolicPart& s = m.layers[id.layer].at(id.i, id.j).sym;
          std::printf("edge %s = %.6g*%s(%.6g*x%+.6g)%+.6g\n", edge_text(id).c_str(), s.c,
                      fn.c_str(), s.a, s.b, s.d);
          ws.save_model(m, "fix " + edge_text(id) + " " + fn);
        }
      }

    } else if (*extract) {
      const MultKanModel m = ws.load_model();
      ExtractOptions o;
      o.digits = digits;
      o.seed = g.seed;
      if (!g.data.empty()) {
        const Dataset d = ws.data_for(m);
        o.inputs = d.train_inputs;
        o.labels = d.train_labels;
      }
      const auto formulas = extract_formula(m, o);
      std::string text;
      for (std::size_t k = 0; k < formulas.size(); ++k) {
        text += "y" + std::to_string(k + 1) + " = " + to_string(formulas[k]) + "\n";
      }
      emit(g, text);

    } else if (*plot) {
      const MultKanModel m = ws.load_model();
      emit(g, g.data.empty() ? network_dot(m)
                             : network_dot(m, compute_attribution(m, ws.inputs_for(m))));

    } else if (*vlist) {
      std::cout << ws.store().render();

    } else if (*vrewind) {
      CheckpointStore store = ws.store();
      auto [m, id] = store.rewind(VersionId::parse(target));
      save_model(g.out.empty() ? g.model : g.out, m);
      std::cout << "restored " << target << " as " << id.to_string() << "\n";
    }
    return kOk;
  } catch (const IoError& e) {
    std::cerr << "kan: " << e.what() << "\n";
    return kIo;
  } catch (const DivergenceError& e) {
    std::cerr << "kan: " << e.what() << "\n";
    return kNumeric;
  } catch (const InconclusiveError& e) {
    std::cerr << "kan: " << e.what() << "\n";
    return kNumeric;
  } catch (const NonFiniteError& e) {
    std::cerr << "kan: " << e.what() << "\n";
    return kNumeric;
  } catch (const UnderdeterminedError& e) {
    std::cerr << "kan: " << e.what() << "\n";
    return kNumeric;
  } catch (const NotSymbolicError& e) {
    std::cerr << "kan: " << e.what() << "\n";
    return kUsage;
  } catch (const Error& e) {
    std::cerr << "kan: " << e.what() << "\n";
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "kan: " << e.what() << "\n";
    return kUsage;
  }
}
