// SPDX-License-Identifier: Apache-2.0

#include "kan/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <random>
#include <sstream>

#include "kan/errors.hpp"
#include "kan/expr.hpp"
#include "kan/model_io.hpp"

namespace kan {

void Dataset::validate() const {
  const auto n_in = static_cast<Eigen::Index>(input_names.size());
  const auto n_out = static_cast<Eigen::Index>(output_names.size());
  // An empty test split may be left default-constructed.
  const bool no_test = test_inputs.rows() == 0 && test_labels.rows() == 0;
  if (train_inputs.cols() != n_in || (!no_test && test_inputs.cols() != n_in))
    throw InvalidArgument("input columns do not match input names");
  if (train_labels.cols() != n_out || (!no_test && test_labels.cols() != n_out))
    throw InvalidArgument("label columns do not match output names");
  if (train_inputs.rows() != train_labels.rows() || test_inputs.rows() != test_labels.rows())
    throw InvalidArgument("input and label row counts differ");
}

namespace {

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == sep) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::string format_double(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

}  // namespace

Table read_csv(const std::string& path) {
  const std::string text = read_file(path);
  std::istringstream is(text);
  std::string line;
  Table t;
  if (!std::getline(is, line)) throw InvalidArgument("empty CSV file '" + path + "'");
  for (const auto& n : split(line, ',')) t.names.push_back(trim(n));
  std::vector<std::vector<double>> rows;
  int lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    const auto cells = split(line, ',');
    if (cells.size() != t.names.size())
      throw InvalidArgument("CSV line " + std::to_string(lineno) + " has " +
                            std::to_string(cells.size()) + " fields, expected " +
                            std::to_string(t.names.size()));
    std::vector<double> row;
    for (const auto& c : cells) {
      const std::string s = trim(c);
      double v = 0.0;
      const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
      if (r.ec != std::errc() || r.ptr != s.data() + s.size())
        throw InvalidArgument("CSV line " + std::to_string(lineno) + ": bad number '" + s + "'");
      row.push_back(v);
    }
    rows.push_back(std::move(row));
  }
  t.values.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(t.names.size()));
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (std::size_t c = 0; c < t.names.size(); ++c)
      t.values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
  return t;
}

std::string table_to_csv(const Table& t) {
  std::string out;
  for (std::size_t c = 0; c < t.names.size(); ++c) out += (c ? "," : "") + t.names[c];
  out += '\n';
  for (Eigen::Index r = 0; r < t.values.rows(); ++r) {
    for (Eigen::Index c = 0; c < t.values.cols(); ++c) {
      if (c) out += ',';
      out += format_double(t.values(r, c));
    }
    out += '\n';
  }
  return out;
}

void write_csv(const std::string& path, const Table& t) { write_file_atomic(path, table_to_csv(t)); }

Dataset dataset_from_table(const Table& t, int n_outputs, double test_fraction) {
  const auto cols = static_cast<int>(t.names.size());
  if (n_outputs < 1 || n_outputs >= cols)
    throw InvalidArgument("need at least one input and one output column");
  if (!(test_fraction >= 0.0 && test_fraction < 1.0))
    throw InvalidArgument("test fraction must lie in [0, 1)");
  const Eigen::Index rows = t.values.rows();
  const auto n_test = static_cast<Eigen::Index>(std::floor(test_fraction * static_cast<double>(rows)));
  const Eigen::Index n_train = rows - n_test;
  if (n_train < 1) throw InvalidArgument("dataset has no training rows");
  const int n_in = cols - n_outputs;
  Dataset d;
  d.input_names.assign(t.names.begin(), t.names.begin() + n_in);
  d.output_names.assign(t.names.begin() + n_in, t.names.end());
  d.train_inputs = t.values.topLeftCorner(n_train, n_in);
  d.train_labels = t.values.topRightCorner(n_train, n_outputs);
  d.test_inputs = t.values.bottomLeftCorner(n_test, n_in);
  d.test_labels = t.values.bottomRightCorner(n_test, n_outputs);
  return d;
}

Table dataset_to_table(const Dataset& d) {
  d.validate();
  Table t;
  t.names = d.input_names;
  t.names.insert(t.names.end(), d.output_names.begin(), d.output_names.end());
  const Eigen::Index rows = d.train_inputs.rows() + d.test_inputs.rows();
  const Eigen::Index n_in = d.train_inputs.cols(), n_out = d.train_labels.cols();
  t.values.resize(rows, n_in + n_out);
  t.values.topLeftCorner(d.train_inputs.rows(), n_in) = d.train_inputs;
  t.values.topRightCorner(d.train_inputs.rows(), n_out) = d.train_labels;
  t.values.bottomLeftCorner(d.test_inputs.rows(), n_in) = d.test_inputs;
  t.values.bottomRightCorner(d.test_inputs.rows(), n_out) = d.test_labels;
  return t;
}

std::vector<std::string> field_variables(const std::string& field) {
  if (field == "harmonic1d") return {"x", "p"};
  if (field == "harmonic2d") return {"x", "y", "px", "py"};
  throw InvalidArgument("unknown vector field '" + field + "'");
}

std::vector<double> eval_field(const std::string& field, const std::vector<double>& z) {
  if (z.size() != field_variables(field).size()) throw InvalidArgument("state has wrong dimension");
  if (field == "harmonic1d") return {z[1], -z[0]};
  return {z[2], z[3], -z[0], -z[1]};
}

Dataset gen_dataset(const TaskSpec& spec) {
  if (spec.samples <= 0) throw InvalidArgument("sample count must be positive");
  if (!(spec.noise >= 0.0)) throw InvalidArgument("noise must be non-negative");
  std::vector<std::string> names;
  std::vector<ExprPtr> formulas;
  std::vector<std::string> outputs;
  if (spec.kind == TaskKind::Formula) {
    names = spec.input_names;
    std::vector<std::string> parts = split(spec.formula, ';');
    for (auto& p : parts) p = trim(p);
    if (names.empty()) {
      // Variables of all formulas, sorted.
      for (const auto& p : parts) {
        const ExprPtr e = parse_formula_open(p);
        for (const auto& v : free_variables(e))
          if (std::find(names.begin(), names.end(), v) == names.end()) names.push_back(v);
      }
      std::sort(names.begin(), names.end());
    }
    for (const auto& p : parts) formulas.push_back(parse_formula(p, names));
    // Label names must not shadow an input.
    for (const char* stem : {"y", "f", "target"}) {
      outputs.clear();
      if (formulas.size() == 1) {
        outputs = {stem};
      } else {
        for (std::size_t k = 0; k < formulas.size(); ++k)
          outputs.push_back(stem + std::to_string(k + 1));
      }
      const bool clash = std::any_of(outputs.begin(), outputs.end(), [&](const std::string& o) {
        return std::find(names.begin(), names.end(), o) != names.end();
      });
      if (!clash) break;
    }
  } else {
    names = field_variables(spec.field);
    for (const auto& v : names) outputs.push_back("d" + v);
  }
  const int n = static_cast<int>(names.size());
  if (n == 0) throw InvalidArgument("task has no input variables");
  std::vector<std::pair<double, double>> box = spec.box;
  if (box.empty()) box.assign(n, {-1.0, 1.0});
  if (box.size() == 1) box.assign(n, box.front());
  if (static_cast<int>(box.size()) != n) throw InvalidArgument("domain box needs one range per input");
  for (const auto& [lo, hi] : box)
    if (!(hi > lo)) throw InvalidArgument("degenerate domain box");

  std::mt19937_64 rng(spec.seed);
  const int m = static_cast<int>(outputs.size());
  Table t;
  t.names = names;
  t.names.insert(t.names.end(), outputs.begin(), outputs.end());
  t.values.resize(spec.samples, n + m);
  std::normal_distribution<double> noise(0.0, 1.0);
  std::vector<double> z(n);
  for (int r = 0; r < spec.samples; ++r) {
    for (int c = 0; c < n; ++c) {
      z[c] = std::uniform_real_distribution<double>(box[c].first, box[c].second)(rng);
      t.values(r, c) = z[c];
    }
    std::vector<double> y;
    if (spec.kind == TaskKind::Formula) {
      for (const auto& f : formulas) y.push_back(eval_expr(f, names, z));
    } else {
      y = eval_field(spec.field, z);
    }
    for (int c = 0; c < m; ++c) {
      const double eps = spec.noise > 0.0 ? spec.noise * noise(rng) : 0.0;
      t.values(r, n + c) = y[c] + eps;
    }
  }
  return dataset_from_table(t, m, spec.test_fraction);
}

namespace {

Eigen::VectorXd eval_column(const ExprPtr& e, const std::vector<std::string>& names,
                            const Eigen::MatrixXd& X, const std::string& label) {
  Eigen::VectorXd out(X.rows());
  std::vector<double> row(X.cols());
  for (Eigen::Index r = 0; r < X.rows(); ++r) {
    for (Eigen::Index c = 0; c < X.cols(); ++c) row[c] = X(r, c);
    try {
      out[r] = eval_expr(e, names, row);
    } catch (const DomainError& ex) {
      throw DomainError("auxiliary '" + label + "' undefined at " + std::to_string(r) + ": " +
                        ex.what());
    }
  }
  return out;
}

}  // namespace

Dataset augment_input(const Dataset& d, const std::vector<std::pair<std::string, std::string>>& aux) {
  d.validate();
  Dataset out = d;
  for (const auto& [name, formula] : aux) {
    if (std::find(out.input_names.begin(), out.input_names.end(), name) != out.input_names.end())
      throw InvalidArgument("column '" + name + "' already exists");
    const ExprPtr e = parse_formula(formula, out.input_names);
    const Eigen::VectorXd tr = eval_column(e, out.input_names, out.train_inputs, name);
    const Eigen::VectorXd te = eval_column(e, out.input_names, out.test_inputs, name);
    out.train_inputs.conservativeResize(Eigen::NoChange, out.train_inputs.cols() + 1);
    out.train_inputs.col(out.train_inputs.cols() - 1) = tr;
    out.test_inputs.conservativeResize(Eigen::NoChange, out.test_inputs.cols() + 1);
    out.test_inputs.col(out.test_inputs.cols() - 1) = te;
    out.input_names.push_back(name);
  }
  return out;
}

Dataset select_inputs(const Dataset& d, const std::vector<std::string>& names) {
  d.validate();
  Dataset out;
  out.output_names = d.output_names;
  out.train_labels = d.train_labels;
  out.test_labels = d.test_labels;
  out.input_names = names;
  out.train_inputs.resize(d.train_inputs.rows(), static_cast<Eigen::Index>(names.size()));
  out.test_inputs.resize(d.test_inputs.rows(), static_cast<Eigen::Index>(names.size()));
  for (std::size_t k = 0; k < names.size(); ++k) {
    const auto it = std::find(d.input_names.begin(), d.input_names.end(), names[k]);
    if (it == d.input_names.end()) throw InvalidArgument("unknown input column '" + names[k] + "'");
    const auto src = static_cast<Eigen::Index>(it - d.input_names.begin());
    out.train_inputs.col(static_cast<Eigen::Index>(k)) = d.train_inputs.col(src);
    out.test_inputs.col(static_cast<Eigen::Index>(k)) = d.test_inputs.col(src);
  }
  return out;
}

}  // namespace kan
