// SPDX-License-Identifier: Apache-2.0
//
// Datasets, CSV I/O, synthetic task generation and input augmentation.

#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace kan {

struct Dataset {
  Eigen::MatrixXd train_inputs, train_labels;
  Eigen::MatrixXd test_inputs, test_labels;
  std::vector<std::string> input_names, output_names;

  void validate() const;
};

/// Named columns, rows are samples.
struct Table {
  std::vector<std::string> names;
  Eigen::MatrixXd values;
};

Table read_csv(const std::string& path);
std::string table_to_csv(const Table& t);
void write_csv(const std::string& path, const Table& t);

/// Splits columns into inputs and the last `n_outputs` columns; the last
/// `test_fraction` of the rows becomes the test split.
Dataset dataset_from_table(const Table& t, int n_outputs, double test_fraction);
/// Train rows followed by test rows, inputs then outputs.
Table dataset_to_table(const Dataset& d);

enum class TaskKind { Formula, ConservedQuantity };

struct TaskSpec {
  TaskKind kind = TaskKind::Formula;
  std::string formula;                  // Formula tasks; ';' separates outputs
  std::string field;                    // ConservedQuantity: built-in field id
  std::vector<std::string> input_names; // Formula tasks
  int samples = 1000;
  std::vector<std::pair<double, double>> box;  // one entry, or one per input
  double noise = 0.0;
  double test_fraction = 0.2;
  std::uint64_t seed = 0;
};

/// Built-in vector fields: "harmonic1d" (x, p) -> (p, -x) and "harmonic2d"
/// (x, y, px, py) -> (px, py, -x, -y).
std::vector<std::string> field_variables(const std::string& field);
std::vector<double> eval_field(const std::string& field, const std::vector<double>& z);

Dataset gen_dataset(const TaskSpec& spec);

/// Appends columns computed from formulas over existing inputs.
Dataset augment_input(const Dataset& d,
                      const std::vector<std::pair<std::string, std::string>>& aux);

/// Keeps the named input columns, in the given order.
Dataset select_inputs(const Dataset& d, const std::vector<std::string>& names);

}  // namespace kan
