// SPDX-License-Identifier: Apache-2.0
//
// Loss, regularization, analytic gradients and the training loop.

#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <string>
#include <vector>

#include "kan/dataset.hpp"
#include "kan/errors.hpp"
#include "kan/kernel.hpp"
#include "kan/model.hpp"

namespace kan {

enum class OptimizerKind { Adam, Lbfgs };

struct TrainConfig {
  int steps = 100;
  OptimizerKind optimizer = OptimizerKind::Adam;
  double learning_rate = 1e-2;  // Adam step, or L-BFGS initial step scale
  double lambda_l1 = 0.0;
  double lambda_entropy = 0.0;
  std::vector<int> grid_update_steps = {20, 50, 100};
  bool update_grid = true;
  int batch_size = 0;  // 0: full batch
  std::uint64_t seed = 0;
  double divergence_threshold = 1e6;
  int lbfgs_history = 10;

  void validate() const;
};

struct TrainLogRow {
  int step = 0;
  double train_loss = 0.0;  // RMSE
  double test_loss = 0.0;   // RMSE (NaN when there is no test split)
  double l1 = 0.0;
  double entropy = 0.0;
  bool operator==(const TrainLogRow&) const = default;
};

struct TrainLog {
  std::vector<TrainLogRow> rows;
  std::string to_csv() const;
  bool operator==(const TrainLog&) const = default;
};

class DivergenceError : public Error {
 public:
  DivergenceError(const std::string& what, TrainLog log)
      : Error(what), log_(std::move(log)) {}
  const TrainLog& log() const noexcept { return log_; }

 private:
  TrainLog log_;
};

struct RegValues {
  double l1 = 0.0;
  double entropy = 0.0;
};

/// From the model's activation cache; InvalidArgument if there is none.
RegValues regularization(const MultKanModel& model);
RegValues regularization(const MultKanModel& model, const ActivationCache& cache);

struct LossGrad {
  double loss = 0.0;  // mse + lambda_l1 * l1 + lambda_entropy * entropy
  double mse = 0.0;
  RegValues reg;
  std::vector<double> grad;  // aligned with the ParamLayout
};

LossGrad loss_and_grad(const MultKanModel& model, const ParamLayout& layout,
                       const Eigen::MatrixXd& X, const Eigen::MatrixXd& Y,
                       const TrainConfig& config);

/// Output gradient with respect to the inputs, one row per sample (model
/// must have a single output).
Eigen::MatrixXd input_gradient(const MultKanModel& model, const Eigen::MatrixXd& X);

double rmse(const MultKanModel& model, const Eigen::MatrixXd& X, const Eigen::MatrixXd& Y);

/// Re-fits every spline edge grid to the distribution of its input node on X,
/// layer by layer, with quantile knots.
void update_grids(MultKanModel& model, const Eigen::MatrixXd& X);

TrainLog train(MultKanModel& model, const Dataset& data, const TrainConfig& config);

}  // namespace kan
