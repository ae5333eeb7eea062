// SPDX-License-Identifier: Apache-2.0
//
// Conserved-quantity objective: the network output H should satisfy
// f(z) . grad H(z) = 0 along a vector field f.

#pragma once

#include <Eigen/Core>

#include <string>
#include <vector>

#include "kan/model.hpp"
#include "kan/trainer.hpp"

namespace kan {

constexpr double kGradientNormGuard = 1e-8;

struct ConservedLoss {
  double loss = 0.0;  // mean over used samples of (f . grad H / |grad H|)^2
  std::vector<double> grad;
  int used = 0;
  int skipped = 0;  // samples with |grad H| below the guard
};

/// Rows of Z are states, rows of F the field at those states. Throws
/// InconclusiveError when every sample is skipped.
ConservedLoss conserved_quantity_loss(const MultKanModel& model, const ParamLayout& layout,
                                      const Eigen::MatrixXd& Z, const Eigen::MatrixXd& F);
ConservedLoss conserved_quantity_loss(const MultKanModel& model, const Eigen::MatrixXd& Z,
                                      const std::string& field);

/// Field values at the rows of Z.
Eigen::MatrixXd field_matrix(const std::string& field, const Eigen::MatrixXd& Z);

/// Training loop for the conserved objective; train_loss in the log holds
/// the objective itself and test_loss its value on the test states.
TrainLog train_conserved(MultKanModel& model, const Dataset& data, const TrainConfig& config);

}  // namespace kan
