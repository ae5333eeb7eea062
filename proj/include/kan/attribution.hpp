// SPDX-License-Identifier: Apache-2.0
//
// Output-to-input attribution scores and score-driven pruning.

#pragma once

#include <Eigen/Core>

#include <optional>
#include <string>
#include <vector>

#include "kan/model.hpp"

namespace kan {

struct AttributionScores {
  std::vector<std::vector<double>> node;           // A[l][i], node layers 0..L
  std::vector<std::vector<double>> edge;           // B[l][e], KAN layers, e = i * n_out + j
  std::vector<std::vector<double>> edge_std;       // E[l][e]
  std::vector<std::vector<double>> edge_mean;      // mean edge activation
  std::vector<std::vector<double>> node_std;       // N[l][i]
  std::vector<std::vector<double>> subnode_std;    // per KAN layer output

  double edge_score(int l, int i, int j, int n_out) const {
    return edge[l][static_cast<std::size_t>(i) * n_out + j];
  }
  std::string to_csv(const MultKanModel& model) const;
};

constexpr double kStdGuard = 1e-9;

AttributionScores compute_attribution(const MultKanModel& model, const Eigen::MatrixXd& X);
/// From an existing activation cache.
AttributionScores compute_attribution(const MultKanModel& model, const ActivationCache& cache);

/// Masks edges with B < edge_threshold and removes hidden nodes with
/// A < node_threshold. Throws (leaving the input untouched) when no output
/// would remain connected to any input.
MultKanModel prune(const MultKanModel& model, const AttributionScores& scores,
                   double node_threshold = 1e-2, double edge_threshold = 1e-2);

struct InputPruneResult {
  MultKanModel model;
  std::vector<std::string> retained_names;
  std::vector<int> retained_indices;
};

/// Keeps the listed inputs (in model order). The mean activation of every
/// dropped edge is folded into a retained edge feeding the same subnode.
InputPruneResult prune_inputs(const MultKanModel& model, const AttributionScores& scores,
                              const std::vector<int>& keep);

/// Keeps inputs with A >= threshold. Without an explicit threshold the
/// cut-off is `relative` times the largest input score.
InputPruneResult prune_inputs(const MultKanModel& model, const AttributionScores& scores,
                              std::optional<double> threshold = std::nullopt,
                              double relative = 0.05);

}  // namespace kan
