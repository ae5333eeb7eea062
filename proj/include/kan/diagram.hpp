// SPDX-License-Identifier: Apache-2.0
//
// Graphviz rendering of a network: node size follows the node attribution
// score A, edge pen width the edge score B.

#pragma once

#include <string>

#include "kan/attribution.hpp"
#include "kan/model.hpp"

namespace kan {

struct DiagramOptions {
  double max_pen = 6.0;
  double max_node = 0.8;   // inches
  double min_node = 0.15;
  bool show_masked = false;
  bool label_edges = true;  // primitive names on symbolic edges
};

std::string network_dot(const MultKanModel& model, const AttributionScores& scores,
                        const DiagramOptions& opts = {});
/// Without scores every node and unmasked edge is drawn at unit weight.
std::string network_dot(const MultKanModel& model, const DiagramOptions& opts = {});

}  // namespace kan
