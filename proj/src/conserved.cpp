// SPDX-License-Identifier: Apache-2.0

#include "kan/conserved.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "kan/dataset.hpp"
#include "kan/errors.hpp"
#include "kan/optimizer.hpp"

namespace kan {

ConservedLoss conserved_quantity_loss(const MultKanModel& m, const ParamLayout& layout,
                                      const Eigen::MatrixXd& Z, const Eigen::MatrixXd& F) {
  const int d = m.num_inputs();
  if (m.num_outputs() != 1) throw InvalidArgument("conserved quantity model needs one output");
  if (Z.cols() != d || F.cols() != d || F.rows() != Z.rows())
    throw InvalidArgument("state and field shapes do not match the model");
  if (Z.rows() == 0) throw InvalidArgument("empty batch");

  kernel::SampleTape<double> tape;
  tape.resize(m);
  kernel::SampleTape<Dual> dtape;
  dtape.resize(m);
  std::vector<double> z(d), g(d), v(d);
  std::vector<Dual> dz(d), dgrad;
  const double one = 1.0;
  const Dual done{1.0, 0.0};

  ConservedLoss out;
  std::vector<double> acc(layout.size, 0.0);
  double total = 0.0;
  for (Eigen::Index s = 0; s < Z.rows(); ++s) {
    for (int i = 0; i < d; ++i) z[i] = Z(s, i);
    kernel::forward_sample(m, z.data(), tape, OutOfDomain::Clamp);
    kernel::backward_sample(m, static_cast<const ParamLayout*>(nullptr), tape, &one, nullptr,
                            static_cast<std::vector<double>*>(nullptr), g.data());
    double gn = 0.0;
    for (double a : g) gn += a * a;
    gn = std::sqrt(gn);
    if (!(gn >= kGradientNormGuard)) {
      ++out.skipped;
      continue;
    }
    double c = 0.0;  // f . grad H / |grad H|
    for (int i = 0; i < d; ++i) c += F(s, i) * g[i];
    c /= gn;
    total += c * c;
    ++out.used;
    // d(c^2)/d(grad H), pushed through the mixed second derivative.
    for (int i = 0; i < d; ++i) v[i] = 2.0 * c * (F(s, i) - c * g[i] / gn) / gn;
    for (int i = 0; i < d; ++i) dz[i] = Dual{z[i], v[i]};
    kernel::forward_sample(m, dz.data(), dtape, OutOfDomain::Clamp);
    dgrad.assign(layout.size, Dual{0.0, 0.0});
    kernel::backward_sample(m, &layout, dtape, &done, nullptr, &dgrad, static_cast<Dual*>(nullptr));
    for (int p = 0; p < layout.size; ++p) acc[p] += dgrad[p].t;
  }
  if (out.used == 0)
    throw InconclusiveError("gradient of H vanishes at every sample (" +
                            std::to_string(out.skipped) + " skipped)");
  const double inv = 1.0 / out.used;
  out.loss = total * inv;
  out.grad.resize(layout.size);
  for (int p = 0; p < layout.size; ++p) out.grad[p] = acc[p] * inv;
  return out;
}

Eigen::MatrixXd field_matrix(const std::string& field, const Eigen::MatrixXd& Z) {
  const auto d = static_cast<Eigen::Index>(field_variables(field).size());
  if (Z.cols() != d) throw InvalidArgument("state dimension does not match the field");
  Eigen::MatrixXd F(Z.rows(), d);
  std::vector<double> z(d);
  for (Eigen::Index s = 0; s < Z.rows(); ++s) {
    for (Eigen::Index i = 0; i < d; ++i) z[i] = Z(s, i);
    const auto f = eval_field(field, z);
    for (Eigen::Index i = 0; i < d; ++i) F(s, i) = f[i];
  }
  return F;
}

ConservedLoss conserved_quantity_loss(const MultKanModel& model, const Eigen::MatrixXd& Z,
                                      const std::string& field) {
  return conserved_quantity_loss(model, ParamLayout::build(model), Z, field_matrix(field, Z));
}

TrainLog train_conserved(MultKanModel& m, const Dataset& data, const TrainConfig& cfg) {
  cfg.validate();
  data.validate();
  const Eigen::MatrixXd& Z = data.train_inputs;
  const Eigen::MatrixXd& F = data.train_labels;
  TrainLog log;
  if (cfg.steps == 0) return log;
  const ParamLayout layout = ParamLayout::build(m);
  std::vector<double> params = layout.gather(m);
  Adam adam(cfg.learning_rate);
  Lbfgs lbfgs(cfg.lbfgs_history, cfg.learning_rate);
  const bool grids = cfg.update_grid && !has_symbolic_edges(m);

  auto objective = [&](const std::vector<double>& p, std::vector<double>& g) {
    layout.scatter(m, p);
    try {
      ConservedLoss cl = conserved_quantity_loss(m, layout, Z, F);
      g = std::move(cl.grad);
      return cl.loss;
    } catch (const NonFiniteError&) {
    } catch (const InconclusiveError&) {
    }
    g.assign(p.size(), 0.0);
    return std::numeric_limits<double>::infinity();
  };

  for (int step = 0; step < cfg.steps; ++step) {
    if (grids && std::find(cfg.grid_update_steps.begin(), cfg.grid_update_steps.end(), step) !=
                     cfg.grid_update_steps.end()) {
      layout.scatter(m, params);
      update_grids(m, Z);
      params = layout.gather(m);
      adam.reset();
      lbfgs.reset();
    }
    layout.scatter(m, params);
    ConservedLoss cl;
    try {
      cl = conserved_quantity_loss(m, layout, Z, F);
    } catch (const NonFiniteError& e) {
      throw DivergenceError("training diverged at step " + std::to_string(step) + ": " + e.what(),
                            log);
    }
    if (!(cl.loss <= cfg.divergence_threshold))
      throw DivergenceError("training diverged at step " + std::to_string(step), log);
    TrainLogRow row;
    row.step = step;
    row.train_loss = cl.loss;
    row.test_loss = std::numeric_limits<double>::quiet_NaN();
    if (data.test_inputs.rows() > 0) {
      try {
        row.test_loss = conserved_quantity_loss(m, layout, data.test_inputs, data.test_labels).loss;
      } catch (const InconclusiveError&) {
      }
    }
    log.rows.push_back(row);
    if (layout.size == 0) continue;
    if (cfg.optimizer == OptimizerKind::Adam) {
      adam.step(params, cl.grad);
    } else {
      double f = cl.loss;
      std::vector<double> g = std::move(cl.grad);
      lbfgs.step(params, f, g, objective);
    }
  }
  layout.scatter(m, params);
  forward(m, Z, true);
  return log;
}

}  // namespace kan
