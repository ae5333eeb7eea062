// SPDX-License-Identifier: Apache-2.0

#include "kan/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>

#include "kan/optimizer.hpp"

namespace kan {

void TrainConfig::validate() const {
  if (steps < 0) throw InvalidArgument("steps must be >= 0");
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate))
    throw InvalidArgument("learning rate must be positive");
  if (!std::isfinite(lambda_l1) || lambda_l1 < 0.0)
    throw InvalidArgument("lambda_l1 must be finite and >= 0");
  if (!std::isfinite(lambda_entropy) || lambda_entropy < 0.0)
    throw InvalidArgument("lambda_entropy must be finite and >= 0");
  if (batch_size < 0) throw InvalidArgument("batch size must be >= 0");
  if (lbfgs_history < 1) throw InvalidArgument("lbfgs history must be >= 1");
}

std::string TrainLog::to_csv() const {
  std::ostringstream os;
  os.precision(17);
  os << "step,train_loss,test_loss,l1,entropy\n";
  for (const auto& r : rows)
    os << r.step << ',' << r.train_loss << ',' << r.test_loss << ',' << r.l1 << ','
       << r.entropy << '\n';
  return os.str();
}

namespace {

using AbsMeans = std::vector<std::vector<double>>;

RegValues reg_from_means(const MultKanModel& m, const AbsMeans& means,
                         std::vector<std::vector<double>>* entropy_grad) {
  RegValues r;
  if (entropy_grad) entropy_grad->resize(m.layers.size());
  for (std::size_t l = 0; l < m.layers.size(); ++l) {
    const auto& edges = m.layers[l].edges;
    double total = 0.0;
    for (std::size_t e = 0; e < edges.size(); ++e)
      if (edges[e].mask) total += means[l][e];
    r.l1 += total;
    double h = 0.0;
    if (total > 0.0) {
      for (std::size_t e = 0; e < edges.size(); ++e) {
        if (!edges[e].mask) continue;
        const double p = means[l][e] / total;
        if (p > 0.0) h -= p * std::log(p);
      }
    }
    r.entropy += h;
    if (entropy_grad) {
      auto& g = (*entropy_grad)[l];
      g.assign(edges.size(), 0.0);
      if (total > 0.0) {
        for (std::size_t e = 0; e < edges.size(); ++e) {
          if (!edges[e].mask) continue;
          const double p = std::max(means[l][e] / total, 1e-12);
          g[e] = (-std::log(p) - h) / total;
        }
      }
    }
  }
  return r;
}

AbsMeans zero_means(const MultKanModel& m) {
  AbsMeans a(m.layers.size());
  for (std::size_t l = 0; l < m.layers.size(); ++l) a[l].assign(m.layers[l].edges.size(), 0.0);
  return a;
}

void accumulate_abs(const kernel::SampleTape<double>& tape, double w, AbsMeans& a) {
  for (std::size_t l = 0; l < a.size(); ++l)
    for (std::size_t e = 0; e < a[l].size(); ++e) a[l][e] += w * std::abs(tape.edges[l][e].y);
}

double sign(double v) { return v > 0.0 ? 1.0 : v < 0.0 ? -1.0 : 0.0; }

}  // namespace

RegValues regularization(const MultKanModel& model, const ActivationCache& cache) {
  if (cache.batch() == 0) throw InvalidArgument("activation cache is empty");
  AbsMeans means = zero_means(model);
  for (std::size_t l = 0; l < model.layers.size(); ++l) {
    if (cache.edge_out[l].cols() != static_cast<Eigen::Index>(means[l].size()))
      throw InvalidArgument("activation cache does not match the model");
    for (std::size_t e = 0; e < means[l].size(); ++e)
      means[l][e] = cache.edge_out[l].col(static_cast<Eigen::Index>(e)).cwiseAbs().mean();
  }
  return reg_from_means(model, means, nullptr);
}

RegValues regularization(const MultKanModel& model) {
  if (!model.cache) throw InvalidArgument("regularization needs a cached forward pass");
  return regularization(model, *model.cache);
}

LossGrad loss_and_grad(const MultKanModel& m, const ParamLayout& layout,
                       const Eigen::MatrixXd& X, const Eigen::MatrixXd& Y,
                       const TrainConfig& cfg) {
  const Eigen::Index B = X.rows();
  if (B == 0) throw InvalidArgument("empty batch");
  if (X.cols() != m.num_inputs() || Y.cols() != m.num_outputs() || Y.rows() != B)
    throw InvalidArgument("batch shape does not match the model");
  const int L = m.num_layers();
  const int n_in = m.num_inputs();
  const int n_out = m.num_outputs();
  const bool reg_grad = cfg.lambda_l1 > 0.0 || cfg.lambda_entropy > 0.0;

  kernel::SampleTape<double> tape;
  tape.resize(m);
  std::vector<double> x(n_in), adj(n_out);
  const double inv_b = 1.0 / static_cast<double>(B);

  LossGrad out;
  out.grad.assign(layout.size, 0.0);
  AbsMeans means = zero_means(m);
  std::vector<std::vector<double>> edge_coef, edge_adj;

  if (reg_grad) {
    for (Eigen::Index s = 0; s < B; ++s) {
      for (int i = 0; i < n_in; ++i) x[i] = X(s, i);
      kernel::forward_sample(m, x.data(), tape, OutOfDomain::Clamp);
      accumulate_abs(tape, inv_b, means);
    }
    std::vector<std::vector<double>> hgrad;
    out.reg = reg_from_means(m, means, &hgrad);
    edge_coef.resize(L);
    edge_adj.resize(L);
    for (int l = 0; l < L; ++l) {
      edge_coef[l].resize(hgrad[l].size());
      edge_adj[l].assign(hgrad[l].size(), 0.0);
      for (std::size_t e = 0; e < hgrad[l].size(); ++e)
        edge_coef[l][e] = (cfg.lambda_l1 + cfg.lambda_entropy * hgrad[l][e]) * inv_b;
    }
  }

  double sq = 0.0;
  const double scale = 2.0 / (static_cast<double>(B) * n_out);
  for (Eigen::Index s = 0; s < B; ++s) {
    for (int i = 0; i < n_in; ++i) x[i] = X(s, i);
    kernel::forward_sample(m, x.data(), tape, OutOfDomain::Clamp);
    for (int o = 0; o < n_out; ++o) {
      const double r = tape.nodes[L][o] - Y(s, o);
      sq += r * r;
      adj[o] = scale * r;
    }
    if (reg_grad) {
      for (int l = 0; l < L; ++l)
        for (std::size_t e = 0; e < edge_adj[l].size(); ++e)
          edge_adj[l][e] = edge_coef[l][e] * sign(tape.edges[l][e].y);
    } else {
      accumulate_abs(tape, inv_b, means);
    }
    kernel::backward_sample(m, &layout, tape, adj.data(), reg_grad ? &edge_adj : nullptr,
                            &out.grad, static_cast<double*>(nullptr));
  }
  out.mse = sq / (static_cast<double>(B) * n_out);
  if (!reg_grad) out.reg = reg_from_means(m, means, nullptr);
  out.loss = out.mse + cfg.lambda_l1 * out.reg.l1 + cfg.lambda_entropy * out.reg.entropy;
  if (!std::isfinite(out.loss)) throw NonFiniteError("non-finite loss", -1);
  return out;
}

Eigen::MatrixXd input_gradient(const MultKanModel& m, const Eigen::MatrixXd& X) {
  if (m.num_outputs() != 1) throw InvalidArgument("input_gradient needs a single-output model");
  if (X.cols() != m.num_inputs()) throw InvalidArgument("input width mismatch");
  kernel::SampleTape<double> tape;
  tape.resize(m);
  const int n = m.num_inputs();
  std::vector<double> x(n), g(n);
  const double one = 1.0;
  Eigen::MatrixXd out(X.rows(), n);
  for (Eigen::Index s = 0; s < X.rows(); ++s) {
    for (int i = 0; i < n; ++i) x[i] = X(s, i);
    kernel::forward_sample(m, x.data(), tape, OutOfDomain::Clamp);
    kernel::backward_sample<double>(m, nullptr, tape, &one, nullptr, nullptr, g.data());
    for (int i = 0; i < n; ++i) out(s, i) = g[i];
  }
  return out;
}

double rmse(const MultKanModel& model, const Eigen::MatrixXd& X, const Eigen::MatrixXd& Y) {
  if (X.rows() == 0) return std::numeric_limits<double>::quiet_NaN();
  const Eigen::MatrixXd pred = evaluate(model, X);
  return std::sqrt((pred - Y).array().square().mean());
}

void update_grids(MultKanModel& m, const Eigen::MatrixXd& X) {
  ActivationCache cache;
  for (int l = 0; l < m.num_layers(); ++l) {
    evaluate_cached(m, X, cache);
    KanLayer& layer = m.layers[l];
    for (int i = 0; i < layer.n_in; ++i) {
      const Eigen::VectorXd col = cache.nodes[l].col(i);
      const std::vector<double> xs(col.data(), col.data() + col.size());
      if (xs.empty() || !(col.maxCoeff() > col.minCoeff())) continue;
      for (int j = 0; j < layer.n_out; ++j) {
        EdgeFunction& e = layer.at(i, j);
        if (!e.mask || e.mode != EdgeMode::Spline) continue;
        const int G = e.spline.grid.num_intervals();
        if (static_cast<int>(xs.size()) < G + e.spline.grid.order()) continue;
        e.spline = refine_grid(e.spline, G, xs, KnotPlacement::Quantile);
      }
    }
  }
  m.cache.reset();
}

namespace {

Eigen::MatrixXd take_rows(const Eigen::MatrixXd& M, const std::vector<Eigen::Index>& idx) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(idx.size()), M.cols());
  for (std::size_t r = 0; r < idx.size(); ++r) out.row(static_cast<Eigen::Index>(r)) = M.row(idx[r]);
  return out;
}

}  // namespace

TrainLog train(MultKanModel& m, const Dataset& data, const TrainConfig& cfg) {
  cfg.validate();
  data.validate();
  if (data.train_inputs.cols() != m.num_inputs() || data.train_labels.cols() != m.num_outputs())
    throw InvalidArgument("dataset columns do not match the model width");
  TrainLog log;
  if (cfg.steps == 0) return log;

  const ParamLayout layout = ParamLayout::build(m);
  std::vector<double> params = layout.gather(m);
  Adam adam(cfg.learning_rate);
  Lbfgs lbfgs(cfg.lbfgs_history, cfg.learning_rate);
  std::mt19937_64 rng(cfg.seed);
  const bool grids = cfg.update_grid && !has_symbolic_edges(m);
  const Eigen::Index n_train = data.train_inputs.rows();
  const bool minibatch = cfg.batch_size > 0 && cfg.batch_size < n_train;

  for (int step = 0; step < cfg.steps; ++step) {
    if (grids && std::find(cfg.grid_update_steps.begin(), cfg.grid_update_steps.end(), step) !=
                     cfg.grid_update_steps.end()) {
      layout.scatter(m, params);
      update_grids(m, data.train_inputs);
      params = layout.gather(m);
      adam.reset();
      lbfgs.reset();
    }

    Eigen::MatrixXd bx, by;
    const Eigen::MatrixXd* X = &data.train_inputs;
    const Eigen::MatrixXd* Y = &data.train_labels;
    if (minibatch) {
      std::vector<Eigen::Index> idx(static_cast<std::size_t>(n_train));
      std::iota(idx.begin(), idx.end(), 0);
      std::shuffle(idx.begin(), idx.end(), rng);
      idx.resize(static_cast<std::size_t>(cfg.batch_size));
      bx = take_rows(data.train_inputs, idx);
      by = take_rows(data.train_labels, idx);
      X = &bx;
      Y = &by;
    }

    auto objective = [&](const std::vector<double>& p, std::vector<double>& g) {
      layout.scatter(m, p);
      try {
        LossGrad lg = loss_and_grad(m, layout, *X, *Y, cfg);
        g = std::move(lg.grad);
        return lg.loss;
      } catch (const NonFiniteError&) {
        g.assign(p.size(), 0.0);
        return std::numeric_limits<double>::infinity();
      }
    };

    layout.scatter(m, params);
    LossGrad lg;
    try {
      lg = loss_and_grad(m, layout, *X, *Y, cfg);
    } catch (const NonFiniteError& e) {
      throw DivergenceError(std::string("training diverged at step ") + std::to_string(step) +
                                ": " + e.what(),
                            log);
    }
    if (!(lg.loss <= cfg.divergence_threshold))
      throw DivergenceError("training diverged at step " + std::to_string(step) + ": loss " +
                                std::to_string(lg.loss),
                            log);

    TrainLogRow row;
    row.step = step;
    row.train_loss = minibatch ? rmse(m, data.train_inputs, data.train_labels) : std::sqrt(lg.mse);
    row.test_loss = rmse(m, data.test_inputs, data.test_labels);
    row.l1 = lg.reg.l1;
    row.entropy = lg.reg.entropy;
    log.rows.push_back(row);

    if (layout.size == 0) continue;
    if (cfg.optimizer == OptimizerKind::Adam) {
      adam.step(params, lg.grad);
    } else {
      double f = lg.loss;
      std::vector<double> g = std::move(lg.grad);
      lbfgs.step(params, f, g, objective);
    }
  }
  layout.scatter(m, params);
  forward(m, data.train_inputs, true);
  return log;
}

}  // namespace kan
