// SPDX-License-Identifier: Apache-2.0
//
// Adam and L-BFGS over flat parameter vectors.

#pragma once

#include <deque>
#include <functional>
#include <vector>

namespace kan {

/// Returns f(x) and writes the gradient into `grad`.
using Objective = std::function<double(const std::vector<double>& x, std::vector<double>& grad)>;

class Adam {
 public:
  explicit Adam(double lr = 1e-2, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
      : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

  void step(std::vector<double>& x, const std::vector<double>& grad);
  void reset() {
    m_.clear();
    v_.clear();
    t_ = 0;
  }

 private:
  double lr_, beta1_, beta2_, eps_;
  std::vector<double> m_, v_;
  long t_ = 0;
};

/// L-BFGS with the two-loop recursion and a strong-Wolfe line search.
class Lbfgs {
 public:
  explicit Lbfgs(int history = 10, double initial_step = 1.0)
      : history_(history), initial_step_(initial_step) {}

  /// One iteration from (x, f, grad); updates all three in place. Returns
  /// false if no descent progress was possible.
  bool step(std::vector<double>& x, double& f, std::vector<double>& grad, const Objective& obj);
  void reset() {
    s_.clear();
    y_.clear();
  }

 private:
  int history_;
  double initial_step_;
  std::deque<std::vector<double>> s_, y_;
};

struct LineSearchResult {
  double step = 0.0;
  double f = 0.0;
  bool ok = false;
};

/// Strong-Wolfe line search along `dir` with cubic zoom.
/// On return x/grad hold the accepted point.
LineSearchResult strong_wolfe(const Objective& obj, std::vector<double>& x, double f0,
                              std::vector<double>& grad, const std::vector<double>& dir,
                              double step0, double c1 = 1e-4, double c2 = 0.9, int max_evals = 25);

}  // namespace kan
