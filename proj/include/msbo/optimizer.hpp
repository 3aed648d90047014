#pragma once

#include <Eigen/Core>
#include <functional>
#include <span>
#include <vector>

namespace msbo {

struct OptimizerConfig {
  int restarts = 10;     // multistart width used by propose_next (5 warm + 5 fresh)
  int max_iters = 100;
  double grad_tol = 1e-6;
  int history = 10;      // curvature pairs kept by the quasi-Newton recursion

  void validate() const;
};

/// Objective callback: returns the value at x and fills grad (same length).
using ValueAndGradFn =
    std::function<double(std::span<const double> x, std::span<double> grad)>;

struct BoxResult {
  Eigen::VectorXd x;
  double value;
  std::vector<double> restart_values;         // final value per restart (NaN = failed)
  std::vector<double> init_values;            // objective at each initialization
  std::vector<Eigen::VectorXd> restart_solutions;  // final iterate per restart
};

/// Box-constrained maximization by projected limited-memory quasi-Newton
/// ascent from each initialization. Ascent is monotone per restart (the line
/// search only accepts improvements), every iterate stays inside the bounds,
/// and the best final iterate across restarts is returned.
/// Throws std::runtime_error when every restart fails with a non-finite
/// objective.
BoxResult maximize_box(const ValueAndGradFn& fg, const Eigen::VectorXd& lower,
                       const Eigen::VectorXd& upper,
                       const std::vector<Eigen::VectorXd>& inits,
                       const OptimizerConfig& cfg = {});

}  // namespace msbo
