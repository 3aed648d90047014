#include "msbo/optimizer.hpp"

#include <cmath>
#include <deque>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace msbo {

void OptimizerConfig::validate() const {
  if (restarts < 1) throw std::invalid_argument("optimizer: restarts must be >= 1");
  if (max_iters < 1) throw std::invalid_argument("optimizer: max_iters must be >= 1");
  if (!(grad_tol > 0.0)) throw std::invalid_argument("optimizer: grad_tol must be > 0");
  if (history < 1) throw std::invalid_argument("optimizer: history must be >= 1");
}

namespace {

using Eigen::VectorXd;

VectorXd project(const VectorXd& x, const VectorXd& lo, const VectorXd& hi) {
  return x.cwiseMax(lo).cwiseMin(hi);
}

struct CurvaturePair {
  VectorXd s, y;
  double rho;
};

// Two-loop recursion for an ascent direction from the gradient of the
// maximization objective (H approximates the inverse Hessian of -f).
VectorXd ascent_direction(const std::deque<CurvaturePair>& pairs, const VectorXd& grad) {
  VectorXd q = grad;
  std::vector<double> a(pairs.size());
  for (int i = static_cast<int>(pairs.size()) - 1; i >= 0; --i) {
    a[i] = pairs[i].rho * pairs[i].s.dot(q);
    q -= a[i] * pairs[i].y;
  }
  if (!pairs.empty()) {
    const auto& last = pairs.back();
    q *= last.s.dot(last.y) / last.y.squaredNorm();
  }
  for (size_t i = 0; i < pairs.size(); ++i) {
    const double b = pairs[i].rho * pairs[i].y.dot(q);
    q += (a[i] - b) * pairs[i].s;
  }
  return q;
}

struct RestartOutcome {
  VectorXd x;
  double value = -std::numeric_limits<double>::infinity();
  double init_value = std::numeric_limits<double>::quiet_NaN();
  bool ok = false;
};

RestartOutcome run_restart(const ValueAndGradFn& fg, const VectorXd& lo, const VectorXd& hi,
                           VectorXd x, const OptimizerConfig& cfg) {
  const int n = static_cast<int>(x.size());
  RestartOutcome out;
  x = project(x, lo, hi);
  VectorXd grad(n), grad_new(n);
  double value = fg({x.data(), static_cast<size_t>(x.size())}, {grad.data(), static_cast<size_t>(grad.size())});
  out.init_value = value;
  if (!std::isfinite(value)) return out;

  std::deque<CurvaturePair> pairs;
  for (int iter = 0; iter < cfg.max_iters; ++iter) {
    // projected-gradient stationarity test
    const VectorXd pg = project(x + grad, lo, hi) - x;
    if (pg.lpNorm<Eigen::Infinity>() <= cfg.grad_tol) break;

    VectorXd dir = ascent_direction(pairs, grad);
    if (!dir.allFinite() || dir.dot(grad) <= 0.0) dir = grad;  // fall back to steepest ascent

    // backtracking line search along the projected path
    double step = 1.0;
    bool accepted = false;
    VectorXd x_new;
    double value_new = value;
    for (int ls = 0; ls < 60; ++ls) {
      x_new = project(x + step * dir, lo, hi);
      const VectorXd dx = x_new - x;
      if (dx.lpNorm<Eigen::Infinity>() < 1e-18) break;
      value_new = fg({x_new.data(), static_cast<size_t>(x_new.size())}, {grad_new.data(), static_cast<size_t>(grad_new.size())});
      // sufficient-increase test; the max() keeps the step monotone even when
      // the projected direction loses alignment with the gradient at a bound
      if (std::isfinite(value_new) &&
          value_new >= value + 1e-4 * std::max(grad.dot(dx), 0.0) && value_new >= value) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;

    CurvaturePair pair;
    pair.s = x_new - x;
    pair.y = grad - grad_new;  // y for the equivalent minimization of -f
    const double sy = pair.s.dot(pair.y);
    if (sy > 1e-10 * pair.s.norm() * pair.y.norm()) {
      pair.rho = 1.0 / sy;
      pairs.push_back(std::move(pair));
      if (static_cast<int>(pairs.size()) > cfg.history) pairs.pop_front();
    }
    x = x_new;
    grad = grad_new;
    value = value_new;
  }
  out.x = x;
  out.value = value;
  out.ok = std::isfinite(value);
  return out;
}

}  // namespace

BoxResult maximize_box(const ValueAndGradFn& fg, const VectorXd& lower, const VectorXd& upper,
                       const std::vector<VectorXd>& inits, const OptimizerConfig& cfg) {
  cfg.validate();
  if (inits.empty()) throw std::invalid_argument("maximize_box: no initializations");
  if (lower.size() != upper.size()) throw std::invalid_argument("maximize_box: bound size mismatch");
  for (const auto& init : inits) {
    if (init.size() != lower.size()) throw std::invalid_argument("maximize_box: init size mismatch");
    if (((init - lower).minCoeff() < -1e-12) || ((upper - init).minCoeff() < -1e-12))
      throw std::invalid_argument("maximize_box: init outside bounds");
  }

  BoxResult best;
  best.value = -std::numeric_limits<double>::infinity();
  int failures = 0;
  for (const auto& init : inits) {
    RestartOutcome out = run_restart(fg, lower, upper, init, cfg);
    best.init_values.push_back(out.init_value);
    best.restart_values.push_back(out.ok ? out.value
                                         : std::numeric_limits<double>::quiet_NaN());
    best.restart_solutions.push_back(out.ok ? out.x : Eigen::VectorXd());
    if (!out.ok) {
      ++failures;
      continue;
    }
    if (out.value > best.value) {
      best.value = out.value;
      best.x = out.x;
    }
  }
  if (failures == static_cast<int>(inits.size())) {
    std::ostringstream msg;
    msg << "maximize_box: all " << failures << " restarts produced non-finite objectives";
    throw std::runtime_error(msg.str());
  }
  return best;
}

}  // namespace msbo
