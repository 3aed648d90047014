#pragma once

#include <Eigen/Core>
#include <span>
#include <vector>

#include "msbo/path_model.hpp"
#include "msbo/quadrature.hpp"
#include "msbo/tree_layout.hpp"

namespace msbo {

/// Expected improvement of a Gaussian outcome over the incumbent:
/// sigma (z Phi(z) + phi(z)) with z = (mean - incumbent) / sigma.
/// The std is clamped at 1e-9 so gradients stay finite; at zero std the
/// value degrades gracefully to (mean - incumbent)^+.
template <class T>
T ei_analytic(const T& mean, const T& std_dev, const T& incumbent) {
  const T s = max_scalar(std_dev, T(1e-9));
  const T z = (mean - incumbent) / s;
  return s * (z * norm_cdf(z) + norm_pdf(z));
}

inline double ei_analytic(double mean, double std_dev, double incumbent) {
  return ei_analytic<double>(mean, std_dev, incumbent);
}

/// Monte Carlo batch improvement (q-EI): mean over sample rows of
/// (max_j y_ij - incumbent)^+. The weighted overload accepts quadrature
/// weights in place of the uniform 1/m.
double batch_improvement_mc(const Eigen::MatrixXd& samples, double incumbent);
double batch_improvement_mc(const Eigen::MatrixXd& samples, double incumbent,
                            const Eigen::VectorXd& weights);

/// Decision variables of a one-shot tree: one point per tree node stored as
/// a single flat vector, sliced through the layout's index map.
struct TreeVariables {
  TreeLayout layout;
  Eigen::VectorXd flat;  // length layout.variable_count()

  void validate() const;
  Eigen::VectorXd node_point(int level, int node) const;
};

/// Root decision of the one-shot solution (Proposition-1 extraction).
Eigen::VectorXd extract_candidate(const TreeVariables& vars);

struct AcquisitionValue {
  double value = 0.0;
  Eigen::VectorXd per_stage;  // length k, each >= 0, sums to value
};

/// Recursive evaluation of the one-shot multi-step tree: at every node an
/// analytic expected-improvement stage value against the branch incumbent,
/// then correlate / fantasize / recurse over that node's fantasy branches.
/// Deterministic given (vars, z); differentiable in vars wherever stage
/// standard deviations stay above the clamp floor.
template <class T>
T multi_step_value(const GpModel& model, const TreeLayout& layout, std::span<const T> vars,
                   const BaseSampleTree& z, double incumbent,
                   std::vector<T>* stage_sums = nullptr);

/// Double-precision wrapper that also reports per-stage contributions.
AcquisitionValue multi_step_objective(const GpModel& model, const TreeLayout& layout,
                                      const TreeVariables& vars, const BaseSampleTree& z,
                                      double incumbent);

/// Replicates a tied variable block (one point per level, k*d scalars) into
/// the full tree layout; optimizing over tied variables evaluates the
/// tied-variable lower bound of the one-shot tree.
template <class T>
std::vector<T> tied_to_tree(const TreeLayout& layout, std::span<const T> tied);

/// ENO: analytic first-stage value plus the average over level-1 fantasy
/// branches of a Monte Carlo (k-1)-point batch improvement. vars holds
/// [x | X^(1) | ... | X^(m1)] with each batch X^(i) of shape (k-1) x d.
/// mc_z is the fixed inner base-sample matrix (rows: MC samples, cols: k-1).
template <class T>
T eno_value(const GpModel& model, int horizon, int m1, std::span<const T> vars,
            const Eigen::VectorXd& level1_z, const Eigen::VectorXd& level1_w,
            const Eigen::MatrixXd& mc_z, double incumbent);

double eno_objective(const GpModel& model, int horizon, int m1, const Eigen::VectorXd& vars,
                     const Eigen::VectorXd& level1_z, const Eigen::VectorXd& level1_w,
                     const Eigen::MatrixXd& mc_z, double incumbent);

/// Monte Carlo q-EI of a batch of q points under the base model, with fixed
/// base samples mc_z (rows: MC samples, cols: q). Used by the BINOCULARS
/// baseline and the ENO inner value.
template <class T>
T qei_value(const GpModel& model, std::span<const T> batch_flat, int q, double incumbent,
            const Eigen::MatrixXd& mc_z);

// ---------------------------------------------------------------------------
// template implementations
// ---------------------------------------------------------------------------

namespace detail {

template <class T>
struct TreeEvalState {
  const TreeLayout* layout;
  const BaseSampleTree* z;
  PathModel<T>* path;
  std::span<const T> vars;
  std::vector<T>* stage_sums;
};

template <class T>
T tree_eval_node(TreeEvalState<T>& state, int level, int node, double path_weight,
                 const T& incumbent) {
  const TreeLayout& layout = *state.layout;
  const int d = layout.dim;
  const int offset = layout.slice_offset(level, node);
  const auto x = state.vars.subspan(offset, d);

  const bool is_leaf = level == layout.horizon;
  const auto prep = state.path->prepare(x, /*with_push_blocks=*/!is_leaf);
  const T stage = ei_analytic(prep.mean, prep.obs_std, incumbent);
  if (state.stage_sums) (*state.stage_sums)[level - 1] += path_weight * stage;
  T total = path_weight * stage;
  if (level == layout.horizon) return total;

  const Eigen::VectorXd& z_level = state.z->z[level - 1];
  const Eigen::VectorXd& w_level = state.z->weights[level - 1];
  const int m = layout.fantasies[level - 1];
  for (int j = 0; j < m; ++j) {
    const T y = prep.mean + prep.obs_std * z_level[j];
    state.path->push(prep, y);
    const T child_incumbent = max_scalar(incumbent, y);
    total += tree_eval_node(state, level + 1, node * m + j, path_weight * w_level[j],
                            child_incumbent);
    state.path->pop();
  }
  return total;
}

}  // namespace detail

template <class T>
T multi_step_value(const GpModel& model, const TreeLayout& layout, std::span<const T> vars,
                   const BaseSampleTree& z, double incumbent, std::vector<T>* stage_sums) {
  layout.validate();
  if (static_cast<int>(vars.size()) != layout.variable_count())
    throw std::invalid_argument("multi_step_value: variable count mismatch");
  if (z.levels() < layout.horizon - 1)
    throw std::invalid_argument("multi_step_value: base sample tree too shallow");
  for (int t = 0; t < layout.horizon - 1; ++t)
    if (z.z[t].size() != layout.fantasies[t])
      throw std::invalid_argument("multi_step_value: base sample count mismatch");
  if (stage_sums) stage_sums->assign(layout.horizon, T(0.0));

  PathModel<T> path(model);
  detail::TreeEvalState<T> state{&layout, &z, &path, vars, stage_sums};
  return detail::tree_eval_node(state, 1, 0, 1.0, T(incumbent));
}

template <class T>
std::vector<T> tied_to_tree(const TreeLayout& layout, std::span<const T> tied) {
  if (static_cast<int>(tied.size()) != layout.horizon * layout.dim)
    throw std::invalid_argument("tied_to_tree: need one point per level");
  std::vector<T> full(layout.variable_count());
  for (int t = 1; t <= layout.horizon; ++t) {
    const int nodes = layout.nodes_at_level(t);
    for (int node = 0; node < nodes; ++node) {
      const int offset = layout.slice_offset(t, node);
      for (int c = 0; c < layout.dim; ++c) full[offset + c] = tied[(t - 1) * layout.dim + c];
    }
  }
  return full;
}

template <class T>
T qei_value(const GpModel& model, std::span<const T> batch_flat, int q, double incumbent,
            const Eigen::MatrixXd& mc_z) {
  if (mc_z.cols() != q) throw std::invalid_argument("qei_value: base sample shape mismatch");
  PathModel<T> path(model);
  std::vector<T> means, cov;
  path.query_batch(batch_flat, q, means, cov);
  cholesky_small(cov, q);
  const int m = static_cast<int>(mc_z.rows());
  const double w = 1.0 / m;
  T total(0.0);
  std::vector<T> y(q);
  for (int i = 0; i < m; ++i) {
    for (int a = 0; a < q; ++a) {
      T acc = means[a];
      for (int b = 0; b <= a; ++b) acc += cov[a * q + b] * mc_z(i, b);
      y[a] = acc;
    }
    T best = y[0];
    for (int a = 1; a < q; ++a) best = max_scalar(best, y[a]);
    total += w * max_scalar(best - incumbent, T(0.0));
  }
  return total;
}

template <class T>
T eno_value(const GpModel& model, int horizon, int m1, std::span<const T> vars,
            const Eigen::VectorXd& level1_z, const Eigen::VectorXd& level1_w,
            const Eigen::MatrixXd& mc_z, double incumbent_value) {
  const int d = model.hp.dim();
  const int batch = horizon - 1;
  if (horizon < 2) throw std::invalid_argument("eno_value: horizon must be >= 2");
  if (static_cast<int>(vars.size()) != d + m1 * batch * d)
    throw std::invalid_argument("eno_value: variable count mismatch");
  if (level1_z.size() != m1 || level1_w.size() != m1)
    throw std::invalid_argument("eno_value: level-1 sample count mismatch");
  if (mc_z.cols() != batch) throw std::invalid_argument("eno_value: MC sample shape mismatch");

  PathModel<T> path(model);
  const T incumbent(incumbent_value);
  const auto prep = path.prepare(vars.subspan(0, d));
  T total = ei_analytic(prep.mean, prep.obs_std, incumbent);

  const int mc = static_cast<int>(mc_z.rows());
  const double w_mc = 1.0 / mc;
  std::vector<T> means, cov, y(batch);
  for (int i = 0; i < m1; ++i) {
    const T yi = prep.mean + prep.obs_std * level1_z[i];
    path.push(prep, yi);
    const T branch_incumbent = max_scalar(incumbent, yi);
    path.query_batch(vars.subspan(d + i * batch * d, batch * d), batch, means, cov);
    cholesky_small(cov, batch);
    T inner(0.0);
    for (int s = 0; s < mc; ++s) {
      for (int a = 0; a < batch; ++a) {
        T acc = means[a];
        for (int b = 0; b <= a; ++b) acc += cov[a * batch + b] * mc_z(s, b);
        y[a] = acc;
      }
      T best = y[0];
      for (int a = 1; a < batch; ++a) best = max_scalar(best, y[a]);
      inner += w_mc * max_scalar(best - branch_incumbent, T(0.0));
    }
    total += level1_w[i] * inner;
    path.pop();
  }
  return total;
}

}  // namespace msbo
