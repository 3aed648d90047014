#include "msbo/warm_start.hpp"

#include <cmath>
#include <stdexcept>

namespace msbo {

int nearest_branch(const Eigen::VectorXd& fantasies, double observed) {
  if (fantasies.size() == 0) throw std::invalid_argument("nearest_branch: no fantasy outcomes");
  int best = 0;
  double best_dist = std::abs(fantasies[0] - observed);
  for (int i = 1; i < fantasies.size(); ++i) {
    const double dist = std::abs(fantasies[i] - observed);
    if (dist < best_dist) {
      best = i;
      best_dist = dist;
    }
  }
  return best;
}

TreeVariables promote_subtree(const WarmStartState& state, const TreeLayout& layout, Rng& rng) {
  layout.validate();
  const TreeLayout& old_layout = state.solution.layout;
  if (old_layout.dim != layout.dim)
    throw std::invalid_argument("promote_subtree: dimension mismatch");
  if (old_layout.horizon < 2)
    throw std::invalid_argument("promote_subtree: previous solution has no sub-trees");
  if (state.solution.flat.size() != old_layout.variable_count())
    throw std::invalid_argument("promote_subtree: stale solution shape");

  const int d = layout.dim;
  const int star = nearest_branch(state.level1_fantasies, state.observed);

  TreeVariables out;
  out.layout = layout;
  out.flat.resize(layout.variable_count());
  for (int t = 1; t <= layout.horizon; ++t) {
    const int nodes = layout.nodes_at_level(t);
    const bool have_source = t + 1 <= old_layout.horizon;
    for (int node = 0; node < nodes; ++node) {
      const int offset = layout.slice_offset(t, node);
      if (!have_source) {
        for (int c = 0; c < d; ++c) out.flat[offset + c] = rng.uniform();
        continue;
      }
      // new node path (a_1..a_{t-1}) maps to old path (star, a_1, .., a_{t-1})
      // with each index tiled cyclically into the old level's branch widths
      int remaining = node;
      std::vector<int> path(t - 1);
      for (int i = t - 2; i >= 0; --i) {
        path[i] = remaining % layout.fantasies[i];
        remaining /= layout.fantasies[i];
      }
      int old_node = star;
      for (int i = 0; i < t - 1; ++i) old_node = old_node * old_layout.fantasies[i + 1] +
                                                 (path[i] % old_layout.fantasies[i + 1]);
      const int src = old_layout.slice_offset(t + 1, old_node);
      for (int c = 0; c < d; ++c) out.flat[offset + c] = state.solution.flat[src + c];
    }
  }
  return out;
}

Eigen::VectorXd eta_for_layout(const TreeLayout& layout) {
  Eigen::VectorXd eta(layout.variable_count());
  for (int t = 1; t <= layout.horizon; ++t) {
    const double value = 0.5 * static_cast<double>(t - 1) / layout.horizon;
    const int offset = layout.level_offset(t);
    const int count = layout.nodes_at_level(t) * layout.dim;
    eta.segment(offset, count).setConstant(value);
  }
  return eta;
}

Eigen::VectorXd warm_start_formula(const Eigen::VectorXd& promoted_flat, double gamma,
                                   const Eigen::VectorXd& eta, const Eigen::VectorXd& beta,
                                   const Eigen::VectorXd& u) {
  const Eigen::Index n = promoted_flat.size();
  if (eta.size() != n || beta.size() != n || u.size() != n)
    throw std::invalid_argument("warm_start_formula: tensor shape mismatch");
  Eigen::VectorXd out(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    out[i] = (1.0 - gamma) * ((1.0 - eta[i]) * promoted_flat[i] + eta[i] * beta[i]) + gamma * u[i];
  }
  return out;
}

WarmStartInits warm_start_init(const WarmStartState& state, int count, const TreeLayout& layout,
                               std::uint64_t seed) {
  layout.validate();
  if (count < 1) throw std::invalid_argument("warm_start_init: count must be >= 1");
  WarmStartInits out;
  Rng rng(derive_seed(seed, 0x7761726dULL));

  TreeVariables promoted;
  try {
    promoted = promote_subtree(state, layout, rng);
  } catch (const std::invalid_argument&) {
    out.fell_back = true;
    for (int r = 0; r < count; ++r) {
      Eigen::VectorXd x(layout.variable_count());
      for (int i = 0; i < x.size(); ++i) x[i] = rng.uniform();
      out.inits.push_back(std::move(x));
    }
    return out;
  }

  const Eigen::VectorXd eta = eta_for_layout(layout);
  const int n = layout.variable_count();
  for (int r = 0; r < count; ++r) {
    const double gamma = count > 1 ? 0.9 * static_cast<double>(r) / (count - 1) : 0.0;
    Eigen::VectorXd beta(n), u(n);
    for (int i = 0; i < n; ++i) beta[i] = rng.beta1(3.0);
    for (int i = 0; i < n; ++i) u[i] = rng.uniform();
    out.inits.push_back(warm_start_formula(promoted.flat, gamma, eta, beta, u));
  }
  return out;
}

}  // namespace msbo
