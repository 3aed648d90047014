#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <vector>

#include "msbo/acquisition.hpp"
#include "msbo/rng.hpp"

namespace msbo {

/// Everything the next iteration needs to warm-start its tree optimization:
/// the previous one-shot solution, the level-1 fantasy outcomes it was built
/// on, and the outcome actually observed at the executed candidate. Fantasy
/// and observed values must be in the same units (the harness uses native y).
struct WarmStartState {
  TreeVariables solution;
  Eigen::VectorXd level1_fantasies;
  double observed = 0.0;
};

/// Level-1 branch whose fantasy outcome is nearest (absolute difference) to
/// the observed value; ties break to the lowest branch index.
int nearest_branch(const Eigen::VectorXd& fantasies, double observed);

/// Promotes the selected level-1 sub-tree of the previous solution into the
/// new layout: old level t+1 supplies new level t (tiling branch indices
/// cyclically when widths differ), and the vacated deepest level is filled
/// with uniform draws. Throws when the state cannot supply a root point.
TreeVariables promote_subtree(const WarmStartState& state, const TreeLayout& layout, Rng& rng);

/// Per-entry depth weights eta for a layout: level l (0-based from the root)
/// gets eta = 0.5 * l / k, replicated across that level's coordinates.
Eigen::VectorXd eta_for_layout(const TreeLayout& layout);

/// The perturbation formula applied exactly, entry by entry:
///   out_i = (1 - gamma) ((1 - eta_i) x*_i + eta_i beta_i) + gamma u_i.
Eigen::VectorXd warm_start_formula(const Eigen::VectorXd& promoted_flat, double gamma,
                                   const Eigen::VectorXd& eta, const Eigen::VectorXd& beta,
                                   const Eigen::VectorXd& u);

struct WarmStartInits {
  std::vector<Eigen::VectorXd> inits;
  bool fell_back = false;  // incompatible state: fresh uniform draws instead
};

/// N initializations from the promoted previous solution with gamma_r spaced
/// linearly over [0, 0.9], beta ~ Beta(1,3) and u ~ U[0,1] drawn from the
/// seed. Deterministic given (state, layout, seed).
WarmStartInits warm_start_init(const WarmStartState& state, int count, const TreeLayout& layout,
                               std::uint64_t seed);

}  // namespace msbo
