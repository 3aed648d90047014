#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include "msbo/gp.hpp"

namespace msbo {

/// Blocks of the augmented root decomposition
///   [[K~, U], [U^T, S]] ~= [[R, 0], [L12, L22]] [[R, 0], [L12, L22]]^T
/// together with the pseudoinverse update row-block
///   P = [-L22^-1 L12 R^-1 | L22^-1].
/// Only P has to be kept to answer posterior queries and to chain further
/// updates; L12/L22 are returned for verification and one-off use.
struct CacheUpdateBlocks {
  Eigen::MatrixXd l12;       // q x r
  Eigen::MatrixXd l22;       // q x q, lower triangular, positive diagonal
  Eigen::MatrixXd pinv_row;  // q x (n + q)
};

/// Incremental block update of a root decomposition and its pseudoinverse.
/// Cost is O(n r q); a from-scratch re-decomposition would be O((n+q)^3).
/// Throws std::runtime_error when S - L12 L12^T is indefinite beyond the
/// jitter policy (inconsistent covariance inputs).
CacheUpdateBlocks update_root_cache(const Eigen::MatrixXd& root,
                                    const Eigen::MatrixXd& root_pinv,
                                    const Eigen::MatrixXd& u, const Eigen::MatrixXd& s,
                                    const JitterPolicy& policy = {});

/// Entry counts of the naive and fast fantasy caches for a k-step chain
/// with per-step batch sizes q_t and fantasy counts m_t (t = 0..k-1):
///   N_naive = nr + sum_t prod_{tau<=t} m_tau (n + cumq_t)(r + cumq_t)
///   N_FF    = nr + sum_t prod_{tau<t}  m_tau q_t (r + cumq_t)
struct CacheSizes {
  std::uint64_t naive = 0;
  std::uint64_t fast = 0;
};
CacheSizes cache_size_accounting(int n, int r, int k, std::span<const int> q_per_step,
                                 std::span<const int> m_per_step);

struct ChainPath;

/// A batched GP conditioned on fantasized outcomes. Each fantasize step adds
/// one batch dimension; level t keeps one pseudoinverse row-block per tree
/// node and shares the base cache across all branches, so the stored cache
/// entry count is exactly the fast-fantasy budget N_FF.
class FantasyModel {
 public:
  /// Condition a base model. locations is q x d (one node) and outcomes is
  /// m x q (m fantasy branches).
  static FantasyModel fantasize(std::shared_ptr<const GpModel> base,
                                const Eigen::MatrixXd& locations,
                                const Eigen::MatrixXd& outcomes,
                                const JitterPolicy& policy = {});

  /// Condition this model one level deeper. locations is (nodes*q) x d with
  /// nodes = current branch count (or q x d, broadcast to every node);
  /// outcomes is (nodes*m) x q, branch-major.
  FantasyModel fantasize(const Eigen::MatrixXd& locations, const Eigen::MatrixXd& outcomes,
                         const JitterPolicy& policy = {}) const;

  /// Posterior at query points under one branch, identified by one branch
  /// index per level. Matches a freshly conditioned flat model on the same
  /// path data up to jitter-free algebra.
  Posterior posterior_at_branch(std::span<const int> branch,
                                const Eigen::MatrixXd& points) const;

  /// Branch counts per level (m_1..m_t).
  const std::vector<int>& batch_shape() const { return batch_shape_; }
  int levels() const { return static_cast<int>(levels_.size()); }

  /// Stored cache entries of the fast path: base pseudoinverse plus every
  /// per-node update row-block. Equals N_FF for exact (r = n) roots.
  std::uint64_t cache_entry_count() const;

  const GpModel& base() const { return *base_; }

 private:
  struct Level {
    Eigen::MatrixXd locations;               // (nodes*q) x d
    std::vector<Eigen::MatrixXd> pinv_rows;  // per node: q x (n_prev + q)
    Eigen::MatrixXd outcomes;                // branches x q, branch-major
    int q = 0, nodes = 0, m = 0;
  };

  std::shared_ptr<const GpModel> base_;
  std::vector<std::shared_ptr<const Level>> levels_;
  std::vector<int> batch_shape_;

  ChainPath branch_path(std::span<const int> branch, bool with_outcomes) const;
};

/// Algorithm-style free functions mirroring the recursion's FANTASIZE step.
FantasyModel fantasize(std::shared_ptr<const GpModel> model, const Eigen::MatrixXd& locations,
                       const Eigen::MatrixXd& outcomes, const JitterPolicy& policy = {});
FantasyModel fantasize(const FantasyModel& model, const Eigen::MatrixXd& locations,
                       const Eigen::MatrixXd& outcomes, const JitterPolicy& policy = {});

}  // namespace msbo
