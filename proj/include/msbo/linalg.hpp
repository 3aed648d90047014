#pragma once

#include <Eigen/Core>

namespace msbo {

/// Jitter policy shared by every decomposition in the library: the floor is
/// 1e-6 * mean(diag), escalated by 10x at most three times.
struct JitterPolicy {
  double floor_scale = 1e-6;
  int max_escalations = 3;
  double escalation_factor = 10.0;
};

/// Exact lower-triangular root of a symmetric PSD matrix. Tries the plain
/// decomposition first so well-conditioned inputs reconstruct to machine
/// precision; jitter is added only when the factorization fails.
/// Throws std::runtime_error after the final escalation.
Eigen::MatrixXd root_decompose(const Eigen::MatrixXd& m, const JitterPolicy& policy = {},
                               double* jitter_used = nullptr);

/// Rank-limited pivoted Cholesky: returns an n x r root (original row order)
/// with R R^T approximating m from below. Used by the rank-reduced cache
/// configuration; the exact root above is the default everywhere else.
Eigen::MatrixXd partial_pivoted_cholesky(const Eigen::MatrixXd& m, int max_rank);

/// Pseudoinverse of a full-column-rank n x r root: (R^T R)^-1 R^T. For square
/// triangular roots this equals the triangular inverse.
Eigen::MatrixXd root_pseudoinverse(const Eigen::MatrixXd& root);

}  // namespace msbo
