#include "msbo/linalg.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <sstream>
#include <stdexcept>

namespace msbo {

Eigen::MatrixXd root_decompose(const Eigen::MatrixXd& m, const JitterPolicy& policy,
                               double* jitter_used) {
  if (m.rows() != m.cols()) throw std::invalid_argument("root_decompose: matrix not square");
  const Eigen::Index n = m.rows();
  if (n == 0) {
    if (jitter_used) *jitter_used = 0.0;
    return Eigen::MatrixXd(0, 0);
  }
  if (((m - m.transpose()).cwiseAbs().maxCoeff()) > 1e-8 * (1.0 + m.cwiseAbs().maxCoeff()))
    throw std::invalid_argument("root_decompose: matrix not symmetric");

  const double diag_mean = m.diagonal().mean();
  double jitter = 0.0;
  for (int attempt = 0; attempt <= policy.max_escalations + 1; ++attempt) {
    Eigen::MatrixXd work = m;
    if (jitter > 0.0) work.diagonal().array() += jitter;
    Eigen::LLT<Eigen::MatrixXd> llt(work);
    if (llt.info() == Eigen::Success) {
      if (jitter_used) *jitter_used = jitter;
      return llt.matrixL();
    }
    jitter = (jitter == 0.0) ? policy.floor_scale * std::abs(diag_mean)
                             : jitter * policy.escalation_factor;
    if (jitter == 0.0) jitter = policy.floor_scale;  // zero-diagonal input
  }
  std::ostringstream msg;
  msg << "root_decompose: factorization failed after jitter escalation (final jitter " << jitter
      << "); kernel matrix is ill-conditioned";
  throw std::runtime_error(msg.str());
}

Eigen::MatrixXd partial_pivoted_cholesky(const Eigen::MatrixXd& m, int max_rank) {
  if (m.rows() != m.cols()) throw std::invalid_argument("pivoted cholesky: matrix not square");
  const int n = static_cast<int>(m.rows());
  const int r = std::min(max_rank, n);
  Eigen::MatrixXd root = Eigen::MatrixXd::Zero(n, r);
  Eigen::VectorXd diag = m.diagonal();
  std::vector<int> order(n);
  for (int i = 0; i < n; ++i) order[i] = i;

  const double pivot_floor = 1e-12 * m.diagonal().maxCoeff();
  for (int k = 0; k < r; ++k) {
    int pivot = k;
    for (int i = k; i < n; ++i)
      if (diag[order[i]] > diag[order[pivot]]) pivot = i;
    std::swap(order[k], order[pivot]);
    const int pk = order[k];
    const double dk = diag[pk];
    if (dk <= pivot_floor) return root.leftCols(k).eval();
    const double lkk = std::sqrt(dk);
    root(pk, k) = lkk;
    for (int i = k + 1; i < n; ++i) {
      const int pi = order[i];
      double v = m(pi, pk);
      for (int j = 0; j < k; ++j) v -= root(pi, j) * root(pk, j);
      root(pi, k) = v / lkk;
      diag[pi] -= root(pi, k) * root(pi, k);
    }
  }
  return root;
}

Eigen::MatrixXd root_pseudoinverse(const Eigen::MatrixXd& root) {
  const Eigen::Index n = root.rows(), r = root.cols();
  if (r == 0 || n == 0) return Eigen::MatrixXd(r, n);
  const bool lower_triangular =
      n == r && root.triangularView<Eigen::StrictlyUpper>().toDenseMatrix().cwiseAbs().maxCoeff() == 0.0;
  if (lower_triangular) {
    return root.triangularView<Eigen::Lower>().solve(Eigen::MatrixXd::Identity(n, n));
  }
  Eigen::MatrixXd gram = root.transpose() * root;  // r x r, SPD for full column rank
  Eigen::LLT<Eigen::MatrixXd> llt(gram);
  if (llt.info() != Eigen::Success)
    throw std::runtime_error("root_pseudoinverse: rank-deficient root");
  return llt.solve(root.transpose());
}

}  // namespace msbo
