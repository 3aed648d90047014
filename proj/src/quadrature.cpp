#include "msbo/quadrature.hpp"

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <cmath>
#include <stdexcept>

#include "msbo/rng.hpp"

namespace msbo {

GaussHermiteRule gauss_hermite_rule(int m) {
  if (m < 1) throw std::invalid_argument("gauss_hermite_rule: m must be >= 1");
  if (m > 64) throw std::invalid_argument("gauss_hermite_rule: m > 64 is numerically unstable");
  GaussHermiteRule rule;
  if (m == 1) {
    rule.nodes = Eigen::VectorXd::Zero(1);
    rule.weights = Eigen::VectorXd::Ones(1);
    return rule;
  }
  // Golub-Welsch on the Jacobi matrix of the probabilists' Hermite
  // recurrence He_{n+1}(z) = z He_n(z) - n He_{n-1}(z).
  Eigen::MatrixXd jacobi = Eigen::MatrixXd::Zero(m, m);
  for (int i = 1; i < m; ++i) {
    const double off = std::sqrt(static_cast<double>(i));
    jacobi(i, i - 1) = off;
    jacobi(i - 1, i) = off;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(jacobi);
  rule.nodes = eig.eigenvalues();
  rule.weights = eig.eigenvectors().row(0).array().square();

  // enforce the exact +/- symmetry of the rule
  for (int i = 0; i < m / 2; ++i) {
    const int j = m - 1 - i;
    const double node = 0.5 * (rule.nodes[j] - rule.nodes[i]);
    rule.nodes[i] = -node;
    rule.nodes[j] = node;
    const double w = 0.5 * (rule.weights[i] + rule.weights[j]);
    rule.weights[i] = rule.weights[j] = w;
  }
  if (m % 2 == 1) rule.nodes[m / 2] = 0.0;
  rule.weights /= rule.weights.sum();
  return rule;
}

Eigen::MatrixXd correlate(const Posterior& post, const Eigen::MatrixXd& z,
                          const JitterPolicy& policy) {
  const Eigen::Index q = post.mean.size();
  if (post.covariance.rows() != q || post.covariance.cols() != q)
    throw std::invalid_argument("correlate: posterior shape mismatch");
  if (z.cols() != q) throw std::invalid_argument("correlate: base sample width mismatch");
  const Eigen::MatrixXd root = root_decompose(post.covariance, policy);
  Eigen::MatrixXd out(z.rows(), q);
  for (Eigen::Index i = 0; i < z.rows(); ++i)
    out.row(i) = post.mean + root * z.row(i).transpose();
  return out;
}

BaseSampleTree draw_base_samples(const TreeLayout& layout, SampleMode mode, std::uint64_t seed) {
  layout.validate();
  BaseSampleTree tree;
  tree.mode = mode;
  tree.seed = seed;
  for (int t = 0; t < layout.horizon - 1; ++t) {
    const int m = layout.fantasies[t];
    if (mode == SampleMode::GaussHermite) {
      GaussHermiteRule rule = gauss_hermite_rule(m);
      tree.z.push_back(std::move(rule.nodes));
      tree.weights.push_back(std::move(rule.weights));
    } else {
      Rng rng(derive_seed(seed, 0x62617365ULL, t));
      Eigen::VectorXd z(m);
      for (int i = 0; i < m; ++i) z[i] = rng.normal();
      tree.z.push_back(std::move(z));
      tree.weights.push_back(Eigen::VectorXd::Constant(m, 1.0 / m));
    }
  }
  return tree;
}

}  // namespace msbo
