#include "msbo/gp.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>

#include "msbo/optimizer.hpp"
#include "msbo/rng.hpp"

namespace msbo {

namespace {
constexpr double kLog2Pi = 1.8378770664093454836;
}

double Dataset::incumbent() const {
  if (size() == 0) throw std::invalid_argument("dataset: incumbent of empty dataset");
  return outcomes.maxCoeff();
}

void Dataset::validate() const {
  if (inputs.rows() != outcomes.size())
    throw std::invalid_argument("dataset: inputs/outcomes length mismatch");
  if (inputs.size() > 0 && (inputs.minCoeff() < -1e-12 || inputs.maxCoeff() > 1.0 + 1e-12))
    throw std::invalid_argument("dataset: inputs outside the unit box");
  for (int i = 0; i < outcomes.size(); ++i)
    if (!std::isfinite(outcomes[i])) throw std::invalid_argument("dataset: non-finite outcome");
}

Eigen::MatrixXd kernel_matrix(const Eigen::MatrixXd& x, const KernelHyperparams& hp) {
  hp.validate();
  const int n = static_cast<int>(x.rows());
  Eigen::MatrixXd k(n, n);
  for (int i = 0; i < n; ++i) {
    k(i, i) = hp.signal_variance;
    for (int j = 0; j < i; ++j) {
      double s2 = 0.0;
      for (int c = 0; c < x.cols(); ++c) {
        const double diff = (x(i, c) - x(j, c)) / hp.lengthscales[c];
        s2 += diff * diff;
      }
      k(i, j) = k(j, i) = matern52_from_s2(s2, hp.signal_variance);
    }
  }
  return k;
}

Eigen::MatrixXd kernel_cross(const Eigen::MatrixXd& x, const Eigen::MatrixXd& q,
                             const KernelHyperparams& hp) {
  hp.validate();
  Eigen::MatrixXd k(x.rows(), q.rows());
  for (int i = 0; i < x.rows(); ++i)
    for (int j = 0; j < q.rows(); ++j) {
      double s2 = 0.0;
      for (int c = 0; c < x.cols(); ++c) {
        const double diff = (x(i, c) - q(j, c)) / hp.lengthscales[c];
        s2 += diff * diff;
      }
      k(i, j) = matern52_from_s2(s2, hp.signal_variance);
    }
  return k;
}

GpModel make_gp_model(Dataset data, KernelHyperparams hp, std::optional<int> max_rank) {
  data.validate();
  hp.validate();
  if (data.size() > 0 && data.dim() != hp.dim())
    throw std::invalid_argument("gp: dataset/hyperparameter dimension mismatch");

  GpModel model;
  model.data = std::move(data);
  model.hp = std::move(hp);
  const int n = model.size();
  Eigen::MatrixXd noisy = kernel_matrix(model.data.inputs, model.hp);
  noisy.diagonal().array() += model.hp.noise_variance;
  if (max_rank && *max_rank < n) {
    model.root = partial_pivoted_cholesky(noisy, *max_rank);
  } else {
    model.root = root_decompose(noisy);
  }
  model.root_pinv = root_pseudoinverse(model.root);
  const Eigen::VectorXd resid =
      model.data.outcomes.array() - model.hp.mean_constant;
  model.solved_resid = model.root_pinv * resid;
  model.alpha = model.root_pinv.transpose() * model.solved_resid;
  return model;
}

Posterior posterior(const GpModel& model, const Eigen::MatrixXd& points) {
  if (points.cols() != model.hp.dim())
    throw std::invalid_argument("posterior: query dimension mismatch");
  const int q = static_cast<int>(points.rows());
  Posterior post;
  Eigen::MatrixXd prior = kernel_matrix(points, model.hp);
  if (model.size() == 0) {
    post.mean = Eigen::VectorXd::Constant(q, model.hp.mean_constant);
    post.covariance = std::move(prior);
    return post;
  }
  const Eigen::MatrixXd cross = kernel_cross(model.data.inputs, points, model.hp);  // n x q
  const Eigen::MatrixXd v = model.root_pinv * cross;                                // r x q
  post.mean = Eigen::VectorXd::Constant(q, model.hp.mean_constant) + cross.transpose() * model.alpha;
  post.covariance = prior - v.transpose() * v;
  post.covariance = 0.5 * (post.covariance + post.covariance.transpose()).eval();
  return post;
}

namespace {

struct EvidenceTerms {
  double value;
  Eigen::VectorXd alpha;
  Eigen::MatrixXd kinv;  // only filled when gradient is requested
};

EvidenceTerms evidence_terms(const Dataset& data, const KernelHyperparams& hp,
                             bool with_inverse) {
  const int n = data.size();
  Eigen::MatrixXd noisy = kernel_matrix(data.inputs, hp);
  noisy.diagonal().array() += hp.noise_variance;
  Eigen::MatrixXd root = root_decompose(noisy);
  const Eigen::VectorXd resid = data.outcomes.array() - hp.mean_constant;
  const Eigen::VectorXd half = root.triangularView<Eigen::Lower>().solve(resid);
  EvidenceTerms t;
  t.alpha = root.transpose().triangularView<Eigen::Upper>().solve(half);
  double logdet = 0.0;
  for (int i = 0; i < n; ++i) logdet += 2.0 * std::log(root(i, i));
  t.value = -0.5 * half.squaredNorm() - 0.5 * logdet - 0.5 * n * kLog2Pi;
  if (with_inverse) {
    Eigen::MatrixXd rinv =
        root.triangularView<Eigen::Lower>().solve(Eigen::MatrixXd::Identity(n, n));
    t.kinv = rinv.transpose() * rinv;
  }
  return t;
}

}  // namespace

double log_evidence(const Dataset& data, const KernelHyperparams& hp) {
  data.validate();
  hp.validate();
  if (data.size() < 1) throw std::invalid_argument("log_evidence: empty dataset");
  return evidence_terms(data, hp, false).value;
}

namespace {

Eigen::VectorXd gradient_from_terms(const Dataset& data, const KernelHyperparams& hp,
                                    const EvidenceTerms& t) {
  const int n = data.size();
  const int d = hp.dim();
  // dL/dtheta = 0.5 tr((alpha alpha^T - K^-1) dK/dtheta) for covariance
  // parameters; the mean enters linearly.
  const Eigen::MatrixXd outer = t.alpha * t.alpha.transpose() - t.kinv;

  Eigen::VectorXd grad(d + 3);
  const Eigen::MatrixXd& x = data.inputs;
  for (int c = 0; c < d; ++c) grad[c] = 0.0;
  double trace_signal = 0.0;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j <= i; ++j) {
      const double w = (i == j) ? outer(i, i) : 2.0 * outer(i, j);
      double s2 = 0.0;
      for (int c = 0; c < d; ++c) {
        const double diff = (x(i, c) - x(j, c)) / hp.lengthscales[c];
        s2 += diff * diff;
      }
      const double r = std::sqrt(s2);
      const double e = std::exp(-detail::kSqrt5 * r);
      // d k / d log l_c = sf2 * (5/3) (1 + sqrt5 r) exp(-sqrt5 r) * diff_c^2
      const double common = hp.signal_variance * (5.0 / 3.0) * (1.0 + detail::kSqrt5 * r) * e;
      for (int c = 0; c < d; ++c) {
        const double diff = (x(i, c) - x(j, c)) / hp.lengthscales[c];
        grad[c] += 0.5 * w * common * diff * diff;
      }
      // d k / d log sf2 = k
      const double kij = matern52_from_s2(s2, hp.signal_variance);
      trace_signal += 0.5 * w * kij;
    }
  }
  grad[d] = trace_signal;
  // d (K + sn2 I) / d log sn2 = sn2 I
  grad[d + 1] = 0.5 * hp.noise_variance * outer.trace();
  // d L / d mean = 1^T alpha
  grad[d + 2] = t.alpha.sum();
  return grad;
}

}  // namespace

Eigen::VectorXd log_evidence_gradient(const Dataset& data, const KernelHyperparams& hp) {
  return gradient_from_terms(data, hp, evidence_terms(data, hp, true));
}

namespace {

KernelHyperparams unpack_params(const Eigen::VectorXd& p, int d) {
  KernelHyperparams hp;
  hp.lengthscales = p.head(d).array().exp();
  hp.signal_variance = std::exp(p[d]);
  hp.noise_variance = std::exp(p[d + 1]);
  hp.mean_constant = p[d + 2];
  return hp;
}

Eigen::VectorXd pack_params(const KernelHyperparams& hp) {
  const int d = hp.dim();
  Eigen::VectorXd p(d + 3);
  p.head(d) = hp.lengthscales.array().log();
  p[d] = std::log(hp.signal_variance);
  p[d + 1] = std::log(hp.noise_variance);
  p[d + 2] = hp.mean_constant;
  return p;
}

}  // namespace

KernelHyperparams fit_hyperparameters(const Dataset& data, const FitConfig& cfg) {
  data.validate();
  if (data.size() < 2) throw std::invalid_argument("fit_hyperparameters: need at least 2 points");
  const int d = data.dim();
  const int np = d + 3;

  Eigen::VectorXd lower(np), upper(np);
  for (int c = 0; c < d; ++c) {
    lower[c] = std::log(cfg.lengthscale_lo);
    upper[c] = std::log(cfg.lengthscale_hi);
  }
  lower[d] = std::log(cfg.signal_lo);
  upper[d] = std::log(cfg.signal_hi);
  lower[d + 1] = std::log(cfg.noise_lo);
  upper[d + 1] = std::log(cfg.noise_hi);
  const double mean_center = data.outcomes.mean();
  lower[d + 2] = mean_center - cfg.mean_halfwidth;
  upper[d + 2] = mean_center + cfg.mean_halfwidth;

  ValueAndGradFn fg = [&](std::span<const double> p, std::span<double> grad) {
    const Eigen::Map<const Eigen::VectorXd> pv(p.data(), static_cast<Eigen::Index>(p.size()));
    KernelHyperparams hp = unpack_params(pv, d);
    const EvidenceTerms t = evidence_terms(data, hp, true);
    const Eigen::VectorXd g = gradient_from_terms(data, hp, t);
    for (int i = 0; i < g.size(); ++i) grad[i] = g[i];
    double value = t.value;
    if (cfg.lengthscale_prior) {
      // Gamma(3, 6): log p(l) = 2 log l - 6 l + const; in log-l coordinates
      // the gradient is 2 - 6 l
      for (int c = 0; c < d; ++c) {
        value += 2.0 * std::log(hp.lengthscales[c]) - 6.0 * hp.lengthscales[c];
        grad[c] += 2.0 - 6.0 * hp.lengthscales[c];
      }
    }
    return value;
  };

  std::vector<Eigen::VectorXd> inits;
  Rng rng(derive_seed(cfg.seed, 0x66697453ULL));
  for (int r = 0; r < cfg.restarts; ++r) {
    Eigen::VectorXd p(np);
    for (int c = 0; c < d; ++c) p[c] = std::log(rng.log_uniform(cfg.lengthscale_lo, cfg.lengthscale_hi));
    p[d] = std::log(rng.log_uniform(std::max(cfg.signal_lo, 1e-2), std::min(cfg.signal_hi, 1e2)));
    p[d + 1] = std::log(rng.log_uniform(cfg.noise_lo, cfg.noise_hi));
    p[d + 2] = mean_center;
    inits.push_back(std::move(p));
  }
  if (cfg.warm_start) {
    Eigen::VectorXd p = pack_params(*cfg.warm_start);
    for (int i = 0; i < np; ++i) p[i] = std::min(std::max(p[i], lower[i]), upper[i]);
    inits.push_back(std::move(p));
  }

  OptimizerConfig opt;
  opt.max_iters = cfg.max_iters;
  opt.grad_tol = cfg.grad_tol;
  const BoxResult res = maximize_box(fg, lower, upper, inits, opt);
  return unpack_params(res.x, d);
}

}  // namespace msbo
