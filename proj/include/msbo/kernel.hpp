#pragma once

#include <Eigen/Core>
#include <cmath>
#include <span>
#include <stdexcept>

#include "msbo/dual.hpp"

namespace msbo {

/// ARD Matern 5/2 hyperparameters plus the constant mean and homoskedastic
/// observation noise. Positivity is validated here; optimization happens on
/// the log scale (see fit.cpp).
struct KernelHyperparams {
  Eigen::VectorXd lengthscales;  // one per input dimension, > 0
  double signal_variance = 1.0;  // > 0
  double noise_variance = 1e-6;  // >= 0
  double mean_constant = 0.0;

  int dim() const { return static_cast<int>(lengthscales.size()); }

  void validate() const {
    if (lengthscales.size() == 0) throw std::invalid_argument("kernel: empty lengthscales");
    for (int i = 0; i < lengthscales.size(); ++i)
      if (!(lengthscales[i] > 0.0)) throw std::invalid_argument("kernel: lengthscale must be > 0");
    if (!(signal_variance > 0.0)) throw std::invalid_argument("kernel: signal variance must be > 0");
    if (!(noise_variance >= 0.0)) throw std::invalid_argument("kernel: noise variance must be >= 0");
    if (!std::isfinite(mean_constant)) throw std::invalid_argument("kernel: non-finite mean");
  }
};

namespace detail {
constexpr double kSqrt5 = 2.2360679774997896964;
// Below this squared scaled distance the closed form is replaced by its
// series around zero, whose derivative w.r.t. s2 is finite (sqrt is not).
constexpr double kTinyS2 = 1e-24;
}  // namespace detail

/// Matern 5/2 value given the squared scaled distance s2 = sum((a-b)/l)^2.
template <class T>
inline T matern52_from_s2(const T& s2, double signal_variance) {
  using std::exp;
  using std::sqrt;
  if (value_of(s2) < detail::kTinyS2) {
    return signal_variance * (1.0 - (5.0 / 6.0) * s2);
  }
  const T r = sqrt(s2);
  return signal_variance * ((1.0 + detail::kSqrt5 * r + (5.0 / 3.0) * s2) * exp(-detail::kSqrt5 * r));
}

/// Kernel between two points; either side may carry dual-number coordinates.
template <class TA, class TB>
inline auto kernel_eval(std::span<const TA> a, std::span<const TB> b,
                        const KernelHyperparams& hp)
    -> decltype(std::declval<TA>() - std::declval<TB>()) {
  using R = decltype(std::declval<TA>() - std::declval<TB>());
  if (a.size() != b.size() || static_cast<int>(a.size()) != hp.dim())
    throw std::invalid_argument("kernel_eval: dimension mismatch");
  hp.validate();
  R s2(0.0);
  for (size_t i = 0; i < a.size(); ++i) {
    const R diff = (a[i] - b[i]) * (1.0 / hp.lengthscales[static_cast<int>(i)]);
    s2 += diff * diff;
  }
  return matern52_from_s2(s2, hp.signal_variance);
}

inline double kernel_eval(const Eigen::VectorXd& a, const Eigen::VectorXd& b,
                          const KernelHyperparams& hp) {
  return kernel_eval(std::span<const double>(a.data(), a.size()),
                     std::span<const double>(b.data(), b.size()), hp);
}

/// Gram matrix of the kernel over rows of X (no noise term).
Eigen::MatrixXd kernel_matrix(const Eigen::MatrixXd& x, const KernelHyperparams& hp);

/// Cross-kernel matrix between rows of X (n) and rows of Q (q): n x q.
Eigen::MatrixXd kernel_cross(const Eigen::MatrixXd& x, const Eigen::MatrixXd& q,
                             const KernelHyperparams& hp);

}  // namespace msbo
