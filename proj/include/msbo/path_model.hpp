#pragma once

#include <cmath>
#include <span>
#include <stdexcept>
#include <vector>

#include "msbo/dual.hpp"
#include "msbo/gp.hpp"

namespace msbo {

/// Conditioning stack for tree evaluation: a single root-to-node path of the
/// lookahead tree, conditioned one point per step on top of a shared base
/// model. The scalar type T is double for plain evaluation and a dual number
/// for gradients; the base caches always stay double because they do not
/// depend on the decision variables.
///
/// The algebra is the rank-one case of the block cache update: pushing point
/// x appends the pseudoinverse row [-w/l22 | 1/l22] with w = R^-T R^-1 k(.,x)
/// and keeps the weight vector alpha = (K+noise)^-1 (y-mean) incrementally
/// up to date, so a query costs O((n+depth) r) and no per-branch copy of the
/// base cache is ever made.
template <class T>
class PathModel {
 public:
  explicit PathModel(const GpModel& base) : base_(&base) {
    const int n = base.size();
    alpha_.resize(n);
    for (int i = 0; i < n; ++i) alpha_[i] = T(base.alpha[i]);
    prior_obs_var_ = base.hp.signal_variance + base.hp.noise_variance;
  }

  /// Everything prepare() computes about a candidate point before pushing:
  /// the observation posterior there plus the blocks a push would store.
  struct Prepared {
    std::vector<T> x;         // the point itself (d)
    std::vector<T> kvec;      // kernel stack vs all conditioning points
    std::vector<T> pinv_row;  // [-w/l22 | 1/l22], length points()+1
    T mean;                   // observation posterior mean
    T obs_var;                // observation posterior variance (incl. noise)
    T obs_std;
  };

  int depth() const { return static_cast<int>(levels_.size()); }
  int points() const { return base_->size() + depth(); }
  const GpModel& base() const { return *base_; }

  /// with_push_blocks=false skips the pseudoinverse row (leaf queries never
  /// push, and the row costs another O(n r) pass).
  Prepared prepare(std::span<const T> x, bool with_push_blocks = true) const {
    using std::sqrt;
    const GpModel& base = *base_;
    const int n = base.size();
    const int t = depth();
    const int r = base.rank();
    if (static_cast<int>(x.size()) != base.hp.dim())
      throw std::invalid_argument("path model: point dimension mismatch");

    Prepared prep;
    prep.x.assign(x.begin(), x.end());
    // kernel stack against base points (double) and path points (T)
    prep.kvec.resize(n + t);
    for (int i = 0; i < n; ++i) {
      const auto row = base.data.inputs.row(i);
      T s2(0.0);
      for (int c = 0; c < base.hp.dim(); ++c) {
        const T diff = (x[c] - row[c]) * (1.0 / base.hp.lengthscales[c]);
        s2 += diff * diff;
      }
      prep.kvec[i] = matern52_from_s2(s2, base.hp.signal_variance);
    }
    for (int s = 0; s < t; ++s) {
      T s2(0.0);
      for (int c = 0; c < base.hp.dim(); ++c) {
        const T diff = (x[c] - levels_[s].x[c]) * (1.0 / base.hp.lengthscales[c]);
        s2 += diff * diff;
      }
      prep.kvec[n + s] = matern52_from_s2(s2, base.hp.signal_variance);
    }

    // v = R^-1 k through the chained pseudoinverse rows
    std::vector<T> v(r + t);
    for (int i = 0; i < r; ++i)
      v[i] = dot_double_rowmajor(base.root_pinv, i, prep.kvec.data(), n);
    for (int s = 0; s < t; ++s) {
      const auto& row = levels_[s].pinv_row;
      T acc(0.0);
      for (size_t j = 0; j < row.size(); ++j) acc += row[j] * prep.kvec[j];
      v[r + s] = acc;
    }

    T v2(0.0);
    for (const T& vi : v) v2 += vi * vi;
    prep.obs_var = prior_obs_var_ - v2;
    const double floor = 1e-12 * prior_obs_var_;
    if (value_of(prep.obs_var) < floor) prep.obs_var = T(floor);
    prep.obs_std = sqrt(prep.obs_var);

    // mean = mean_const + k^T alpha
    T mean(base.hp.mean_constant);
    for (int i = 0; i < n + t; ++i) mean += prep.kvec[i] * alpha_[i];
    prep.mean = mean;
    if (!with_push_blocks) return prep;

    // w = R^-T v, then the pseudoinverse row of a push
    std::vector<T> w(n + t, T(0.0));
    for (int jcol = 0; jcol < n; ++jcol) {
      T acc(0.0);
      for (int i = 0; i < r; ++i) acc += base.root_pinv(i, jcol) * v[i];
      w[jcol] = acc;
    }
    for (int s = 0; s < t; ++s) {
      const auto& row = levels_[s].pinv_row;
      const T& vs = v[r + s];
      for (size_t j = 0; j < row.size(); ++j) w[j] += row[j] * vs;
    }
    prep.pinv_row.resize(n + t + 1);
    const T inv_l22 = 1.0 / prep.obs_std;
    for (int i = 0; i < n + t; ++i) prep.pinv_row[i] = -(w[i] * inv_l22);
    prep.pinv_row[n + t] = inv_l22;
    return prep;
  }

  /// Condition on (prep.x, y). The observation posterior used to generate y
  /// must be the one prepare() returned for the same point.
  void push(const Prepared& prep, const T& y) {
    const GpModel& base = *base_;
    const int n = base.size();
    const int t = depth();
    Level level;
    level.x = prep.x;
    level.pinv_row = prep.pinv_row;
    level.resid = y - base.hp.mean_constant;
    level.alpha_snapshot = alpha_;

    // u_plus = P * (residuals, new residual)
    T u_plus(0.0);
    for (int i = 0; i < n; ++i)
      u_plus += prep.pinv_row[i] * (base.data.outcomes[i] - base.hp.mean_constant);
    for (int s = 0; s < t; ++s) u_plus += prep.pinv_row[n + s] * levels_[s].resid;
    u_plus += prep.pinv_row[n + t] * level.resid;

    alpha_.resize(n + t + 1);
    for (int i = 0; i < n + t; ++i) alpha_[i] += u_plus * prep.pinv_row[i];
    alpha_[n + t] = u_plus * prep.pinv_row[n + t];
    levels_.push_back(std::move(level));
  }

  void pop() {
    if (levels_.empty()) throw std::logic_error("path model: pop on empty path");
    alpha_ = levels_.back().alpha_snapshot;
    levels_.pop_back();
  }

  /// Observation posterior over a batch of points under the current path:
  /// means plus the covariance (noise included) in row-major order.
  void query_batch(std::span<const T> points_flat, int q, std::vector<T>& means,
                   std::vector<T>& obs_cov) const {
    const GpModel& base = *base_;
    const int d = base.hp.dim();
    const int n = base.size();
    const int t = depth();
    const int r = base.rank();
    if (static_cast<int>(points_flat.size()) != q * d)
      throw std::invalid_argument("path model: batch size mismatch");

    std::vector<std::vector<T>> vs(q);
    means.assign(q, T(0.0));
    for (int a = 0; a < q; ++a) {
      Prepared prep = prepare(points_flat.subspan(a * d, d), /*with_push_blocks=*/false);
      means[a] = prep.mean;
      // recover v from the prepared row: v entries are not stored, so redo
      // the pinv application here (cheap relative to kernel evaluation)
      vs[a].resize(r + t);
      for (int i = 0; i < r; ++i)
        vs[a][i] = dot_double_rowmajor(base.root_pinv, i, prep.kvec.data(), n);
      for (int s = 0; s < t; ++s) {
        const auto& row = levels_[s].pinv_row;
        T acc(0.0);
        for (size_t j = 0; j < row.size(); ++j) acc += row[j] * prep.kvec[j];
        vs[a][r + s] = acc;
      }
    }

    obs_cov.assign(q * q, T(0.0));
    for (int a = 0; a < q; ++a) {
      for (int b = 0; b <= a; ++b) {
        T prior(0.0);
        if (a == b) {
          prior = T(base.hp.signal_variance + base.hp.noise_variance);
        } else {
          T s2(0.0);
          for (int c = 0; c < d; ++c) {
            const T diff =
                (points_flat[a * d + c] - points_flat[b * d + c]) * (1.0 / base.hp.lengthscales[c]);
            s2 += diff * diff;
          }
          prior = matern52_from_s2(s2, base.hp.signal_variance);
        }
        T dotv(0.0);
        for (int i = 0; i < r + t; ++i) dotv += vs[a][i] * vs[b][i];
        obs_cov[a * q + b] = prior - dotv;
        obs_cov[b * q + a] = obs_cov[a * q + b];
      }
    }
  }

 private:
  struct Level {
    std::vector<T> x;
    std::vector<T> pinv_row;
    T resid;
    std::vector<T> alpha_snapshot;
  };

  static T dot_double_rowmajor(const Eigen::MatrixXd& m, int row, const T* v, int len) {
    T acc(0.0);
    for (int j = 0; j < len; ++j) acc += m(row, j) * v[j];
    return acc;
  }

  const GpModel* base_;
  std::vector<Level> levels_;
  std::vector<T> alpha_;
  double prior_obs_var_ = 1.0;
};

/// In-place lower Cholesky of a q x q row-major matrix of scalars T, with a
/// diagonal jitter retry mirroring the dense-path policy. Throws on failure.
template <class T>
void cholesky_small(std::vector<T>& a, int q, const JitterPolicy& policy = {}) {
  using std::sqrt;
  double mean_diag = 0.0;
  for (int i = 0; i < q; ++i) mean_diag += value_of(a[i * q + i]);
  mean_diag /= q;
  std::vector<T> original = a;
  double jitter = 0.0;
  for (int attempt = 0; attempt <= policy.max_escalations + 1; ++attempt) {
    bool ok = true;
    a = original;
    if (jitter > 0.0)
      for (int i = 0; i < q; ++i) a[i * q + i] += jitter;
    for (int i = 0; i < q && ok; ++i) {
      for (int j = 0; j <= i; ++j) {
        T sum = a[i * q + j];
        for (int c = 0; c < j; ++c) sum -= a[i * q + c] * a[j * q + c];
        if (i == j) {
          if (!(value_of(sum) > 0.0)) {
            ok = false;
            break;
          }
          a[i * q + i] = sqrt(sum);
        } else {
          a[i * q + j] = sum / a[j * q + j];
        }
      }
    }
    if (ok) {
      for (int i = 0; i < q; ++i)
        for (int j = i + 1; j < q; ++j) a[i * q + j] = T(0.0);
      return;
    }
    jitter = (jitter == 0.0) ? policy.floor_scale * std::abs(mean_diag)
                             : jitter * policy.escalation_factor;
    if (jitter == 0.0) jitter = policy.floor_scale;
  }
  throw std::runtime_error("cholesky_small: covariance not positive definite after jitter");
}

}  // namespace msbo
