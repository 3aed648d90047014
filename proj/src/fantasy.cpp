#include "msbo/fantasy.hpp"

#include <Eigen/Dense>
#include <stdexcept>

namespace msbo {

CacheUpdateBlocks update_root_cache(const Eigen::MatrixXd& root, const Eigen::MatrixXd& root_pinv,
                                    const Eigen::MatrixXd& u, const Eigen::MatrixXd& s,
                                    const JitterPolicy& policy) {
  const Eigen::Index n = root.rows();
  const Eigen::Index r = root.cols();
  const Eigen::Index q = u.cols();
  if (root_pinv.rows() != r || root_pinv.cols() != n)
    throw std::invalid_argument("update_root_cache: pseudoinverse shape mismatch");
  if (u.rows() != n) throw std::invalid_argument("update_root_cache: U must be n x q");
  if (s.rows() != q || s.cols() != q)
    throw std::invalid_argument("update_root_cache: S must be q x q");
  if (q > 0 && (s - s.transpose()).cwiseAbs().maxCoeff() > 1e-8 * (1.0 + s.cwiseAbs().maxCoeff()))
    throw std::invalid_argument("update_root_cache: S not symmetric");

  CacheUpdateBlocks blocks;
  const Eigen::MatrixXd l12_t = root_pinv * u;  // r x q (least-squares solve via the cache)
  blocks.l12 = l12_t.transpose();
  const Eigen::MatrixXd schur = s - blocks.l12 * l12_t;
  try {
    blocks.l22 = root_decompose(schur, policy);
  } catch (const std::runtime_error&) {
    throw std::runtime_error(
        "update_root_cache: Schur complement indefinite beyond jitter; covariance inputs are "
        "inconsistent with the cached root");
  }
  const Eigen::MatrixXd l22_inv =
      blocks.l22.triangularView<Eigen::Lower>().solve(Eigen::MatrixXd::Identity(q, q));
  blocks.pinv_row.resize(q, n + q);
  blocks.pinv_row.leftCols(n) = -l22_inv * (blocks.l12 * root_pinv);
  blocks.pinv_row.rightCols(q) = l22_inv;
  return blocks;
}

CacheSizes cache_size_accounting(int n, int r, int k, std::span<const int> q_per_step,
                                 std::span<const int> m_per_step) {
  if (k < 1) throw std::invalid_argument("cache_size_accounting: k must be >= 1");
  if (static_cast<int>(q_per_step.size()) != k || static_cast<int>(m_per_step.size()) != k)
    throw std::invalid_argument("cache_size_accounting: need k batch sizes and fantasy counts");
  for (int t = 0; t < k; ++t)
    if (q_per_step[t] < 0 || m_per_step[t] < 1)
      throw std::invalid_argument("cache_size_accounting: counts must be positive");

  CacheSizes sizes;
  const std::uint64_t base = static_cast<std::uint64_t>(n) * static_cast<std::uint64_t>(r);
  sizes.naive = base;
  sizes.fast = base;
  std::uint64_t branch_product = 1;  // prod_{tau <= t} m_tau
  std::uint64_t node_product = 1;    // prod_{tau < t} m_tau
  std::uint64_t cum_q = 0;
  for (int t = 0; t < k; ++t) {
    node_product = branch_product;
    branch_product *= static_cast<std::uint64_t>(m_per_step[t]);
    cum_q += static_cast<std::uint64_t>(q_per_step[t]);
    sizes.naive += branch_product * (n + cum_q) * (r + cum_q);
    sizes.fast += node_product * static_cast<std::uint64_t>(q_per_step[t]) * (r + cum_q);
  }
  return sizes;
}

namespace {

std::vector<int> unflatten(int index, const std::vector<int>& shape) {
  std::vector<int> path(shape.size());
  for (int i = static_cast<int>(shape.size()) - 1; i >= 0; --i) {
    path[i] = index % shape[i];
    index /= shape[i];
  }
  return path;
}

int flatten(std::span<const int> path, const std::vector<int>& shape, int levels) {
  int idx = 0;
  for (int i = 0; i < levels; ++i) idx = idx * shape[i] + path[i];
  return idx;
}

}  // namespace

/// Internal view of one conditioning path: the base cache plus the per-node
/// pseudoinverse row-blocks of each chain level along the path.
struct ChainPath {
  const GpModel* base;
  std::vector<const Eigen::MatrixXd*> pinv_rows;  // one per level
  std::vector<Eigen::MatrixXd> locations;         // q_s x d per level
  std::vector<Eigen::VectorXd> outcomes;          // q_s per level (empty for block building)

  int points() const {
    int total = base->size();
    for (const auto& loc : locations) total += static_cast<int>(loc.rows());
    return total;
  }

  /// Kernel vector between all conditioning points and query points Q.
  Eigen::MatrixXd kernel_stack(const Eigen::MatrixXd& q_points) const {
    Eigen::MatrixXd k(points(), q_points.rows());
    Eigen::Index row = base->size();
    if (row > 0) k.topRows(row) = kernel_cross(base->data.inputs, q_points, base->hp);
    for (const auto& loc : locations) {
      k.middleRows(row, loc.rows()) = kernel_cross(loc, q_points, base->hp);
      row += loc.rows();
    }
    return k;
  }

  /// v = R^-1 k for the chained pseudoinverse; rows are [base r; q_1; ...].
  Eigen::MatrixXd apply_pinv(const Eigen::MatrixXd& k) const {
    const Eigen::Index cols = k.cols();
    Eigen::Index out_rows = base->rank();
    for (const auto* p : pinv_rows) out_rows += p->rows();
    Eigen::MatrixXd v(out_rows, cols);
    v.topRows(base->rank()) = base->root_pinv * k.topRows(base->size());
    Eigen::Index vrow = base->rank();
    for (const auto* p : pinv_rows) {
      v.middleRows(vrow, p->rows()) = *p * k.topRows(p->cols());
      vrow += p->rows();
    }
    return v;
  }

  /// w = R^-T v for the chained pseudoinverse; rows match conditioning points.
  Eigen::MatrixXd apply_pinv_transpose(const Eigen::MatrixXd& v) const {
    const Eigen::Index cols = v.cols();
    Eigen::MatrixXd w = Eigen::MatrixXd::Zero(points(), cols);
    w.topRows(base->size()) = base->root_pinv.transpose() * v.topRows(base->rank());
    Eigen::Index vrow = base->rank();
    for (const auto* p : pinv_rows) {
      w.topRows(p->cols()) += p->transpose() * v.middleRows(vrow, p->rows());
      vrow += p->rows();
    }
    return w;
  }

  /// Residual vector (y - mean) over all conditioning points on this path.
  Eigen::VectorXd residual_stack() const {
    Eigen::VectorXd resid(points());
    const double mean = base->hp.mean_constant;
    resid.head(base->size()) = base->data.outcomes.array() - mean;
    Eigen::Index row = base->size();
    for (const auto& y : outcomes) {
      resid.segment(row, y.size()) = y.array() - mean;
      row += y.size();
    }
    return resid;
  }
};

namespace {

/// Blocks for conditioning a path-model on q new points; shares the algebra
/// of update_root_cache but applies the chained pseudoinverse implicitly.
Eigen::MatrixXd path_update_pinv_row(const ChainPath& path, const Eigen::MatrixXd& new_points,
                                     const JitterPolicy& policy) {
  const GpModel& base = *path.base;
  const Eigen::Index q = new_points.rows();
  const Eigen::MatrixXd k = path.kernel_stack(new_points);
  const Eigen::MatrixXd v = path.apply_pinv(k);  // L12^T
  Eigen::MatrixXd s = kernel_matrix(new_points, base.hp);
  s.diagonal().array() += base.hp.noise_variance;
  const Eigen::MatrixXd schur = s - v.transpose() * v;
  Eigen::MatrixXd l22;
  try {
    l22 = root_decompose(schur, policy);
  } catch (const std::runtime_error&) {
    throw std::runtime_error(
        "fantasize: Schur complement indefinite beyond jitter; fantasy locations are "
        "inconsistent with the cached root");
  }
  const Eigen::MatrixXd l22_inv =
      l22.triangularView<Eigen::Lower>().solve(Eigen::MatrixXd::Identity(q, q));
  const Eigen::MatrixXd w = path.apply_pinv_transpose(v);  // (L12 R^-1)^T
  Eigen::MatrixXd pinv_row(q, path.points() + q);
  pinv_row.leftCols(path.points()) = -l22_inv * w.transpose();
  pinv_row.rightCols(q) = l22_inv;
  return pinv_row;
}

}  // namespace

FantasyModel FantasyModel::fantasize(std::shared_ptr<const GpModel> base,
                                     const Eigen::MatrixXd& locations,
                                     const Eigen::MatrixXd& outcomes, const JitterPolicy& policy) {
  if (!base) throw std::invalid_argument("fantasize: null base model");
  FantasyModel model;
  model.base_ = std::move(base);
  return model.fantasize(locations, outcomes, policy);
}

FantasyModel FantasyModel::fantasize(const Eigen::MatrixXd& locations,
                                     const Eigen::MatrixXd& outcomes,
                                     const JitterPolicy& policy) const {
  const int d = base_->hp.dim();
  if (locations.cols() != d) throw std::invalid_argument("fantasize: location dimension mismatch");
  if (locations.size() > 0 && (locations.minCoeff() < -1e-12 || locations.maxCoeff() > 1.0 + 1e-12))
    throw std::invalid_argument("fantasize: locations outside the unit box");

  int nodes = 1;
  for (int m : batch_shape_) nodes *= m;

  auto level = std::make_shared<Level>();
  if (locations.rows() >= 1 && locations.rows() % nodes == 0) {
    // per-node locations
    level->q = static_cast<int>(locations.rows()) / nodes;
    level->locations = locations;
  } else if (locations.rows() >= 1) {
    // one location set broadcast (materialized) to every node
    level->q = static_cast<int>(locations.rows());
    level->locations.resize(nodes * level->q, d);
    for (int i = 0; i < nodes; ++i) level->locations.middleRows(i * level->q, level->q) = locations;
  } else {
    throw std::invalid_argument("fantasize: need at least one location");
  }
  level->nodes = nodes;
  if (outcomes.cols() != level->q || outcomes.rows() % nodes != 0 || outcomes.rows() == 0)
    throw std::invalid_argument("fantasize: outcome shape incompatible with batch shape");
  level->m = static_cast<int>(outcomes.rows()) / nodes;
  level->outcomes = outcomes;

  level->pinv_rows.reserve(nodes);
  for (int node = 0; node < nodes; ++node) {
    const std::vector<int> path = unflatten(node, batch_shape_);
    const ChainPath chain = branch_path(path, /*with_outcomes=*/false);
    level->pinv_rows.push_back(
        path_update_pinv_row(chain, level->locations.middleRows(node * level->q, level->q), policy));
  }

  FantasyModel next = *this;
  next.levels_.push_back(std::move(level));
  next.batch_shape_.push_back(next.levels_.back()->m);
  return next;
}

ChainPath FantasyModel::branch_path(std::span<const int> branch, bool with_outcomes) const {
  ChainPath chain;
  chain.base = base_.get();
  for (size_t s = 0; s < levels_.size(); ++s) {
    const Level& level = *levels_[s];
    const int node = flatten(branch, batch_shape_, static_cast<int>(s));
    chain.pinv_rows.push_back(&level.pinv_rows[node]);
    chain.locations.push_back(level.locations.middleRows(node * level.q, level.q));
    if (with_outcomes) {
      const int row = flatten(branch, batch_shape_, static_cast<int>(s) + 1);
      chain.outcomes.push_back(level.outcomes.row(row).transpose());
    }
  }
  return chain;
}

Posterior FantasyModel::posterior_at_branch(std::span<const int> branch,
                                            const Eigen::MatrixXd& points) const {
  if (static_cast<int>(branch.size()) != levels())
    throw std::invalid_argument("posterior_at_branch: need one branch index per level");
  for (size_t i = 0; i < branch.size(); ++i)
    if (branch[i] < 0 || branch[i] >= batch_shape_[i])
      throw std::invalid_argument("posterior_at_branch: branch index out of range");
  const ChainPath chain = branch_path(branch, /*with_outcomes=*/true);

  const Eigen::MatrixXd k = chain.kernel_stack(points);
  const Eigen::MatrixXd v = chain.apply_pinv(k);
  const Eigen::VectorXd resid = chain.residual_stack();
  const Eigen::MatrixXd u_hat = chain.apply_pinv(resid);
  const Eigen::MatrixXd alpha_hat = chain.apply_pinv_transpose(u_hat);

  Posterior post;
  post.mean = Eigen::VectorXd::Constant(points.rows(), base_->hp.mean_constant) +
              k.transpose() * alpha_hat;
  post.covariance = kernel_matrix(points, base_->hp) - v.transpose() * v;
  post.covariance = 0.5 * (post.covariance + post.covariance.transpose()).eval();
  return post;
}

std::uint64_t FantasyModel::cache_entry_count() const {
  std::uint64_t count = static_cast<std::uint64_t>(base_->root_pinv.size());
  for (const auto& level : levels_)
    for (const auto& block : level->pinv_rows) count += static_cast<std::uint64_t>(block.size());
  return count;
}

FantasyModel fantasize(std::shared_ptr<const GpModel> model, const Eigen::MatrixXd& locations,
                       const Eigen::MatrixXd& outcomes, const JitterPolicy& policy) {
  return FantasyModel::fantasize(std::move(model), locations, outcomes, policy);
}

FantasyModel fantasize(const FantasyModel& model, const Eigen::MatrixXd& locations,
                       const Eigen::MatrixXd& outcomes, const JitterPolicy& policy) {
  return model.fantasize(locations, outcomes, policy);
}

}  // namespace msbo
