#pragma once

#include <numeric>
#include <stdexcept>
#include <vector>

namespace msbo {

/// Shape of a lookahead scenario tree: horizon k, per-stage fantasy counts
/// m_1..m_{k-1}, and the input dimension. Stage batch sizes are 1 for the
/// tree policies; ENO handles its single batch stage separately.
struct TreeLayout {
  int horizon = 1;              // k >= 1
  std::vector<int> fantasies;   // m_t for t = 1..k-1
  int dim = 1;

  void validate() const {
    if (horizon < 1) throw std::invalid_argument("layout: horizon must be >= 1");
    if (dim < 1) throw std::invalid_argument("layout: dim must be >= 1");
    if (static_cast<int>(fantasies.size()) != horizon - 1)
      throw std::invalid_argument("layout: need k-1 fantasy counts");
    for (int m : fantasies)
      if (m < 1) throw std::invalid_argument("layout: fantasy counts must be >= 1");
  }

  /// Number of tree nodes (decision points) at 1-based level t.
  int nodes_at_level(int t) const {
    int n = 1;
    for (int i = 0; i < t - 1; ++i) n *= fantasies[i];
    return n;
  }

  int total_nodes() const {
    int total = 0;
    for (int t = 1; t <= horizon; ++t) total += nodes_at_level(t);
    return total;
  }

  /// Total decision-variable count d * sum_t prod_{i<t} m_i.
  int variable_count() const { return total_nodes() * dim; }

  /// Offset (in scalars) of the first variable of level t (1-based).
  int level_offset(int t) const {
    int off = 0;
    for (int s = 1; s < t; ++s) off += nodes_at_level(s) * dim;
    return off;
  }

  /// Row-major node index at level t for branch path (j_1..j_{t-1}).
  int node_index(int t, const std::vector<int>& path) const {
    if (static_cast<int>(path.size()) != t - 1)
      throw std::invalid_argument("layout: path length must be t-1");
    int idx = 0;
    for (int i = 0; i < t - 1; ++i) {
      if (path[i] < 0 || path[i] >= fantasies[i])
        throw std::invalid_argument("layout: branch index out of range");
      idx = idx * fantasies[i] + path[i];
    }
    return idx;
  }

  /// Offset of the slice (length dim) of node `node` at level t.
  int slice_offset(int t, int node) const { return level_offset(t) + node * dim; }
};

}  // namespace msbo
