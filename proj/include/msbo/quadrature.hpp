#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <vector>

#include "msbo/gp.hpp"
#include "msbo/tree_layout.hpp"

namespace msbo {

enum class SampleMode { GaussHermite, MonteCarlo };

struct GaussHermiteRule {
  Eigen::VectorXd nodes;    // ascending, symmetric about 0
  Eigen::VectorXd weights;  // positive, sum to 1
};

/// Probabilists' Gauss-Hermite rule: sum_i w_i g(z_i) approximates
/// E[g(Z)] for Z ~ N(0,1), exact for polynomials of degree <= 2m-1.
/// m > 64 is rejected (Golub-Welsch stability bound).
GaussHermiteRule gauss_hermite_rule(int m);

/// Base samples for one tree: per level t a vector of m_t standard-normal
/// coordinates plus averaging weights (GH weights, or 1/m_t for MC).
struct BaseSampleTree {
  SampleMode mode = SampleMode::GaussHermite;
  std::vector<Eigen::VectorXd> z;        // one per level 1..k-1
  std::vector<Eigen::VectorXd> weights;  // matching lengths
  std::uint64_t seed = 0;

  int levels() const { return static_cast<int>(z.size()); }
};

/// GH tensors are deterministic (seed ignored); MC tensors are reproducible
/// from the seed. A 1-node GH level is the all-zeros sample.
BaseSampleTree draw_base_samples(const TreeLayout& layout, SampleMode mode, std::uint64_t seed);

/// Reparameterization map: each row of the output is mean + L z_i, where L
/// is a root of the posterior covariance (jittered when needed). Z holds one
/// standard-normal coordinate row per sample. Deterministic given Z.
Eigen::MatrixXd correlate(const Posterior& post, const Eigen::MatrixXd& z,
                          const JitterPolicy& policy = {});

}  // namespace msbo
