#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <optional>
#include <string>

#include "msbo/acquisition.hpp"
#include "msbo/optimizer.hpp"
#include "msbo/warm_start.hpp"

namespace msbo {

enum class PolicyType { Ei, KStep, KPath, KEno, Binoculars };

/// Acquisition policy and its optimization settings. The fantasy-count
/// defaults follow the k-step nomenclature: m = (10, 5, 3) truncated to the
/// horizon for k-step, all ones for k-path.
struct PolicyConfig {
  PolicyType type = PolicyType::Ei;
  int horizon = 1;
  std::vector<int> fantasies;  // empty = policy default
  SampleMode mode = SampleMode::GaussHermite;
  int eno_m1 = 10;
  int mc_samples = 128;  // inner MC width for q > 1 batch values
  int binoculars_q = 12;
  OptimizerConfig optimizer;   // restarts default 10
  int warm_restarts = 5;       // restarts seeded from the previous solution

  TreeLayout layout(int dim) const;
  std::vector<int> effective_fantasies() const;
  std::string name() const;
  void validate() const;
};

/// Parses "ei", "k-step", "k-path", "k-eno" (k in 2..4), "binoculars-q".
PolicyConfig parse_policy(const std::string& spec);

struct ProposeDiagnostics {
  double objective = 0.0;
  std::vector<double> restart_values;
  double wall_time_s = 0.0;
  bool warm_start_used = false;
  bool warm_start_fallback = false;
  Eigen::VectorXd solution_flat;     // full one-shot solution
  Eigen::VectorXd level1_fantasies;  // fantasy outcomes at the root (model units)
};

struct ProposeResult {
  Eigen::VectorXd point;
  ProposeDiagnostics diag;
};

/// Draws base samples, builds warm-start plus fresh initializations, runs the
/// box-constrained optimizer on the configured objective, and extracts the
/// root decision. Deterministic given (model, incumbent, policy, seed, warm).
ProposeResult propose_next(const GpModel& model, double incumbent, const PolicyConfig& policy,
                           std::uint64_t seed, const WarmStartState* warm = nullptr);

/// BINOCULARS baseline: maximize q-EI over a q-point batch, then sample one
/// batch member with probability proportional to its individual analytic EI
/// (uniform fallback when every EI is zero).
Eigen::VectorXd binoculars_select(const GpModel& model, double incumbent, int q,
                                  std::uint64_t seed, const PolicyConfig& policy,
                                  ProposeDiagnostics* diag = nullptr);

/// Index i with probability weights[i] / sum(weights) given the uniform draw
/// u in [0,1); uniform over all indices when the weights sum to zero.
int pick_weighted(const Eigen::VectorXd& weights, double u);

}  // namespace msbo
