#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "msbo/propose.hpp"

namespace msbo {

/// A synthetic benchmark in maximization convention (the classical test
/// functions are minimized; evaluators return the negated value).
struct BenchmarkFunction {
  std::string name;
  int dim = 0;
  Eigen::VectorXd lower;  // native box
  Eigen::VectorXd upper;
  std::function<double(const Eigen::VectorXd&)> evaluate_raw;

  /// Evaluates with bounds checking; throws on out-of-bounds points.
  double evaluate(const Eigen::VectorXd& x) const;

  Eigen::VectorXd to_unit(const Eigen::VectorXd& native) const;
  Eigen::VectorXd to_native(const Eigen::VectorXd& unit) const;
};

/// The nine-function suite: eggholder, dropwave, shubert, rastrigin4,
/// ackley2, ackley5, bukin, shekel5, shekel7. Throws on unknown names.
const BenchmarkFunction& benchmark_by_name(const std::string& name);
std::vector<std::string> benchmark_names();

/// Oracle optimum of one benchmark (maximization convention), as recorded in
/// the checked-in constants file produced by the grid + local-refinement
/// oracle (tools/compute_optima).
struct OracleOptimum {
  std::string name;
  Eigen::VectorXd argmax;
  double max_value = 0.0;
  std::string oracle;
};
const OracleOptimum& oracle_optimum(const std::string& name);

/// Parses the constants-file format: one record per non-comment line,
/// `name dim max_value x0..x{d-1} oracle-description`.
std::vector<OracleOptimum> parse_optima_file(const std::string& text);

struct GapScore {
  double value = 0.0;  // in [0, 1]; 1 iff the optimum was attained
};

struct TraceRecord {
  int iteration = 0;          // 0-based over all records, initial design first
  Eigen::VectorXd point;      // native coordinates
  double observed = 0.0;      // native outcome
  double incumbent = 0.0;     // best native outcome so far
  double gap = 0.0;
  double wall_time_s = 0.0;
};

struct BenchmarkTrace {
  std::string function;
  std::string policy;
  int repeat = 0;
  std::uint64_t seed = 0;
  int initial_count = 0;
  std::vector<TraceRecord> records;
  bool failed = false;
  std::string failure;

  double initial_best() const;
  double final_best() const;
};

/// GAP = (best_final - y0) / (y_star - y0), clamped to [0, 1]. y0 is the best
/// initial observation. Degenerate y_star == y0 reports 1 when the optimum
/// was already attained and throws otherwise.
GapScore gap(const BenchmarkTrace& trace, double y_star);

struct RunOptions {
  int iterations = -1;  // -1: the 20d protocol default
  std::uint64_t seed = 0;
  int repeat_index = 0;
  FitConfig fit;
};

/// One BO repeat: 2d seeded uniform initial observations, then fit ->
/// propose -> evaluate -> append for the given budget. Fully reproducible
/// from the seed; optimizer failures mark the trace failed and stop early.
BenchmarkTrace run_bo(const BenchmarkFunction& fn, const PolicyConfig& policy,
                      const RunOptions& options);

struct ExperimentConfig {
  std::vector<std::string> functions;
  std::vector<PolicyConfig> policies;
  int repeats = 1;
  std::uint64_t master_seed = 0;
  std::optional<int> iterations;  // override of the 20d default
  int threads = 1;
};

struct AggregateRecord {
  std::string function;
  std::string policy;
  int repeats_done = 0;
  int repeats_failed = 0;
  double mean_gap = 0.0;
  double std_error = 0.0;
  double mean_time_per_iter_s = 0.0;
};

struct ExperimentResults {
  std::vector<BenchmarkTrace> traces;
  std::vector<AggregateRecord> aggregates;
  bool any_failure = false;
};

/// Runs repeats x functions x policies on a worker pool. Repeat seeds derive
/// from (master seed, function, repeat) so policies on the same repeat share
/// initial designs (paired comparisons); aggregation is a deterministic
/// single-threaded reduction independent of the thread count.
ExperimentResults run_experiment(const ExperimentConfig& config);

}  // namespace msbo
