#pragma once

#include <string>
#include <vector>

#include "msbo/bench.hpp"

namespace msbo {

/// Writes <out_dir>/trace.csv and <out_dir>/aggregate.jsonl atomically
/// (temp file + rename; never appends). The trace schema is
///   function,policy,repeat,iteration,best_y,gap,wall_time_s,x0..x{D-1}
/// with D the largest dimension present; shorter rows leave the tail empty.
/// zero_timing writes 0 for every wall time so identical configurations
/// produce byte-identical files.
struct EmitOptions {
  bool zero_timing = false;
};
void emit_results(const ExperimentResults& results, const std::string& out_dir,
                  const EmitOptions& options = {});

std::string render_trace_csv(const ExperimentResults& results, const EmitOptions& options = {});
std::string render_aggregate_jsonl(const ExperimentResults& results,
                                   const EmitOptions& options = {});

/// Fast-fantasy timing micro-benchmark: for each (n, m) pair, the wall time
/// of one fast cache update plus an m-branch posterior query versus m
/// from-scratch conditionings plus the same queries. Times are medians over
/// `reps` runs after one discarded warm-up.
struct FantasyBenchRow {
  int n = 0;
  int m = 0;
  double fast_s = 0.0;
  double naive_s = 0.0;
  double speedup = 0.0;
};
std::vector<FantasyBenchRow> fantasy_benchmark(const std::vector<int>& sizes,
                                               const std::vector<int>& fantasy_counts, int reps,
                                               std::uint64_t seed = 0);
std::string render_fantasy_bench_csv(const std::vector<FantasyBenchRow>& rows);

/// Median wall time of update_root_cache on an n-point model with a rank-r
/// root (q = 1), and of a from-scratch re-decomposition of the augmented
/// matrix. Used by the scaling study.
struct UpdateTiming {
  double update_s = 0.0;
  double rebuild_s = 0.0;
};
UpdateTiming time_cache_update(int n, int rank, int reps, std::uint64_t seed = 0);

/// Least-squares slope of log t against log n.
double fit_scaling_exponent(const std::vector<int>& sizes, const std::vector<double>& times);

}  // namespace msbo
