#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "msbo/bench.hpp"
#include "msbo/results_io.hpp"
#include "msbo/run_config.hpp"

namespace {

std::vector<std::string> split_csv(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream stream(s);
  std::string item;
  while (std::getline(stream, item, ',')) {
    const auto a = item.find_first_not_of(" \t");
    const auto b = item.find_last_not_of(" \t");
    if (a != std::string::npos) out.push_back(item.substr(a, b - a + 1));
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "Bayesian-optimization benchmark harness: one-shot multi-step lookahead policies over "
      "Gaussian-process surrogates"};

  std::string config_path, functions_arg, policy_arg, out_arg;
  int repeats_arg = 0, iters_arg = -1, threads_arg = 0, bench_reps_arg = 0;
  std::uint64_t seed_arg = 0;
  std::string fantasy_counts_arg, bench_sizes_arg, bench_fantasies_arg;
  bool fantasy_bench = false, zero_timing = false;

  auto* opt_config = app.add_option("--config", config_path, "config file (key = value lines)");
  auto* opt_fn = app.add_option("--function", functions_arg, "benchmark name(s), comma separated");
  auto* opt_policy =
      app.add_option("--policy", policy_arg,
                     "policy spec(s): ei | k-step | k-path | k-eno (k in 2..4) | binoculars-q");
  auto* opt_repeats = app.add_option("--repeats", repeats_arg, "independent repeats");
  auto* opt_seed = app.add_option("--seed", seed_arg, "master seed");
  auto* opt_iters = app.add_option("--iters", iters_arg, "iterations per repeat (default 20d)");
  auto* opt_out = app.add_option("--out", out_arg, "output directory");
  auto* opt_threads = app.add_option("--threads", threads_arg, "worker threads");
  auto* opt_counts =
      app.add_option("--fantasy-counts", fantasy_counts_arg, "per-stage fantasy counts override");
  auto* opt_bench = app.add_flag("--fantasy-bench", fantasy_bench,
                                 "run the fast-fantasy timing micro-benchmark instead of BO");
  auto* opt_zero = app.add_flag("--zero-timing", zero_timing,
                                "write zero wall times (byte-reproducible outputs)");
  auto* opt_bsizes = app.add_option("--bench-sizes", bench_sizes_arg, "model sizes for the bench");
  auto* opt_bm = app.add_option("--bench-fantasies", bench_fantasies_arg,
                                "fantasy counts for the bench");
  auto* opt_breps = app.add_option("--bench-reps", bench_reps_arg, "bench repetitions (median)");

  CLI11_PARSE(app, argc, argv);

  msbo::RunConfig config;
  try {
    if (opt_config->count()) {
      std::ifstream in(config_path);
      if (!in) throw std::invalid_argument("config: cannot open file '" + config_path + "'");
      std::stringstream buffer;
      buffer << in.rdbuf();
      config = msbo::parse_config_text(buffer.str());
    }
    // flags override file values
    if (opt_fn->count()) config.functions = split_csv(functions_arg);
    if (opt_policy->count()) config.policies = split_csv(policy_arg);
    if (opt_repeats->count()) config.repeats = repeats_arg;
    if (opt_seed->count()) config.seed = seed_arg;
    if (opt_iters->count()) config.iterations = iters_arg;
    if (opt_out->count()) config.out_dir = out_arg;
    if (opt_threads->count()) config.threads = threads_arg;
    if (opt_counts->count()) {
      config.fantasy_counts.clear();
      for (const auto& item : split_csv(fantasy_counts_arg))
        config.fantasy_counts.push_back(std::stoi(item));
    }
    if (opt_bench->count()) config.fantasy_bench = fantasy_bench;
    if (opt_zero->count()) config.zero_timing = zero_timing;
    if (opt_bsizes->count()) {
      config.bench_sizes.clear();
      for (const auto& item : split_csv(bench_sizes_arg)) config.bench_sizes.push_back(std::stoi(item));
    }
    if (opt_bm->count()) {
      config.bench_fantasies.clear();
      for (const auto& item : split_csv(bench_fantasies_arg))
        config.bench_fantasies.push_back(std::stoi(item));
    }
    if (opt_breps->count()) config.bench_reps = bench_reps_arg;
    config.validate();
  } catch (const std::exception& err) {
    std::cerr << "configuration error: " << err.what() << "\n";
    return 1;
  }

  try {
    if (config.fantasy_bench) {
      const auto rows =
          msbo::fantasy_benchmark(config.bench_sizes, config.bench_fantasies, config.bench_reps,
                                  config.seed);
      const std::string csv = msbo::render_fantasy_bench_csv(rows);
      std::filesystem::create_directories(config.out_dir);
      std::ofstream out(std::filesystem::path(config.out_dir) / "fantasy_bench.csv",
                        std::ios::trunc);
      out << csv;
      std::cout << csv;
      return 0;
    }

    msbo::ExperimentConfig experiment;
    experiment.functions = config.functions;
    for (const auto& spec : config.policies) {
      msbo::PolicyConfig policy = msbo::parse_policy(spec);
      if (!config.fantasy_counts.empty()) policy.fantasies = config.fantasy_counts;
      policy.validate();
      experiment.policies.push_back(std::move(policy));
    }
    experiment.repeats = config.repeats;
    experiment.master_seed = config.seed;
    experiment.iterations = config.iterations;
    experiment.threads = config.threads;

    const msbo::ExperimentResults results = msbo::run_experiment(experiment);
    msbo::EmitOptions emit;
    emit.zero_timing = config.zero_timing;
    msbo::emit_results(results, config.out_dir, emit);

    std::printf("%-12s %-14s %8s %10s %10s %14s\n", "function", "policy", "repeats", "mean_gap",
                "std_err", "time/iter (s)");
    for (const auto& agg : results.aggregates) {
      std::printf("%-12s %-14s %8d %10.4f %10.4f %14.4f\n", agg.function.c_str(),
                  agg.policy.c_str(), agg.repeats_done, agg.mean_gap, agg.std_error,
                  agg.mean_time_per_iter_s);
      if (agg.repeats_failed > 0)
        std::printf("  !! %d repeat(s) failed for %s/%s\n", agg.repeats_failed,
                    agg.function.c_str(), agg.policy.c_str());
    }
    std::cout << "wrote " << config.out_dir << "/trace.csv and aggregate.jsonl\n";
    return results.any_failure ? 2 : 0;
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << "\n";
    return 1;
  }
}
