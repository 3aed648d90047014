#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <fstream>
#include <msbo/bench.hpp>
#include <msbo/rng.hpp>
#include <sstream>

using namespace msbo;

TEST_CASE("synthetic function values at known points") {
  const BenchmarkFunction& ackley2 = benchmark_by_name("ackley2");
  Eigen::VectorXd zero2 = Eigen::VectorXd::Zero(2);
  CHECK(std::abs(ackley2.evaluate(zero2)) <= 1e-12);

  const BenchmarkFunction& dropwave = benchmark_by_name("dropwave");
  CHECK(dropwave.evaluate(zero2) == doctest::Approx(1.0).epsilon(1e-15));

  const BenchmarkFunction& bukin = benchmark_by_name("bukin");
  Eigen::VectorXd bx(2);
  bx << -10.0, 1.0;
  CHECK(std::abs(bukin.evaluate(bx)) <= 1e-5);

  const BenchmarkFunction& rastrigin = benchmark_by_name("rastrigin4");
  CHECK(std::abs(rastrigin.evaluate(Eigen::VectorXd::Zero(4))) <= 1e-12);

  // every recorded oracle optimum reproduces its value through the evaluator
  for (const auto& name : benchmark_names()) {
    const BenchmarkFunction& fn = benchmark_by_name(name);
    const OracleOptimum& opt = oracle_optimum(name);
    CHECK(fn.evaluate(opt.argmax) == doctest::Approx(opt.max_value).epsilon(1e-9));
  }

  // eggholder oracle value against the closed form at the recorded argmax
  const OracleOptimum& egg = oracle_optimum("eggholder");
  CHECK(egg.max_value == doctest::Approx(959.6407).epsilon(1e-6));
  CHECK(egg.argmax[0] == doctest::Approx(512.0));
  CHECK(egg.argmax[1] == doctest::Approx(404.2319).epsilon(1e-4));
}

TEST_CASE("synthetic function errors") {
  CHECK_THROWS_AS(benchmark_by_name("nonexistent"), std::invalid_argument);
  const BenchmarkFunction& fn = benchmark_by_name("dropwave");
  Eigen::VectorXd outside(2);
  outside << 6.0, 0.0;
  CHECK_THROWS_AS(fn.evaluate(outside), std::invalid_argument);
  CHECK_THROWS_AS(fn.evaluate(Eigen::VectorXd::Zero(3)), std::invalid_argument);
}

TEST_CASE("optima constants file matches the embedded table") {
  std::ifstream in(std::string(MSBO_DATA_DIR) + "/benchmark_optima.txt");
  REQUIRE(in.good());
  std::stringstream buffer;
  buffer << in.rdbuf();
  const std::vector<OracleOptimum> from_file = parse_optima_file(buffer.str());
  REQUIRE(from_file.size() == benchmark_names().size());
  for (const auto& rec : from_file) {
    const OracleOptimum& table = oracle_optimum(rec.name);
    CHECK(rec.max_value == table.max_value);
    REQUIRE(rec.argmax.size() == table.argmax.size());
    for (int c = 0; c < rec.argmax.size(); ++c) CHECK(rec.argmax[c] == table.argmax[c]);
    CHECK(rec.oracle == table.oracle);
  }
}

TEST_CASE("native/unit round trip is the identity") {
  Rng rng(211);
  for (const auto& name : benchmark_names()) {
    const BenchmarkFunction& fn = benchmark_by_name(name);
    for (int trial = 0; trial < 20; ++trial) {
      Eigen::VectorXd unit(fn.dim);
      for (int c = 0; c < fn.dim; ++c) unit[c] = rng.uniform();
      const Eigen::VectorXd native = fn.to_native(unit);
      CHECK((fn.to_unit(native) - unit).cwiseAbs().maxCoeff() <= 1e-12);
      const Eigen::VectorXd native2 = fn.to_native(fn.to_unit(native));
      CHECK((native2 - native).cwiseAbs().maxCoeff() <=
            1e-12 * (1.0 + native.cwiseAbs().maxCoeff()));
    }
  }
}

TEST_CASE("gap arithmetic, clamps, and errors") {
  BenchmarkTrace trace;
  trace.initial_count = 2;
  auto push = [&](double observed, double incumbent) {
    TraceRecord rec;
    rec.observed = observed;
    rec.incumbent = incumbent;
    trace.records.push_back(rec);
  };
  push(0.0, 0.0);
  push(-1.0, 0.0);  // y0 = 0
  push(4.0, 4.0);   // best final 4
  CHECK(gap(trace, 10.0).value == doctest::Approx(0.4).epsilon(1e-15));
  CHECK(gap(trace, 4.0).value == 1.0);

  trace.records.back().incumbent = 0.0;
  CHECK(gap(trace, 10.0).value == 0.0);

  trace.records.back().incumbent = 100.0;
  CHECK(gap(trace, 10.0).value == 1.0);  // clamped

  CHECK_THROWS_AS(gap(trace, -5.0), std::invalid_argument);  // y* below y0

  // degenerate y* == y0: attained (equality counts) reports 1; a best below
  // y* is an error
  trace.records.back().incumbent = 0.0;
  CHECK(gap(trace, 0.0).value == 1.0);
  trace.records.back().incumbent = -0.5;
  CHECK_THROWS_AS(gap(trace, 0.0), std::invalid_argument);
}

TEST_CASE("run_bo with budget 0 returns exactly the initial design") {
  const BenchmarkFunction& fn = benchmark_by_name("dropwave");
  PolicyConfig policy;  // EI
  RunOptions options;
  options.iterations = 0;
  options.seed = 5;
  const BenchmarkTrace trace = run_bo(fn, policy, options);
  CHECK(!trace.failed);
  CHECK(static_cast<int>(trace.records.size()) == 2 * fn.dim);
  CHECK(trace.initial_count == 2 * fn.dim);
  for (const auto& rec : trace.records) {
    CHECK(rec.wall_time_s == 0.0);
    CHECK(rec.gap >= 0.0);
    CHECK(rec.gap <= 1.0);
  }
}

TEST_CASE("run_bo determinism and incumbent monotonicity") {
  const BenchmarkFunction& fn = benchmark_by_name("dropwave");
  PolicyConfig policy;
  policy.optimizer.restarts = 4;
  RunOptions options;
  options.iterations = 3;
  options.seed = 11;
  const BenchmarkTrace a = run_bo(fn, policy, options);
  const BenchmarkTrace b = run_bo(fn, policy, options);
  REQUIRE(!a.failed);
  REQUIRE(a.records.size() == b.records.size());
  for (size_t i = 0; i < a.records.size(); ++i) {
    CHECK(a.records[i].observed == b.records[i].observed);  // bit identical
    CHECK((a.records[i].point - b.records[i].point).cwiseAbs().maxCoeff() == 0.0);
    if (i > 0) CHECK(a.records[i].incumbent >= a.records[i - 1].incumbent);
    CHECK(a.records[i].gap >= 0.0);
    CHECK(a.records[i].gap <= 1.0);
  }
  CHECK(static_cast<int>(a.records.size()) == 2 * fn.dim + 3);
}

TEST_CASE("different repeat seeds give different initial designs") {
  const BenchmarkFunction& fn = benchmark_by_name("ackley2");
  PolicyConfig policy;
  RunOptions a, b;
  a.iterations = 0;
  b.iterations = 0;
  a.seed = derive_seed(7, 1);
  b.seed = derive_seed(7, 2);
  const BenchmarkTrace ta = run_bo(fn, policy, a);
  const BenchmarkTrace tb = run_bo(fn, policy, b);
  bool any_different = false;
  for (size_t i = 0; i < ta.records.size(); ++i)
    if ((ta.records[i].point - tb.records[i].point).cwiseAbs().maxCoeff() > 0.0)
      any_different = true;
  CHECK(any_different);
}

TEST_CASE("run_experiment aggregates a single repeat to its gap") {
  ExperimentConfig config;
  config.functions = {"dropwave"};
  PolicyConfig policy;
  policy.optimizer.restarts = 3;
  config.policies = {policy};
  config.repeats = 1;
  config.master_seed = 3;
  config.iterations = 2;
  const ExperimentResults results = run_experiment(config);
  REQUIRE(results.traces.size() == 1);
  REQUIRE(results.aggregates.size() == 1);
  CHECK(!results.any_failure);
  const double expected = gap(results.traces[0], oracle_optimum("dropwave").max_value).value;
  CHECK(results.aggregates[0].mean_gap == doctest::Approx(expected).epsilon(1e-15));
  CHECK(results.aggregates[0].std_error == 0.0);
  CHECK(results.aggregates[0].repeats_done == 1);
}

TEST_CASE("run_experiment mean over repeats and thread invariance") {
  ExperimentConfig config;
  config.functions = {"dropwave"};
  PolicyConfig policy;
  policy.optimizer.restarts = 2;
  config.policies = {policy};
  config.repeats = 3;
  config.master_seed = 9;
  config.iterations = 1;
  config.threads = 1;
  const ExperimentResults serial = run_experiment(config);
  config.threads = 2;
  const ExperimentResults parallel = run_experiment(config);
  REQUIRE(serial.aggregates.size() == 1);
  double mean = 0.0;
  const double y_star = oracle_optimum("dropwave").max_value;
  for (const auto& trace : serial.traces) mean += gap(trace, y_star).value;
  mean /= 3.0;
  CHECK(serial.aggregates[0].mean_gap == doctest::Approx(mean).epsilon(1e-15));
  CHECK(parallel.aggregates[0].mean_gap == doctest::Approx(mean).epsilon(1e-15));
}
