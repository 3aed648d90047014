#include "msbo/bench.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <map>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "msbo/rng.hpp"

namespace msbo {

namespace {

constexpr double kPi = 3.14159265358979323846;

Eigen::VectorXd vec2(double a, double b) {
  Eigen::VectorXd v(2);
  v << a, b;
  return v;
}

double eggholder_min(const Eigen::VectorXd& x) {
  const double a = x[1] + 47.0;
  return -a * std::sin(std::sqrt(std::abs(x[0] / 2.0 + a))) -
         x[0] * std::sin(std::sqrt(std::abs(x[0] - a)));
}

double dropwave_min(const Eigen::VectorXd& x) {
  const double r2 = x.squaredNorm();
  return -(1.0 + std::cos(12.0 * std::sqrt(r2))) / (0.5 * r2 + 2.0);
}

double shubert_min(const Eigen::VectorXd& x) {
  double prod = 1.0;
  for (int c = 0; c < 2; ++c) {
    double sum = 0.0;
    for (int j = 1; j <= 5; ++j) sum += j * std::cos((j + 1) * x[c] + j);
    prod *= sum;
  }
  return prod;
}

double rastrigin_min(const Eigen::VectorXd& x) {
  double sum = 10.0 * x.size();
  for (int i = 0; i < x.size(); ++i) sum += x[i] * x[i] - 10.0 * std::cos(2.0 * kPi * x[i]);
  return sum;
}

double ackley_min(const Eigen::VectorXd& x) {
  const double n = static_cast<double>(x.size());
  double sq = 0.0, cs = 0.0;
  for (int i = 0; i < x.size(); ++i) {
    sq += x[i] * x[i];
    cs += std::cos(2.0 * kPi * x[i]);
  }
  return -20.0 * std::exp(-0.2 * std::sqrt(sq / n)) - std::exp(cs / n) + 20.0 + std::exp(1.0);
}

double bukin_min(const Eigen::VectorXd& x) {
  return 100.0 * std::sqrt(std::abs(x[1] - 0.01 * x[0] * x[0])) + 0.01 * std::abs(x[0] + 10.0);
}

// Shekel with the canonical 4x10 well matrix; m selects the first m wells.
double shekel_min(const Eigen::VectorXd& x, int m) {
  static const double c[4][10] = {{4, 1, 8, 6, 3, 2, 5, 8, 6, 7},
                                  {4, 1, 8, 6, 7, 9, 3, 1, 2, 3.6},
                                  {4, 1, 8, 6, 3, 2, 5, 8, 6, 7},
                                  {4, 1, 8, 6, 7, 9, 3, 1, 2, 3.6}};
  static const double beta[10] = {0.1, 0.2, 0.2, 0.4, 0.4, 0.6, 0.3, 0.7, 0.5, 0.5};
  double sum = 0.0;
  for (int i = 0; i < m; ++i) {
    double dist = beta[i];
    for (int j = 0; j < 4; ++j) dist += (x[j] - c[j][i]) * (x[j] - c[j][i]);
    sum -= 1.0 / dist;
  }
  return sum;
}

std::vector<BenchmarkFunction> build_suite() {
  std::vector<BenchmarkFunction> fns;
  auto add = [&](std::string name, Eigen::VectorXd lo, Eigen::VectorXd hi,
                 std::function<double(const Eigen::VectorXd&)> f_min) {
    BenchmarkFunction fn;
    fn.name = std::move(name);
    fn.dim = static_cast<int>(lo.size());
    fn.lower = std::move(lo);
    fn.upper = std::move(hi);
    fn.evaluate_raw = [f = std::move(f_min)](const Eigen::VectorXd& x) { return -f(x); };
    fns.push_back(std::move(fn));
  };
  add("eggholder", Eigen::VectorXd::Constant(2, -512.0), Eigen::VectorXd::Constant(2, 512.0),
      eggholder_min);
  add("dropwave", Eigen::VectorXd::Constant(2, -5.12), Eigen::VectorXd::Constant(2, 5.12),
      dropwave_min);
  add("shubert", Eigen::VectorXd::Constant(2, -10.0), Eigen::VectorXd::Constant(2, 10.0),
      shubert_min);
  add("rastrigin4", Eigen::VectorXd::Constant(4, -5.12), Eigen::VectorXd::Constant(4, 5.12),
      rastrigin_min);
  add("ackley2", Eigen::VectorXd::Constant(2, -32.768), Eigen::VectorXd::Constant(2, 32.768),
      ackley_min);
  add("ackley5", Eigen::VectorXd::Constant(5, -32.768), Eigen::VectorXd::Constant(5, 32.768),
      ackley_min);
  add("bukin", vec2(-15.0, -3.0), vec2(-5.0, 3.0), bukin_min);
  add("shekel5", Eigen::VectorXd::Constant(4, 0.0), Eigen::VectorXd::Constant(4, 10.0),
      [](const Eigen::VectorXd& x) { return shekel_min(x, 5); });
  add("shekel7", Eigen::VectorXd::Constant(4, 0.0), Eigen::VectorXd::Constant(4, 10.0),
      [](const Eigen::VectorXd& x) { return shekel_min(x, 7); });
  return fns;
}

const std::vector<BenchmarkFunction>& suite() {
  static const std::vector<BenchmarkFunction> fns = build_suite();
  return fns;
}

}  // namespace

double BenchmarkFunction::evaluate(const Eigen::VectorXd& x) const {
  if (x.size() != dim) throw std::invalid_argument(name + ": point dimension mismatch");
  for (int i = 0; i < dim; ++i)
    if (x[i] < lower[i] - 1e-9 || x[i] > upper[i] + 1e-9)
      throw std::invalid_argument(name + ": point outside the native bounds");
  const double value = evaluate_raw(x);
  if (!std::isfinite(value)) throw std::runtime_error(name + ": non-finite value");
  return value;
}

Eigen::VectorXd BenchmarkFunction::to_unit(const Eigen::VectorXd& native) const {
  return (native - lower).cwiseQuotient(upper - lower);
}

Eigen::VectorXd BenchmarkFunction::to_native(const Eigen::VectorXd& unit) const {
  return lower + unit.cwiseProduct(upper - lower);
}

const BenchmarkFunction& benchmark_by_name(const std::string& name) {
  for (const auto& fn : suite())
    if (fn.name == name) return fn;
  throw std::invalid_argument("unknown benchmark function '" + name + "'");
}

std::vector<std::string> benchmark_names() {
  std::vector<std::string> names;
  for (const auto& fn : suite()) names.push_back(fn.name);
  return names;
}

namespace {

// Values produced once by tools/compute_optima (fine grid plus quasi-Newton
// and ternary refinement in the native box) and frozen verbatim from
// data/benchmark_optima.txt; a unit test keeps this table and the file in
// sync.
std::vector<OracleOptimum> build_optima() {
  auto mk = [](std::string name, std::vector<double> arg, double value, std::string oracle) {
    OracleOptimum o;
    o.name = std::move(name);
    o.argmax = Eigen::Map<const Eigen::VectorXd>(arg.data(), arg.size());
    o.max_value = value;
    o.oracle = std::move(oracle);
    return o;
  };
  const std::string g2 = "grid1201+quasi-newton-refine";
  const std::string g4 = "grid61+quasi-newton-refine";
  const std::string g5 = "grid31+quasi-newton-refine";
  std::vector<OracleOptimum> out;
  out.push_back(mk("eggholder", {512, 404.231805074737}, 959.640662720851, g2));
  out.push_back(mk("dropwave", {0, 0}, 1, g2));
  out.push_back(mk("shubert", {-7.08350640765028, 4.85805687886348}, 186.730908831024, g2));
  out.push_back(mk("rastrigin4", {0, 0, 0, 0}, 0, g4));
  out.push_back(mk("ackley2", {0, 0}, -4.44089209850063e-16, g2));
  out.push_back(mk("ackley5", {0, 0, 0, 0, 0}, -4.44089209850063e-16, g5));
  out.push_back(mk("bukin", {-10, 1}, -7.45058059692383e-07, g2));
  out.push_back(mk("shekel5",
                   {4.00003715284167, 4.00013327659061, 4.00003715284167, 4.00013327654184},
                   10.1531996790582, g4));
  out.push_back(mk("shekel7",
                   {4.00057281974764, 3.99960620910021, 4.00057281912162, 3.99960620910021},
                   10.4029153367777, g4));
  return out;
}

const std::vector<OracleOptimum>& optima() {
  static const std::vector<OracleOptimum> table = build_optima();
  return table;
}

}  // namespace

const OracleOptimum& oracle_optimum(const std::string& name) {
  for (const auto& o : optima())
    if (o.name == name) return o;
  throw std::invalid_argument("no oracle optimum recorded for '" + name + "'");
}

std::vector<OracleOptimum> parse_optima_file(const std::string& text) {
  std::vector<OracleOptimum> out;
  std::istringstream stream(text);
  std::string line;
  while (std::getline(stream, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream fields(line);
    OracleOptimum o;
    int dim = 0;
    if (!(fields >> o.name >> dim >> o.max_value))
      throw std::invalid_argument("optima file: malformed record '" + line + "'");
    o.argmax.resize(dim);
    for (int i = 0; i < dim; ++i)
      if (!(fields >> o.argmax[i]))
        throw std::invalid_argument("optima file: missing argmax coordinate in '" + line + "'");
    std::getline(fields, o.oracle);
    const auto start = o.oracle.find_first_not_of(" \t");
    o.oracle = start == std::string::npos ? "" : o.oracle.substr(start);
    out.push_back(std::move(o));
  }
  return out;
}

double BenchmarkTrace::initial_best() const {
  if (initial_count < 1 || static_cast<int>(records.size()) < initial_count)
    throw std::logic_error("trace: no initial design");
  double best = records[0].observed;
  for (int i = 1; i < initial_count; ++i) best = std::max(best, records[i].observed);
  return best;
}

double BenchmarkTrace::final_best() const {
  if (records.empty()) throw std::logic_error("trace: empty");
  return records.back().incumbent;
}

GapScore gap(const BenchmarkTrace& trace, double y_star) {
  const double y0 = trace.initial_best();
  const double best = trace.final_best();
  if (y_star < y0 - 1e-12)
    throw std::invalid_argument("gap: y_star below the initial best");
  if (y_star - y0 <= 0.0) {
    if (best >= y_star - 1e-12) return {1.0};
    throw std::invalid_argument("gap: degenerate y_star == y0 without attainment");
  }
  const double raw = (best - y0) / (y_star - y0);
  return {std::clamp(raw, 0.0, 1.0)};
}

namespace {

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

struct Standardizer {
  double mean = 0.0;
  double scale = 1.0;
};

Standardizer standardizer_for(const Eigen::VectorXd& y) {
  Standardizer s;
  s.mean = y.mean();
  const double var = (y.array() - s.mean).square().sum() / std::max<int>(1, y.size() - 1);
  s.scale = var > 1e-24 ? std::sqrt(var) : 1.0;
  return s;
}

}  // namespace

BenchmarkTrace run_bo(const BenchmarkFunction& fn, const PolicyConfig& policy,
                      const RunOptions& options) {
  policy.validate();
  const int d = fn.dim;
  const int initial = 2 * d;
  const int budget = options.iterations >= 0 ? options.iterations : 20 * d;
  const double y_star = oracle_optimum(fn.name).max_value;

  BenchmarkTrace trace;
  trace.function = fn.name;
  trace.policy = policy.name();
  trace.repeat = options.repeat_index;
  trace.seed = options.seed;
  trace.initial_count = initial;

  // initial design (shared across policies that use the same seed)
  Rng init_rng(derive_seed(options.seed, 0x696e6974ULL));
  Eigen::MatrixXd points(initial, d);
  Eigen::VectorXd values(initial);
  double incumbent_native = -std::numeric_limits<double>::infinity();
  double y0 = incumbent_native;
  for (int i = 0; i < initial; ++i) {
    Eigen::VectorXd unit(d);
    for (int c = 0; c < d; ++c) unit[c] = init_rng.uniform();
    const Eigen::VectorXd native = fn.to_native(unit);
    const double y = fn.evaluate(native);
    points.row(i) = native;
    values[i] = y;
    incumbent_native = std::max(incumbent_native, y);
    y0 = incumbent_native;
    TraceRecord rec;
    rec.iteration = i;
    rec.point = native;
    rec.observed = y;
    rec.incumbent = incumbent_native;
    rec.gap = 0.0;
    rec.wall_time_s = 0.0;
    trace.records.push_back(std::move(rec));
  }
  auto gap_now = [&](double best) {
    if (y_star - y0 <= 0.0) return best >= y_star - 1e-12 ? 1.0 : 0.0;
    return std::clamp((best - y0) / (y_star - y0), 0.0, 1.0);
  };
  for (auto& rec : trace.records) rec.gap = gap_now(rec.incumbent);

  std::optional<KernelHyperparams> previous_fit;
  std::optional<WarmStartState> warm;

  for (int it = 0; it < budget; ++it) {
    const auto t0 = std::chrono::steady_clock::now();
    try {
      // normalized, standardized view of the data
      Dataset data;
      data.inputs.resize(points.rows(), d);
      for (int i = 0; i < points.rows(); ++i)
        data.inputs.row(i) = fn.to_unit(points.row(i).transpose());
      const Standardizer st = standardizer_for(values);
      data.outcomes = (values.array() - st.mean) / st.scale;

      FitConfig fit_cfg = options.fit;
      fit_cfg.lengthscale_prior = true;
      fit_cfg.seed = derive_seed(options.seed, 0x666974ULL, it);
      fit_cfg.warm_start = previous_fit;
      KernelHyperparams hp = fit_hyperparameters(data, fit_cfg);
      previous_fit = hp;
      const GpModel model = make_gp_model(data, hp);

      const double incumbent_std = data.outcomes.maxCoeff();
      const ProposeResult proposal =
          propose_next(model, incumbent_std, policy, derive_seed(options.seed, 0x70726f70ULL, it),
                       warm ? &*warm : nullptr);

      const Eigen::VectorXd native = fn.to_native(proposal.point);
      const double y = fn.evaluate(native);

      // warm-start state for the next iteration, in native outcome units
      if (proposal.diag.level1_fantasies.size() > 0) {
        WarmStartState state;
        if (policy.type == PolicyType::KStep || policy.type == PolicyType::KPath) {
          state.solution.layout = policy.layout(d);
        } else {
          state.solution.layout = TreeLayout{1, {}, d};
        }
        state.solution.flat = proposal.diag.solution_flat;
        state.level1_fantasies =
            (proposal.diag.level1_fantasies.array() * st.scale + st.mean).matrix();
        state.observed = y;
        warm = std::move(state);
      } else {
        warm.reset();
      }

      points.conservativeResize(points.rows() + 1, Eigen::NoChange);
      points.row(points.rows() - 1) = native;
      values.conservativeResize(values.size() + 1);
      values[values.size() - 1] = y;
      incumbent_native = std::max(incumbent_native, y);

      TraceRecord rec;
      rec.iteration = initial + it;
      rec.point = native;
      rec.observed = y;
      rec.incumbent = incumbent_native;
      rec.gap = gap_now(incumbent_native);
      rec.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      trace.records.push_back(std::move(rec));
    } catch (const std::exception& err) {
      trace.failed = true;
      trace.failure = err.what();
      break;
    }
  }
  return trace;
}

ExperimentResults run_experiment(const ExperimentConfig& config) {
  if (config.repeats < 1) throw std::invalid_argument("experiment: repeats must be >= 1");
  if (config.functions.empty() || config.policies.empty())
    throw std::invalid_argument("experiment: need at least one function and one policy");

  struct Job {
    int fn_index, policy_index, repeat;
  };
  std::vector<Job> jobs;
  for (size_t f = 0; f < config.functions.size(); ++f)
    for (size_t p = 0; p < config.policies.size(); ++p)
      for (int r = 0; r < config.repeats; ++r)
        jobs.push_back({static_cast<int>(f), static_cast<int>(p), r});

  ExperimentResults results;
  results.traces.resize(jobs.size());
  std::atomic<size_t> next{0};
  const int workers = std::max(1, config.threads);
  auto work = [&]() {
    while (true) {
      const size_t index = next.fetch_add(1);
      if (index >= jobs.size()) return;
      const Job& job = jobs[index];
      const BenchmarkFunction& fn = benchmark_by_name(config.functions[job.fn_index]);
      RunOptions options;
      options.iterations = config.iterations ? *config.iterations : -1;
      options.repeat_index = job.repeat;
      // policy deliberately left out of the seed: repeats pair across policies
      options.seed = derive_seed(config.master_seed, fnv1a(fn.name), job.repeat);
      results.traces[index] = run_bo(fn, config.policies[job.policy_index], options);
    }
  };
  if (workers == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }

  // single-threaded deterministic reduction
  for (size_t f = 0; f < config.functions.size(); ++f) {
    const double y_star = oracle_optimum(config.functions[f]).max_value;
    for (size_t p = 0; p < config.policies.size(); ++p) {
      AggregateRecord agg;
      agg.function = config.functions[f];
      agg.policy = config.policies[p].name();
      std::vector<double> gaps;
      double time_sum = 0.0;
      int time_count = 0;
      for (size_t j = 0; j < jobs.size(); ++j) {
        if (jobs[j].fn_index != static_cast<int>(f) || jobs[j].policy_index != static_cast<int>(p))
          continue;
        const BenchmarkTrace& trace = results.traces[j];
        if (trace.failed) {
          ++agg.repeats_failed;
          results.any_failure = true;
          continue;
        }
        ++agg.repeats_done;
        gaps.push_back(gap(trace, y_star).value);
        for (int i = trace.initial_count; i < static_cast<int>(trace.records.size()); ++i) {
          time_sum += trace.records[i].wall_time_s;
          ++time_count;
        }
      }
      if (!gaps.empty()) {
        double mean = 0.0;
        for (double g : gaps) mean += g;
        mean /= gaps.size();
        double var = 0.0;
        for (double g : gaps) var += (g - mean) * (g - mean);
        agg.mean_gap = mean;
        agg.std_error = gaps.size() > 1 ? std::sqrt(var / (gaps.size() - 1)) /
                                              std::sqrt(static_cast<double>(gaps.size()))
                                        : 0.0;
      }
      agg.mean_time_per_iter_s = time_count > 0 ? time_sum / time_count : 0.0;
      results.aggregates.push_back(std::move(agg));
    }
  }
  return results;
}

}  // namespace msbo
