#include "msbo/propose.hpp"

#include <chrono>
#include <algorithm>
#include <sstream>
#include <stdexcept>

namespace msbo {

namespace {
const std::vector<int> kStepDefaults = {10, 5, 3};
}

std::vector<int> PolicyConfig::effective_fantasies() const {
  if (!fantasies.empty()) return fantasies;
  std::vector<int> m;
  switch (type) {
    case PolicyType::Ei:
      break;
    case PolicyType::KStep:
      for (int t = 0; t < horizon - 1; ++t)
        m.push_back(t < static_cast<int>(kStepDefaults.size()) ? kStepDefaults[t]
                                                               : kStepDefaults.back());
      break;
    case PolicyType::KPath:
      // one fantasy branch per stage below the first; the first stage keeps
      // its fantasy fan so the path variant stays a noisy multi-step tree
      // (the all-ones certainty-equivalent tree is available through the
      // fantasy-count override)
      m.assign(horizon - 1, 1);
      if (!m.empty()) m[0] = kStepDefaults[0];
      break;
    case PolicyType::KEno:
    case PolicyType::Binoculars:
      break;
  }
  return m;
}

TreeLayout PolicyConfig::layout(int dim) const {
  TreeLayout l;
  l.dim = dim;
  switch (type) {
    case PolicyType::Ei:
      l.horizon = 1;
      break;
    case PolicyType::KStep:
    case PolicyType::KPath:
      l.horizon = horizon;
      l.fantasies = effective_fantasies();
      break;
    case PolicyType::KEno:
    case PolicyType::Binoculars:
      throw std::logic_error("policy: no tree layout for batch policies");
  }
  return l;
}

std::string PolicyConfig::name() const {
  std::ostringstream out;
  switch (type) {
    case PolicyType::Ei:
      return "ei";
    case PolicyType::KStep:
      out << horizon << "-step";
      return out.str();
    case PolicyType::KPath:
      out << horizon << "-path";
      return out.str();
    case PolicyType::KEno:
      out << horizon << "-eno";
      return out.str();
    case PolicyType::Binoculars:
      out << "binoculars-" << binoculars_q;
      return out.str();
  }
  return "unknown";
}

void PolicyConfig::validate() const {
  optimizer.validate();
  if (warm_restarts < 0)
    throw std::invalid_argument("policy: warm restarts must be non-negative");
  if (mc_samples < 1) throw std::invalid_argument("policy: mc_samples must be >= 1");
  switch (type) {
    case PolicyType::Ei:
      break;
    case PolicyType::KStep:
    case PolicyType::KPath: {
      if (horizon < 2) throw std::invalid_argument("policy: k-step/k-path need horizon >= 2");
      const std::vector<int> m = effective_fantasies();
      if (static_cast<int>(m.size()) != horizon - 1)
        throw std::invalid_argument("policy: need k-1 fantasy counts for the chosen horizon");
      for (int mi : m)
        if (mi < 1) throw std::invalid_argument("policy: fantasy counts must be >= 1");
      break;
    }
    case PolicyType::KEno:
      if (horizon < 2) throw std::invalid_argument("policy: k-eno needs horizon >= 2");
      if (eno_m1 < 1) throw std::invalid_argument("policy: eno level-1 count must be >= 1");
      break;
    case PolicyType::Binoculars:
      if (binoculars_q < 1) throw std::invalid_argument("policy: binoculars batch must be >= 1");
      break;
  }
}

PolicyConfig parse_policy(const std::string& spec) {
  PolicyConfig cfg;
  if (spec == "ei") {
    cfg.type = PolicyType::Ei;
    cfg.horizon = 1;
    return cfg;
  }
  auto parse_k = [&](const std::string& suffix, PolicyType type) -> bool {
    if (spec.size() <= suffix.size() || spec.substr(spec.size() - suffix.size()) != suffix)
      return false;
    const std::string head = spec.substr(0, spec.size() - suffix.size());
    try {
      size_t used = 0;
      const int k = std::stoi(head, &used);
      if (used != head.size()) return false;
      cfg.type = type;
      cfg.horizon = k;
    } catch (const std::exception&) {
      return false;
    }
    return true;
  };
  if (parse_k("-step", PolicyType::KStep) || parse_k("-path", PolicyType::KPath) ||
      parse_k("-eno", PolicyType::KEno)) {
    if (cfg.horizon < 2 || cfg.horizon > 4)
      throw std::invalid_argument("policy '" + spec + "': k must be in {2,3,4}");
    return cfg;
  }
  const std::string bin_prefix = "binoculars-";
  if (spec.rfind(bin_prefix, 0) == 0) {
    try {
      size_t used = 0;
      const std::string tail = spec.substr(bin_prefix.size());
      cfg.binoculars_q = std::stoi(tail, &used);
      if (used != tail.size()) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
      throw std::invalid_argument("policy '" + spec + "': expected binoculars-<q>");
    }
    cfg.type = PolicyType::Binoculars;
    if (cfg.binoculars_q < 1) throw std::invalid_argument("policy: binoculars batch must be >= 1");
    return cfg;
  }
  throw std::invalid_argument("unknown policy '" + spec + "'");
}

namespace {

using clock_type = std::chrono::steady_clock;

std::vector<Eigen::VectorXd> fresh_inits(int count, int dims, Rng& rng) {
  std::vector<Eigen::VectorXd> inits;
  inits.reserve(count);
  for (int r = 0; r < count; ++r) {
    Eigen::VectorXd x(dims);
    for (int i = 0; i < dims; ++i) x[i] = rng.uniform();
    inits.push_back(std::move(x));
  }
  return inits;
}

/// Candidate pool for seeded initializations: uniform points scored by the
/// base model's analytic EI. The acquisition surface is near zero over most
/// of the domain once the model tightens, so uniform restarts alone rarely
/// land inside a basin; sampling tree coordinates proportionally to EI keeps
/// restarts where the objective has signal.
struct SeedPool {
  Eigen::MatrixXd points;   // pool x d
  Eigen::VectorXd weights;  // EI values (may be all zero)
};

SeedPool build_seed_pool(const GpModel& model, double incumbent, Rng& rng) {
  const int d = model.hp.dim();
  const int pool = std::max(256, 64 * d);
  SeedPool out;
  out.points.resize(pool, d);
  out.weights.resize(pool);
  PathModel<double> path(model);
  std::vector<double> x(d);
  for (int i = 0; i < pool; ++i) {
    for (int c = 0; c < d; ++c) {
      x[c] = rng.uniform();
      out.points(i, c) = x[c];
    }
    const auto prep = path.prepare(std::span<const double>(x.data(), d), false);
    out.weights[i] = ei_analytic(prep.mean, prep.obs_std, incumbent);
  }
  return out;
}

/// One init with every tree coordinate drawn from the EI-weighted pool.
Eigen::VectorXd seeded_init(const SeedPool& pool, int nodes, int dims_per_node, Rng& rng) {
  Eigen::VectorXd x(nodes * dims_per_node);
  for (int node = 0; node < nodes; ++node) {
    const int pick = pick_weighted(pool.weights, rng.uniform());
    x.segment(node * dims_per_node, dims_per_node) = pool.points.row(pick);
  }
  return x;
}

/// Fresh initializations for tree-structured variables: half uniform, half
/// EI-seeded per node.
std::vector<Eigen::VectorXd> tree_fresh_inits(const GpModel& model, double incumbent, int count,
                                              int nodes, const SeedPool& pool, Rng& rng) {
  const int d = model.hp.dim();
  std::vector<Eigen::VectorXd> inits;
  if (count <= 0) return inits;
  const int seeded = count / 2;
  for (auto& v : fresh_inits(count - seeded, nodes * d, rng)) inits.push_back(std::move(v));
  for (int r = 0; r < seeded; ++r) inits.push_back(seeded_init(pool, nodes, d, rng));
  return inits;
}

/// Block-coordinate polish: sweep the node slices root-to-leaf, replacing
/// each slice by its best candidate from the seed pool (plus the incumbent
/// slice), then re-run the local optimizer once from the improved point.
/// Monotone by construction, so it can only tighten the multistart result.
Eigen::VectorXd refine_slices(const std::function<double(std::span<const double>)>& value,
                              const ValueAndGradFn& fg, const SeedPool& pool, int nodes, int d,
                              const Eigen::VectorXd& start, const OptimizerConfig& cfg) {
  Eigen::VectorXd x = start;
  double best = value(std::span<const double>(x.data(), x.size()));
  for (int sweep = 0; sweep < 2; ++sweep) {
    for (int node = 0; node < nodes; ++node) {
      Eigen::VectorXd trial = x;
      int best_pick = -1;
      for (int p = 0; p < pool.points.rows(); ++p) {
        trial.segment(node * d, d) = pool.points.row(p);
        const double v = value(std::span<const double>(trial.data(), trial.size()));
        if (v > best) {
          best = v;
          best_pick = p;
        }
      }
      if (best_pick >= 0) x.segment(node * d, d) = pool.points.row(best_pick);
    }
  }
  OptimizerConfig polish = cfg;
  const BoxResult polished = maximize_box(fg, Eigen::VectorXd::Zero(x.size()),
                                          Eigen::VectorXd::Ones(x.size()), {x}, polish);
  return polished.value >= best ? polished.x : x;
}

/// Applies the slice polish to the best few restart results; distinct
/// restarts often sit in different basins and the polish decides between
/// them more reliably than their raw final values.
Eigen::VectorXd refine_top_results(const std::function<double(std::span<const double>)>& value,
                                   const ValueAndGradFn& fg, const SeedPool& pool, int nodes,
                                   int d, const BoxResult& multistart,
                                   const OptimizerConfig& cfg) {
  std::vector<int> order;
  for (size_t r = 0; r < multistart.restart_solutions.size(); ++r)
    if (multistart.restart_solutions[r].size() > 0) order.push_back(static_cast<int>(r));
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    return multistart.restart_values[a] > multistart.restart_values[b];
  });
  Eigen::VectorXd best_x = multistart.x;
  double best_value = multistart.value;
  const int tops = std::min<int>(3, static_cast<int>(order.size()));
  for (int i = 0; i < tops; ++i) {
    const Eigen::VectorXd refined =
        refine_slices(value, fg, pool, nodes, d, multistart.restart_solutions[order[i]], cfg);
    const double v = value(std::span<const double>(refined.data(), refined.size()));
    if (v > best_value) {
      best_value = v;
      best_x = refined;
    }
  }
  return best_x;
}

/// Wraps a templated objective functor into the optimizer callback via the
/// chunked forward-mode gradient driver.
template <class F>
ValueAndGradFn make_fg(F f) {
  return [f](std::span<const double> x, std::span<double> grad) { return gradient(f, x, grad); };
}

Eigen::MatrixXd draw_mc_block(int rows, int cols, std::uint64_t seed) {
  Rng rng(seed);
  Eigen::MatrixXd z(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) z(i, j) = rng.normal();
  return z;
}

struct RootFantasies {
  Eigen::VectorXd values;
};

/// Fantasy outcomes at the chosen root point, for the next warm start.
Eigen::VectorXd root_fantasies(const GpModel& model, const Eigen::VectorXd& x,
                               const Eigen::VectorXd& z) {
  PathModel<double> path(model);
  const auto prep = path.prepare(std::span<const double>(x.data(), x.size()), false);
  Eigen::VectorXd out(z.size());
  for (int i = 0; i < z.size(); ++i) out[i] = prep.mean + prep.obs_std * z[i];
  return out;
}

}  // namespace

ProposeResult propose_next(const GpModel& model, double incumbent, const PolicyConfig& policy,
                           std::uint64_t seed, const WarmStartState* warm) {
  policy.validate();
  const auto start = clock_type::now();
  const int d = model.hp.dim();

  if (policy.type == PolicyType::Binoculars) {
    ProposeResult result;
    result.point =
        binoculars_select(model, incumbent, policy.binoculars_q, seed, policy, &result.diag);
    result.diag.wall_time_s = std::chrono::duration<double>(clock_type::now() - start).count();
    return result;
  }

  Rng init_rng(derive_seed(seed, 0x696e6974ULL));
  ProposeResult result;

  if (policy.type == PolicyType::KEno) {
    const int batch = policy.horizon - 1;
    const int m1 = policy.eno_m1;
    const GaussHermiteRule level1 = gauss_hermite_rule(m1);
    const Eigen::MatrixXd mc_z =
        draw_mc_block(policy.mc_samples, batch, derive_seed(seed, 0x656e6f7aULL));
    const int nvars = d + m1 * batch * d;
    const SeedPool pool = build_seed_pool(model, incumbent, init_rng);

    std::vector<Eigen::VectorXd> inits;
    const bool warm_compatible = warm && warm->solution.flat.size() == nvars &&
                                 warm->level1_fantasies.size() == m1;
    const int warm_count = std::min(policy.warm_restarts, policy.optimizer.restarts);
    if (warm_compatible && warm_count > 0) {
      result.diag.warm_start_used = true;
      const int star = nearest_branch(warm->level1_fantasies, warm->observed);
      Eigen::VectorXd promoted(nvars);
      const Eigen::VectorXd prev_batch =
          warm->solution.flat.segment(d + star * batch * d, batch * d);
      promoted.head(d) = prev_batch.head(d);
      for (int i = 0; i < m1; ++i) {
        Eigen::VectorXd rolled(batch * d);
        if (batch > 1) rolled.head((batch - 1) * d) = prev_batch.tail((batch - 1) * d);
        for (int c = 0; c < d; ++c) rolled[(batch - 1) * d + c] = init_rng.uniform();
        promoted.segment(d + i * batch * d, batch * d) = rolled;
      }
      Eigen::VectorXd eta(nvars);
      eta.head(d).setZero();
      for (int i = 0; i < m1; ++i)
        for (int s = 0; s < batch; ++s)
          eta.segment(d + i * batch * d + s * d, d)
              .setConstant(0.5 * static_cast<double>(s + 1) / policy.horizon);
      Rng ws_rng(derive_seed(seed, 0x7761726dULL));
      for (int r = 0; r < warm_count; ++r) {
        const double gamma =
            warm_count > 1 ? 0.9 * static_cast<double>(r) / (warm_count - 1) : 0.0;
        Eigen::VectorXd beta(nvars), u(nvars);
        for (int i = 0; i < nvars; ++i) beta[i] = ws_rng.beta1(3.0);
        for (int i = 0; i < nvars; ++i) u[i] = ws_rng.uniform();
        inits.push_back(warm_start_formula(promoted, gamma, eta, beta, u));
      }
    }
    for (auto& v : tree_fresh_inits(model, incumbent,
                                    policy.optimizer.restarts - static_cast<int>(inits.size()),
                                    1 + m1 * batch, pool, init_rng))
      inits.push_back(std::move(v));

    auto objective = [&model, horizon = policy.horizon, m1, &level1, &mc_z,
                      incumbent](auto vars) {
      return eno_value(model, horizon, m1, vars, level1.nodes, level1.weights, mc_z, incumbent);
    };
    const BoxResult best = maximize_box(make_fg(objective), Eigen::VectorXd::Zero(nvars),
                                        Eigen::VectorXd::Ones(nvars), inits, policy.optimizer);
    auto value_only = [&](std::span<const double> v) {
      return eno_value<double>(model, policy.horizon, m1, v, level1.nodes, level1.weights, mc_z,
                               incumbent);
    };
    const Eigen::VectorXd refined = refine_top_results(value_only, make_fg(objective), pool,
                                                       1 + m1 * batch, d, best, policy.optimizer);
    result.point = refined.head(d);
    result.diag.objective = value_only(std::span<const double>(refined.data(), refined.size()));
    result.diag.restart_values = best.restart_values;
    result.diag.solution_flat = refined;
    result.diag.level1_fantasies = root_fantasies(model, result.point, level1.nodes);
    result.diag.wall_time_s = std::chrono::duration<double>(clock_type::now() - start).count();
    return result;
  }

  // EI / k-step / k-path: one-shot tree objective
  const TreeLayout layout = policy.layout(d);
  const BaseSampleTree z =
      draw_base_samples(layout, policy.mode, derive_seed(seed, 0x73616d70ULL));
  const int nvars = layout.variable_count();
  const SeedPool pool = build_seed_pool(model, incumbent, init_rng);

  std::vector<Eigen::VectorXd> inits;
  const int warm_count = std::min(policy.warm_restarts, policy.optimizer.restarts);
  if (warm && warm_count > 0 && layout.horizon >= 2) {
    WarmStartInits ws = warm_start_init(*warm, warm_count, layout,
                                        derive_seed(seed, 0x7761726dULL));
    result.diag.warm_start_used = !ws.fell_back;
    result.diag.warm_start_fallback = ws.fell_back;
    for (auto& v : ws.inits) inits.push_back(std::move(v));
  }
  for (auto& v : tree_fresh_inits(model, incumbent,
                                  policy.optimizer.restarts - static_cast<int>(inits.size()),
                                  layout.total_nodes(), pool, init_rng))
    inits.push_back(std::move(v));

  auto objective = [&model, &layout, &z, incumbent](auto vars) {
    return multi_step_value(model, layout, vars, z, incumbent);
  };

  // the optimized tied tree is feasible for the untied problem, so its
  // replication makes a strong extra initialization (and realizes the
  // tied-variable lower bound as an ascent floor)
  if (layout.horizon >= 2) {
    auto tied_objective = [&model, &layout, &z, incumbent](auto vars) {
      using T = std::decay_t<decltype(vars[0])>;
      const std::vector<T> full = tied_to_tree<T>(layout, vars);
      return multi_step_value(model, layout, std::span<const T>(full.data(), full.size()), z,
                              incumbent);
    };
    std::vector<Eigen::VectorXd> tied_inits;
    for (auto& v : fresh_inits(3, layout.horizon * d, init_rng)) tied_inits.push_back(std::move(v));
    for (int r = 0; r < 3; ++r) tied_inits.push_back(seeded_init(pool, layout.horizon, d, init_rng));
    OptimizerConfig tied_cfg = policy.optimizer;
    const BoxResult tied =
        maximize_box(make_fg(tied_objective), Eigen::VectorXd::Zero(layout.horizon * d),
                     Eigen::VectorXd::Ones(layout.horizon * d), tied_inits, tied_cfg);
    const std::vector<double> replicated =
        tied_to_tree<double>(layout, std::span<const double>(tied.x.data(), tied.x.size()));
    inits.push_back(Eigen::Map<const Eigen::VectorXd>(replicated.data(), replicated.size()));
  }

  const BoxResult best = maximize_box(make_fg(objective), Eigen::VectorXd::Zero(nvars),
                                      Eigen::VectorXd::Ones(nvars), inits, policy.optimizer);
  auto value_only = [&](std::span<const double> v) {
    return multi_step_value<double>(model, layout, v, z, incumbent);
  };
  const Eigen::VectorXd refined =
      refine_top_results(value_only, make_fg(objective), pool, layout.total_nodes(), d, best,
                         policy.optimizer);
  result.point = refined.head(d);
  result.diag.objective = value_only(std::span<const double>(refined.data(), refined.size()));
  result.diag.restart_values = best.restart_values;
  result.diag.solution_flat = refined;
  if (layout.horizon >= 2)
    result.diag.level1_fantasies = root_fantasies(model, result.point, z.z[0]);
  result.diag.wall_time_s = std::chrono::duration<double>(clock_type::now() - start).count();
  return result;
}

int pick_weighted(const Eigen::VectorXd& weights, double u) {
  const int q = static_cast<int>(weights.size());
  if (q < 1) throw std::invalid_argument("pick_weighted: empty weights");
  const double total = weights.sum();
  if (total <= 0.0) return std::min(q - 1, static_cast<int>(u * q));
  const double r = u * total;
  double acc = 0.0;
  for (int i = 0; i < q; ++i) {
    acc += weights[i];
    if (r < acc) return i;
  }
  return q - 1;
}

Eigen::VectorXd binoculars_select(const GpModel& model, double incumbent, int q,
                                  std::uint64_t seed, const PolicyConfig& policy,
                                  ProposeDiagnostics* diag) {
  if (q < 1) throw std::invalid_argument("binoculars_select: q must be >= 1");
  const int d = model.hp.dim();
  const int nvars = q * d;
  const Eigen::MatrixXd mc_z =
      draw_mc_block(policy.mc_samples, q, derive_seed(seed, 0x71656964ULL));

  Rng init_rng(derive_seed(seed, 0x696e6974ULL));
  const SeedPool pool = build_seed_pool(model, incumbent, init_rng);
  std::vector<Eigen::VectorXd> inits =
      tree_fresh_inits(model, incumbent, policy.optimizer.restarts, q, pool, init_rng);
  auto objective = [&model, q, incumbent, &mc_z](auto vars) {
    return qei_value(model, vars, q, incumbent, mc_z);
  };
  const BoxResult best = maximize_box(make_fg(objective), Eigen::VectorXd::Zero(nvars),
                                      Eigen::VectorXd::Ones(nvars), inits, policy.optimizer);
  auto value_only = [&](std::span<const double> v) {
    return qei_value<double>(model, v, q, incumbent, mc_z);
  };
  const Eigen::VectorXd refined =
      refine_top_results(value_only, make_fg(objective), pool, q, d, best, policy.optimizer);

  // individual EI weights of the batch members
  Eigen::MatrixXd batch(q, d);
  for (int i = 0; i < q; ++i) batch.row(i) = refined.segment(i * d, d);
  const Posterior post = posterior(model, batch);
  Eigen::VectorXd weights(q);
  for (int i = 0; i < q; ++i) {
    const double obs_std = std::sqrt(std::max(post.covariance(i, i), 0.0) +
                                     model.hp.noise_variance);
    weights[i] = ei_analytic(post.mean[i], obs_std, incumbent);
  }
  Rng pick_rng(derive_seed(seed, 0x7069636bULL));
  const int chosen = pick_weighted(weights, pick_rng.uniform());
  if (diag) {
    diag->objective = value_only(std::span<const double>(refined.data(), refined.size()));
    diag->restart_values = best.restart_values;
    diag->solution_flat = refined;
  }
  return batch.row(chosen);
}

}  // namespace msbo
