#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>
#include <msbo/acquisition.hpp>
#include <msbo/optimizer.hpp>
#include <msbo/propose.hpp>
#include <msbo/rng.hpp>
#include <msbo/warm_start.hpp>

using namespace msbo;

namespace {

KernelHyperparams make_hp(int d, double l, double sf2, double sn2) {
  KernelHyperparams hp;
  hp.lengthscales = Eigen::VectorXd::Constant(d, l);
  hp.signal_variance = sf2;
  hp.noise_variance = sn2;
  hp.mean_constant = 0.0;
  return hp;
}

GpModel random_model(int n, int d, Rng& rng) {
  Dataset data;
  data.inputs.resize(n, d);
  data.outcomes.resize(n);
  for (int i = 0; i < n; ++i) {
    for (int c = 0; c < d; ++c) data.inputs(i, c) = rng.uniform();
    data.outcomes[i] = rng.normal();
  }
  return make_gp_model(data, make_hp(d, 0.3 + 0.3 * rng.uniform(), 1.0, 1e-4));
}

}  // namespace

TEST_CASE("gradient driver on a quadratic") {
  Eigen::VectorXd c(5);
  c << 0.1, 0.4, 0.9, 0.2, 0.6;
  auto objective = [&](auto v) {
    using T = std::decay_t<decltype(v[0])>;
    T total(0.0);
    for (size_t i = 0; i < v.size(); ++i) {
      const T diff = v[i] - c[static_cast<int>(i)];
      total -= diff * diff;
    }
    return total;
  };
  Eigen::VectorXd x(5);
  x << 0.3, 0.3, 0.3, 0.3, 0.3;
  Eigen::VectorXd grad(5);
  const double value =
      gradient(objective, std::span<const double>(x.data(), 5), std::span<double>(grad.data(), 5));
  CHECK(value == doctest::Approx(-(x - c).squaredNorm()).epsilon(1e-14));
  for (int i = 0; i < 5; ++i)
    CHECK(grad[i] == doctest::Approx(-2.0 * (x[i] - c[i])).epsilon(1e-14));
}

TEST_CASE("analytic EI gradient through the posterior matches finite differences") {
  Rng rng(107);
  const GpModel model = random_model(8, 2, rng);
  const double incumbent = model.data.incumbent();
  auto objective = [&](auto v) {
    using T = std::decay_t<decltype(v[0])>;
    PathModel<T> path(model);
    const auto prep = path.prepare(v, false);
    return ei_analytic(prep.mean, prep.obs_std, T(incumbent));
  };
  for (int trial = 0; trial < 10; ++trial) {
    Eigen::VectorXd x(2);
    x << 0.05 + 0.9 * rng.uniform(), 0.05 + 0.9 * rng.uniform();
    Eigen::VectorXd ad(2), fd(2);
    gradient(objective, std::span<const double>(x.data(), 2), std::span<double>(ad.data(), 2));
    finite_difference_gradient(objective, std::span<const double>(x.data(), 2),
                               std::span<double>(fd.data(), 2));
    for (int c = 0; c < 2; ++c)
      if (std::abs(ad[c]) > 1e-6)
        CHECK(std::abs(ad[c] - fd[c]) / std::abs(ad[c]) <= 1e-4);
  }
}

TEST_CASE("tree objective gradients match finite differences") {
  Rng rng(109);
  const GpModel model = random_model(6, 2, rng);
  TreeLayout layout{3, {3, 2}, 2};
  const BaseSampleTree z = draw_base_samples(layout, SampleMode::GaussHermite, 0);
  const double incumbent = model.data.incumbent();
  auto objective = [&](auto v) { return multi_step_value(model, layout, v, z, incumbent); };
  for (int trial = 0; trial < 5; ++trial) {
    Eigen::VectorXd vars(layout.variable_count());
    for (int i = 0; i < vars.size(); ++i) vars[i] = 0.05 + 0.9 * rng.uniform();
    Eigen::VectorXd ad(vars.size()), fd(vars.size());
    gradient(objective, std::span<const double>(vars.data(), vars.size()),
             std::span<double>(ad.data(), ad.size()));
    finite_difference_gradient(objective, std::span<const double>(vars.data(), vars.size()),
                               std::span<double>(fd.data(), fd.size()));
    for (int i = 0; i < vars.size(); ++i)
      if (std::abs(ad[i]) > 1e-6)
        CHECK(std::abs(ad[i] - fd[i]) / std::abs(ad[i]) <= 1e-4);
  }
}

TEST_CASE("maximize_box finds interior and boundary optima") {
  OptimizerConfig cfg;
  // interior maximum
  Eigen::VectorXd c(3);
  c << 0.3, 0.7, 0.5;
  ValueAndGradFn fg = [&](std::span<const double> x, std::span<double> grad) {
    double v = 0.0;
    for (int i = 0; i < 3; ++i) {
      const double diff = x[i] - c[i];
      v -= diff * diff;
      grad[i] = -2.0 * diff;
    }
    return v;
  };
  std::vector<Eigen::VectorXd> inits{Eigen::VectorXd::Constant(3, 0.9),
                                     Eigen::VectorXd::Constant(3, 0.1)};
  const BoxResult interior =
      maximize_box(fg, Eigen::VectorXd::Zero(3), Eigen::VectorXd::Ones(3), inits, cfg);
  CHECK((interior.x - c).cwiseAbs().maxCoeff() <= 1e-6);

  // maximum outside the box: the clipped projection is optimal for a
  // separable quadratic
  Eigen::VectorXd outside(3);
  outside << 1.4, -0.3, 0.5;
  ValueAndGradFn fg_out = [&](std::span<const double> x, std::span<double> grad) {
    double v = 0.0;
    for (int i = 0; i < 3; ++i) {
      const double diff = x[i] - outside[i];
      v -= diff * diff;
      grad[i] = -2.0 * diff;
    }
    return v;
  };
  const BoxResult clipped =
      maximize_box(fg_out, Eigen::VectorXd::Zero(3), Eigen::VectorXd::Ones(3), inits, cfg);
  Eigen::VectorXd expect(3);
  expect << 1.0, 0.0, 0.5;
  CHECK((clipped.x - expect).cwiseAbs().maxCoeff() <= 1e-6);
}

TEST_CASE("maximize_box is a monotone multistart") {
  // 2-d multimodal objective
  ValueAndGradFn fg = [](std::span<const double> x, std::span<double> grad) {
    const double a = x[0] * 6.0, b = x[1] * 6.0;
    const double v = std::sin(a) * std::cos(b) + 0.3 * x[0];
    grad[0] = 6.0 * std::cos(a) * std::cos(b) + 0.3;
    grad[1] = -6.0 * std::sin(a) * std::sin(b);
    return v;
  };
  Rng rng(113);
  std::vector<Eigen::VectorXd> inits;
  for (int r = 0; r < 10; ++r) {
    Eigen::VectorXd x(2);
    x << rng.uniform(), rng.uniform();
    inits.push_back(x);
  }
  const BoxResult best =
      maximize_box(fg, Eigen::VectorXd::Zero(2), Eigen::VectorXd::Ones(2), inits, {});
  CHECK(best.restart_values.size() == 10);
  for (int r = 0; r < 10; ++r) {
    // ascent per restart, and the reported best dominates all of them
    CHECK(best.restart_values[r] >= best.init_values[r] - 1e-12);
    CHECK(best.value >= best.restart_values[r] - 1e-12);
  }
}

TEST_CASE("maximize_box error handling") {
  ValueAndGradFn fg = [](std::span<const double>, std::span<double> grad) {
    grad[0] = 0.0;
    return std::numeric_limits<double>::quiet_NaN();
  };
  std::vector<Eigen::VectorXd> inits{Eigen::VectorXd::Constant(1, 0.5)};
  CHECK_THROWS_AS(
      maximize_box(fg, Eigen::VectorXd::Zero(1), Eigen::VectorXd::Ones(1), inits, {}),
      std::runtime_error);

  std::vector<Eigen::VectorXd> bad{Eigen::VectorXd::Constant(1, 1.5)};
  ValueAndGradFn ok = [](std::span<const double> x, std::span<double> grad) {
    grad[0] = 1.0;
    return x[0];
  };
  CHECK_THROWS_AS(maximize_box(ok, Eigen::VectorXd::Zero(1), Eigen::VectorXd::Ones(1), bad, {}),
                  std::invalid_argument);
  CHECK_THROWS_AS(maximize_box(ok, Eigen::VectorXd::Zero(1), Eigen::VectorXd::Ones(1), {}, {}),
                  std::invalid_argument);
}

TEST_CASE("warm-start formula is exact for prescribed tensors") {
  const int n = 6;
  Eigen::VectorXd promoted(n), eta(n), beta(n), u(n);
  Rng rng(127);
  for (int i = 0; i < n; ++i) {
    promoted[i] = rng.uniform();
    eta[i] = 0.5 * rng.uniform();
    beta[i] = rng.uniform();
    u[i] = rng.uniform();
  }
  for (double gamma : {0.0, 0.3, 0.9, 1.0}) {
    const Eigen::VectorXd out = warm_start_formula(promoted, gamma, eta, beta, u);
    for (int i = 0; i < n; ++i) {
      const double expect =
          (1.0 - gamma) * ((1.0 - eta[i]) * promoted[i] + eta[i] * beta[i]) + gamma * u[i];
      CHECK(out[i] == doctest::Approx(expect).epsilon(1e-15));
    }
  }
  // limits: gamma=0, eta=0 reuses the promoted tree exactly; gamma=1 is pure
  // uniform replacement
  const Eigen::VectorXd reuse =
      warm_start_formula(promoted, 0.0, Eigen::VectorXd::Zero(n), beta, u);
  CHECK((reuse - promoted).cwiseAbs().maxCoeff() == 0.0);
  const Eigen::VectorXd replace = warm_start_formula(promoted, 1.0, eta, beta, u);
  CHECK((replace - u).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("eta spacing is linear in depth") {
  TreeLayout layout{4, {2, 2, 2}, 1};
  const Eigen::VectorXd eta = eta_for_layout(layout);
  CHECK(eta[layout.slice_offset(1, 0)] == 0.0);
  CHECK(eta[layout.slice_offset(2, 0)] == doctest::Approx(0.5 * 1.0 / 4.0));
  CHECK(eta[layout.slice_offset(3, 2)] == doctest::Approx(0.5 * 2.0 / 4.0));
  CHECK(eta[layout.slice_offset(4, 7)] == doctest::Approx(0.5 * 3.0 / 4.0));
}

TEST_CASE("warm-start promotion picks the nearest fantasy branch") {
  Eigen::VectorXd fantasies(4);
  fantasies << 0.1, 0.5, 0.52, -1.0;
  CHECK(nearest_branch(fantasies, 0.51) == 1);  // tie at distance 0.01 breaks low
  CHECK(nearest_branch(fantasies, -0.9) == 3);
  CHECK(nearest_branch(fantasies, 0.1) == 0);

  // promoted tree: level-1 branch subtree moves up one level
  TreeLayout layout{2, {3}, 1};
  WarmStartState state;
  state.solution.layout = layout;
  state.solution.flat.resize(layout.variable_count());
  state.solution.flat << 0.4, 0.11, 0.22, 0.33;  // x, then x2 per branch
  state.level1_fantasies.resize(3);
  state.level1_fantasies << -1.0, 0.0, 1.0;
  state.observed = 0.2;  // nearest branch is index 1
  Rng rng(131);
  const TreeVariables promoted = promote_subtree(state, layout, rng);
  CHECK(promoted.flat[0] == 0.22);  // the selected branch's level-2 point
  // vacated deepest level is uniform draws inside the box
  for (int i = 1; i < promoted.flat.size(); ++i) {
    CHECK(promoted.flat[i] >= 0.0);
    CHECK(promoted.flat[i] <= 1.0);
  }
}

TEST_CASE("warm_start_init stays in bounds and reuses the root at gamma=0") {
  TreeLayout layout{3, {3, 2}, 2};
  WarmStartState state;
  state.solution.layout = layout;
  state.solution.flat.setLinSpaced(layout.variable_count(), 0.05, 0.95);
  state.level1_fantasies.resize(3);
  state.level1_fantasies << 0.0, 1.0, 2.0;
  state.observed = 0.9;  // branch 1
  const WarmStartInits inits = warm_start_init(state, 5, layout, 17);
  CHECK(!inits.fell_back);
  CHECK(inits.inits.size() == 5);
  for (const auto& init : inits.inits) {
    CHECK(init.minCoeff() >= 0.0);
    CHECK(init.maxCoeff() <= 1.0);
  }
  // restart 1 has gamma = 0 and the root level has eta = 0, so the root
  // coordinates are exactly the promoted level-2 point of branch 1
  Rng rng(derive_seed(17, 0x7761726dULL));
  const TreeVariables promoted = promote_subtree(state, layout, rng);
  CHECK(inits.inits[0][0] == doctest::Approx(promoted.flat[0]).epsilon(1e-15));
  CHECK(inits.inits[0][1] == doctest::Approx(promoted.flat[1]).epsilon(1e-15));

  // incompatible state falls back to fresh draws
  WarmStartState bad;
  bad.solution.layout = TreeLayout{1, {}, 2};
  bad.solution.flat = Eigen::VectorXd::Constant(2, 0.5);
  bad.level1_fantasies.resize(1);
  bad.level1_fantasies << 0.0;
  const WarmStartInits fallback = warm_start_init(bad, 4, layout, 17);
  CHECK(fallback.fell_back);
  CHECK(fallback.inits.size() == 4);
}

TEST_CASE("propose_next EI matches a dense-grid oracle on a 1-d toy") {
  Rng rng(137);
  const GpModel model = random_model(7, 1, rng);
  PolicyConfig policy;  // EI
  policy.optimizer.restarts = 8;
  const double incumbent = model.data.incumbent();
  const ProposeResult result = propose_next(model, incumbent, policy, 23);

  double best_x = 0.0, best_v = -1.0;
  for (int i = 0; i <= 4000; ++i) {
    const double x = i / 4000.0;
    Eigen::MatrixXd xq(1, 1);
    xq << x;
    const Posterior post = posterior(model, xq);
    const double obs_std =
        std::sqrt(std::max(post.covariance(0, 0), 0.0) + model.hp.noise_variance);
    const double v = ei_analytic(post.mean[0], obs_std, incumbent);
    if (v > best_v) {
      best_v = v;
      best_x = x;
    }
  }
  CHECK(result.diag.objective >= best_v - 1e-6);
  CHECK(std::abs(result.point[0] - best_x) <= 1e-2);

  // determinism
  const ProposeResult again = propose_next(model, incumbent, policy, 23);
  CHECK((again.point - result.point).cwiseAbs().maxCoeff() == 0.0);
}
