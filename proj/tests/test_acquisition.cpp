#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>
#include <msbo/acquisition.hpp>
#include <msbo/fantasy.hpp>
#include <msbo/propose.hpp>
#include <msbo/rng.hpp>

using namespace msbo;

namespace {

KernelHyperparams make_hp(int d, double l, double sf2, double sn2, double mean = 0.0) {
  KernelHyperparams hp;
  hp.lengthscales = Eigen::VectorXd::Constant(d, l);
  hp.signal_variance = sf2;
  hp.noise_variance = sn2;
  hp.mean_constant = mean;
  return hp;
}

GpModel random_model(int n, int d, Rng& rng, double sn2 = 1e-4) {
  Dataset data;
  data.inputs.resize(n, d);
  data.outcomes.resize(n);
  for (int i = 0; i < n; ++i) {
    for (int c = 0; c < d; ++c) data.inputs(i, c) = rng.uniform();
    data.outcomes[i] = rng.normal();
  }
  return make_gp_model(data, make_hp(d, 0.25 + 0.3 * rng.uniform(), 0.7 + 0.6 * rng.uniform(),
                                     sn2, 0.2 * rng.normal()));
}

GpModel conditioned(const GpModel& base, const Eigen::VectorXd& x, double y) {
  Dataset d;
  const int n = base.size();
  d.inputs.resize(n + 1, base.hp.dim());
  d.outcomes.resize(n + 1);
  d.inputs.topRows(n) = base.data.inputs;
  d.outcomes.head(n) = base.data.outcomes;
  d.inputs.row(n) = x;
  d.outcomes[n] = y;
  return make_gp_model(d, base.hp);
}

// Nested-loop tree oracle: explicit per-branch conditioning through
// make_gp_model, sequential recursion, no shared caches. Independent of the
// PathModel implementation the library uses.
double oracle_tree(const GpModel& model, const TreeLayout& layout, const Eigen::VectorXd& vars,
                   const BaseSampleTree& z, double incumbent, int level = 1, int node = 0) {
  const int d = layout.dim;
  const Eigen::VectorXd x = vars.segment(layout.slice_offset(level, node), d);
  Eigen::MatrixXd xq(1, d);
  xq.row(0) = x;
  const Posterior post = posterior(model, xq);
  const double obs_std = std::sqrt(std::max(post.covariance(0, 0), 0.0) + model.hp.noise_variance);
  double total = ei_analytic(post.mean[0], std::max(obs_std, 1e-9), incumbent);
  if (level == layout.horizon) return total;
  for (int j = 0; j < layout.fantasies[level - 1]; ++j) {
    const double y = post.mean[0] + obs_std * z.z[level - 1][j];
    const GpModel child = conditioned(model, x, y);
    total += z.weights[level - 1][j] *
             oracle_tree(child, layout, vars, z, std::max(incumbent, y), level + 1,
                         node * layout.fantasies[level - 1] + j);
  }
  return total;
}

}  // namespace

TEST_CASE("ei_analytic closed forms") {
  CHECK(ei_analytic(0.0, 1.0, 0.0) == doctest::Approx(0.3989422804014327).epsilon(1e-12));
  CHECK(ei_analytic(-1.0, 0.0, 0.0) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(ei_analytic(2.0, 0.0, 0.0) == doctest::Approx(2.0).epsilon(1e-8));

  // numeric-integration oracle for mu=1, sigma=2, b=0
  const double mu = 1.0, sigma = 2.0;
  double integral = 0.0;
  const int steps = 2000000;
  const double lo = -8.0, hi = 8.0;
  for (int i = 0; i < steps; ++i) {
    const double t = lo + (hi - lo) * (i + 0.5) / steps;
    integral += std::max(mu + sigma * t, 0.0) * norm_pdf(t) * (hi - lo) / steps;
  }
  CHECK(ei_analytic(mu, sigma, 0.0) == doctest::Approx(integral).epsilon(1e-6));
  CHECK(ei_analytic(mu, sigma, 0.0) == doctest::Approx(1.3955931148026122).epsilon(1e-10));
}

TEST_CASE("ei_analytic monotonicity") {
  for (double mu = -2.0; mu < 2.0; mu += 0.25) {
    CHECK(ei_analytic(mu + 0.01, 1.0, 0.0) > ei_analytic(mu, 1.0, 0.0));
    if (mu <= 0.0) CHECK(ei_analytic(mu, 1.1, 0.0) > ei_analytic(mu, 1.0, 0.0));
    CHECK(ei_analytic(mu, 1.0, 0.0) >= 0.0);
  }
}

TEST_CASE("batch_improvement_mc basics") {
  Eigen::MatrixXd below(3, 2);
  below << -1.0, -2.0, 0.0, -0.5, -3.0, 0.0;
  CHECK(batch_improvement_mc(below, 0.0) == 0.0);

  Eigen::MatrixXd single(1, 1);
  single << 2.0;
  CHECK(batch_improvement_mc(single, 0.0) == doctest::Approx(2.0));

  // weighted variant
  Eigen::MatrixXd two(2, 1);
  two << 1.0, 3.0;
  Eigen::VectorXd w(2);
  w << 0.25, 0.75;
  CHECK(batch_improvement_mc(two, 0.0, w) == doctest::Approx(0.25 + 2.25));
  CHECK_THROWS_AS(batch_improvement_mc(two, 0.0, Eigen::VectorXd::Ones(3)),
                  std::invalid_argument);
}

TEST_CASE("batch_improvement_mc agrees with analytic EI at q=1") {
  Rng rng(2024);
  const int m = 100000;
  for (double z0 : {0.0, 0.5, 1.0}) {
    Eigen::MatrixXd samples(m, 1);
    for (int i = 0; i < m; ++i) samples(i, 0) = z0 + rng.normal();
    const double mc = batch_improvement_mc(samples, 0.0);
    const double exact = ei_analytic(z0, 1.0, 0.0);
    CHECK(std::abs(mc - exact) / exact < 0.01);
  }
}

TEST_CASE("multi_step_objective with k=1 is analytic EI") {
  Rng rng(71);
  const GpModel model = random_model(9, 1, rng);
  TreeLayout layout{1, {}, 1};
  const BaseSampleTree z = draw_base_samples(layout, SampleMode::GaussHermite, 0);
  const double incumbent = model.data.incumbent();
  for (double x = 0.02; x < 1.0; x += 0.08) {
    Eigen::VectorXd v(1);
    v << x;
    const double tree = multi_step_value<double>(
        model, layout, std::span<const double>(v.data(), 1), z, incumbent);
    Eigen::MatrixXd xq(1, 1);
    xq << x;
    const Posterior post = posterior(model, xq);
    const double obs_std =
        std::sqrt(std::max(post.covariance(0, 0), 0.0) + model.hp.noise_variance);
    CHECK(tree == doctest::Approx(ei_analytic(post.mean[0], obs_std, incumbent)).epsilon(1e-12));
  }
}

TEST_CASE("tied replication identity at k=2") {
  Rng rng(73);
  const GpModel model = random_model(8, 2, rng);
  TreeLayout layout{2, {4}, 2};
  const BaseSampleTree z = draw_base_samples(layout, SampleMode::GaussHermite, 0);
  const double incumbent = model.data.incumbent();
  Eigen::VectorXd tied(2 * 2);
  tied << 0.3, 0.7, 0.55, 0.15;  // x and the shared level-2 point p
  const std::vector<double> full =
      tied_to_tree<double>(layout, std::span<const double>(tied.data(), tied.size()));
  Eigen::VectorXd replicated(layout.variable_count());
  replicated << 0.3, 0.7, 0.55, 0.15, 0.55, 0.15, 0.55, 0.15, 0.55, 0.15;
  CHECK((Eigen::Map<const Eigen::VectorXd>(full.data(), full.size()) - replicated)
            .cwiseAbs()
            .maxCoeff() == 0.0);
  const double a = multi_step_value<double>(
      model, layout, std::span<const double>(full.data(), full.size()), z, incumbent);
  const double b = multi_step_value<double>(
      model, layout, std::span<const double>(replicated.data(), replicated.size()), z, incumbent);
  CHECK(a == b);
}

TEST_CASE("multi-step tree matches the nested-loop oracle") {
  Rng rng(79);
  // k=2, m1=3 on 1-d toys
  for (int trial = 0; trial < 5; ++trial) {
    const GpModel model = random_model(6 + trial, 1, rng);
    TreeLayout layout{2, {3}, 1};
    const BaseSampleTree z = draw_base_samples(layout, SampleMode::GaussHermite, 0);
    const double incumbent = model.data.incumbent();
    Eigen::VectorXd vars(layout.variable_count());
    for (int i = 0; i < vars.size(); ++i) vars[i] = rng.uniform();
    const double fast = multi_step_value<double>(
        model, layout, std::span<const double>(vars.data(), vars.size()), z, incumbent);
    const double slow = oracle_tree(model, layout, vars, z, incumbent);
    CHECK(fast == doctest::Approx(slow).epsilon(1e-8));
  }
  // deeper and batched layouts (m <= 5, k <= 3), MC mode included
  for (int trial = 0; trial < 4; ++trial) {
    const GpModel model = random_model(7, 2, rng);
    TreeLayout layout{3, {2 + trial % 3, 2}, 2};
    const SampleMode mode = trial % 2 ? SampleMode::MonteCarlo : SampleMode::GaussHermite;
    const BaseSampleTree z = draw_base_samples(layout, mode, 1000 + trial);
    const double incumbent = model.data.incumbent();
    Eigen::VectorXd vars(layout.variable_count());
    for (int i = 0; i < vars.size(); ++i) vars[i] = rng.uniform();
    const double fast = multi_step_value<double>(
        model, layout, std::span<const double>(vars.data(), vars.size()), z, incumbent);
    const double slow = oracle_tree(model, layout, vars, z, incumbent);
    CHECK(fast == doctest::Approx(slow).epsilon(1e-8));
  }
}

TEST_CASE("stage decomposition and non-negativity") {
  Rng rng(83);
  const GpModel model = random_model(10, 2, rng);
  TreeLayout layout{3, {3, 2}, 2};
  const BaseSampleTree z = draw_base_samples(layout, SampleMode::GaussHermite, 0);
  TreeVariables vars;
  vars.layout = layout;
  vars.flat.resize(layout.variable_count());
  for (int trial = 0; trial < 10; ++trial) {
    for (int i = 0; i < vars.flat.size(); ++i) vars.flat[i] = rng.uniform();
    const AcquisitionValue value =
        multi_step_objective(model, layout, vars, z, model.data.incumbent());
    CHECK(value.per_stage.size() == 3);
    for (int t = 0; t < 3; ++t) CHECK(value.per_stage[t] >= 0.0);
    CHECK(std::abs(value.value - value.per_stage.sum()) <= 1e-12);
  }
}

TEST_CASE("tree variables index map and extraction") {
  TreeLayout layout{3, {3, 2}, 2};
  layout.validate();
  CHECK(layout.variable_count() == 2 * (1 + 3 + 6));
  CHECK(layout.nodes_at_level(1) == 1);
  CHECK(layout.nodes_at_level(2) == 3);
  CHECK(layout.nodes_at_level(3) == 6);

  // the index map is a bijection onto the flat vector
  std::vector<bool> seen(layout.variable_count(), false);
  for (int t = 1; t <= 3; ++t)
    for (int node = 0; node < layout.nodes_at_level(t); ++node) {
      const int off = layout.slice_offset(t, node);
      for (int c = 0; c < 2; ++c) {
        CHECK(!seen[off + c]);
        seen[off + c] = true;
      }
    }
  for (bool s : seen) CHECK(s);

  // node_index round trip
  CHECK(layout.node_index(3, {2, 1}) == 5);
  CHECK(layout.node_index(2, {1}) == 1);
  CHECK_THROWS_AS(layout.node_index(2, {7}), std::invalid_argument);

  TreeVariables vars;
  vars.layout = layout;
  vars.flat = Eigen::VectorXd::LinSpaced(layout.variable_count(), 0.0, 1.0);
  const Eigen::VectorXd root = extract_candidate(vars);
  CHECK(root.size() == 2);
  CHECK(root[0] == vars.flat[0]);
  CHECK(root[1] == vars.flat[1]);
  CHECK(vars.node_point(3, 5) ==
        vars.flat.segment(layout.slice_offset(3, 5), 2));
}

TEST_CASE("eno reduces to the two-step tree in the MC limit") {
  Rng rng(89);
  const GpModel model = random_model(9, 1, rng);
  const int m1 = 4;
  const GaussHermiteRule gh = gauss_hermite_rule(m1);
  const double incumbent = model.data.incumbent();

  // batch size 1 (k=2): the inner MC value estimates the stage-2 analytic EI
  const int mc = 20000;
  Eigen::MatrixXd mc_z(mc, 1);
  Rng zrng(5);
  for (int i = 0; i < mc; ++i) mc_z(i, 0) = zrng.normal();
  Eigen::VectorXd vars(1 + m1 * 1);
  vars << 0.45, 0.2, 0.5, 0.7, 0.9;
  const double eno = eno_objective(model, 2, m1, vars, gh.nodes, gh.weights, mc_z, incumbent);

  TreeLayout layout{2, {m1}, 1};
  BaseSampleTree z = draw_base_samples(layout, SampleMode::GaussHermite, 0);
  const double tree = multi_step_value<double>(
      model, layout, std::span<const double>(vars.data(), vars.size()), z, incumbent);
  CHECK(eno == doctest::Approx(tree).epsilon(0.05));
}

TEST_CASE("eno: duplicated batch points add nothing under the max") {
  Rng rng(97);
  const GpModel model = random_model(10, 1, rng, 1e-8);
  const int m1 = 3;
  const GaussHermiteRule gh = gauss_hermite_rule(m1);
  const double incumbent = model.data.incumbent();
  const int mc = 4000;
  Rng zrng(9);
  Eigen::MatrixXd mc2(mc, 2), mc1(mc, 1);
  for (int i = 0; i < mc; ++i) {
    mc2(i, 0) = zrng.normal();
    mc2(i, 1) = zrng.normal();
    mc1(i, 0) = mc2(i, 0);
  }
  // k=3 with both batch points at p vs k=2 with the single point p
  Eigen::VectorXd v3(1 + m1 * 2), v2(1 + m1 * 1);
  const double x = 0.35, p = 0.75;
  v3 << x, p, p, p, p, p, p;
  v2 << x, p, p, p;
  const double duplicated = eno_objective(model, 3, m1, v3, gh.nodes, gh.weights, mc2, incumbent);
  const double single = eno_objective(model, 2, m1, v2, gh.nodes, gh.weights, mc1, incumbent);
  CHECK(duplicated == doctest::Approx(single).epsilon(2e-3));
}

TEST_CASE("eno matches a nested-loop oracle") {
  Rng rng(101);
  const GpModel model = random_model(8, 2, rng);
  const int m1 = 3, horizon = 3, batch = 2;
  const GaussHermiteRule gh = gauss_hermite_rule(m1);
  const double incumbent = model.data.incumbent();
  const int mc = 500;
  Rng zrng(77);
  Eigen::MatrixXd mc_z(mc, batch);
  for (int i = 0; i < mc * batch; ++i) mc_z(i / batch, i % batch) = zrng.normal();

  Eigen::VectorXd vars(2 + m1 * batch * 2);
  for (int i = 0; i < vars.size(); ++i) vars[i] = rng.uniform();
  const double fast =
      eno_objective(model, horizon, m1, vars, gh.nodes, gh.weights, mc_z, incumbent);

  // oracle: explicit flat conditioning per level-1 branch, dense linear
  // algebra for the batch posterior, identical base samples
  Eigen::MatrixXd xq(1, 2);
  xq.row(0) = vars.head(2);
  const Posterior at_x = posterior(model, xq);
  const double obs_std =
      std::sqrt(std::max(at_x.covariance(0, 0), 0.0) + model.hp.noise_variance);
  double slow = ei_analytic(at_x.mean[0], obs_std, incumbent);
  for (int i = 0; i < m1; ++i) {
    const double y = at_x.mean[0] + obs_std * gh.nodes[i];
    const GpModel cond = conditioned(model, vars.head(2), y);
    Eigen::MatrixXd batch_points(batch, 2);
    for (int b = 0; b < batch; ++b) batch_points.row(b) = vars.segment(2 + i * batch * 2 + b * 2, 2);
    Posterior post = posterior(cond, batch_points);
    post.covariance.diagonal().array() += model.hp.noise_variance;
    const Eigen::MatrixXd samples = correlate(post, mc_z);
    slow += gh.weights[i] * batch_improvement_mc(samples, std::max(incumbent, y));
  }
  CHECK(fast == doctest::Approx(slow).epsilon(1e-6));
}

TEST_CASE("pick_weighted proportional selection") {
  Eigen::VectorXd w(3);
  w << 0.3, 0.1, 0.0;
  // normalized probabilities are (0.75, 0.25, 0)
  CHECK(pick_weighted(w, 0.0) == 0);
  CHECK(pick_weighted(w, 0.7499) == 0);
  CHECK(pick_weighted(w, 0.7501) == 1);
  CHECK(pick_weighted(w, 0.9999) == 1);
  // all-zero weights fall back to a uniform choice
  Eigen::VectorXd zero = Eigen::VectorXd::Zero(4);
  CHECK(pick_weighted(zero, 0.0) == 0);
  CHECK(pick_weighted(zero, 0.26) == 1);
  CHECK(pick_weighted(zero, 0.99) == 3);
}

TEST_CASE("binoculars is deterministic and degenerates at q=1") {
  Rng rng(103);
  const GpModel model = random_model(7, 1, rng);
  PolicyConfig policy;
  policy.type = PolicyType::Binoculars;
  policy.binoculars_q = 1;
  policy.mc_samples = 64;
  policy.optimizer.restarts = 4;
  const double incumbent = model.data.incumbent();
  ProposeDiagnostics diag;
  const Eigen::VectorXd pick = binoculars_select(model, incumbent, 1, 7, policy, &diag);
  // q = 1: the returned point is the q-EI maximizer itself
  CHECK((pick - diag.solution_flat).cwiseAbs().maxCoeff() == 0.0);

  policy.binoculars_q = 3;
  const Eigen::VectorXd a = binoculars_select(model, incumbent, 3, 11, policy);
  const Eigen::VectorXd b = binoculars_select(model, incumbent, 3, 11, policy);
  CHECK((a - b).cwiseAbs().maxCoeff() == 0.0);
}
