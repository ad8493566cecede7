#include <cmath>

#include "doctest.h"
#include "opera/errors.hpp"
#include "opera/instances.hpp"
#include "opera/knr.hpp"

using namespace opera;

namespace {

Matrix scalar(double x) { return Matrix::Constant(1, 1, x); }

// d_s = d_phi = 1, H = 2, no noise, reward (1/2) clamp(s + 0.1, 0, 1).
// Action 0 has feature tanh(s), action 1 has tanh(s + 1).
KnrSpec line_spec() {
  KnrSpec spec;
  spec.state_dim = 1;
  spec.feature_dim = 1;
  spec.num_actions = 2;
  spec.horizon = 2;
  spec.sigma = 0.0;
  spec.feature_weights = scalar(1.0);
  spec.action_bias = {Vector::Zero(1), Vector::Constant(1, 1.0)};
  spec.initial_state = Vector::Zero(1);
  spec.linear_reward = true;
  spec.reward_weights = Vector::Constant(1, 1.0);
  spec.reward_offset = 0.1;
  spec.u_star = {scalar(1.0), scalar(1.0)};
  spec.u_grid = {{scalar(1.0), scalar(0.5)}, {scalar(1.0)}};
  spec.planning_budget = 4;
  spec.value_rollouts = 4;
  return spec;
}

const KnrInstance& canonical() {
  static const KnrInstance inst(canonical_knr_spec());
  return inst;
}

std::vector<Transition<Vector>> sample_transitions(const KnrInstance& inst, int h, int n, Rng& rng) {
  std::vector<Transition<Vector>> out;
  const int ds = inst.spec().state_dim;
  for (int i = 0; i < n; ++i) {
    Vector s(ds);
    for (int k = 0; k < ds; ++k) s(k) = 2.0 * rng.uniform() - 1.0;
    const int a = static_cast<int>(rng.below(inst.spec().num_actions));
    auto [r, next] = inst.env().step(h, s, a, rng);
    out.push_back({s, a, r, next});
  }
  return out;
}

}  // namespace

TEST_CASE("noise-free scalar regulator matches the hand recursion") {
  const KnrInstance inst(line_spec());
  const double t1 = std::tanh(1.0);
  REQUIRE(inst.num_hypotheses() == 2);
  CHECK(inst.optimal_index() == 0);
  CHECK(inst.optimal_value() == doctest::Approx(0.05 + 0.5 * (t1 + 0.1)));
  CHECK(inst.optimistic_values()[0] == doctest::Approx(0.05 + 0.5 * (t1 + 0.1)));
  CHECK(inst.optimistic_values()[1] == doctest::Approx(0.05 + 0.5 * (0.5 * t1 + 0.1)));
  // Hypothesis 1 still prefers action 1, so its policy is optimal.
  CHECK(inst.policy_values()[1] == doctest::Approx(inst.optimal_value()));
  CHECK(inst.act(0, 0, inst.spec().initial_state) == 1);
  CHECK(inst.features(Vector::Constant(1, 0.5), 1)(0) == doctest::Approx(std::tanh(1.5)));
  CHECK(inst.reward(1, Vector::Constant(1, 2.0), 0) == doctest::Approx(0.5));
  CHECK(inst.reward(1, Vector::Constant(1, -2.0), 0) == doctest::Approx(0.0));
}

TEST_CASE("invalid specs") {
  auto spec = line_spec();
  spec.planning_budget = 0;
  CHECK_THROWS_AS(KnrInstance{spec}, InputError);
  spec = line_spec();
  spec.sigma = -1.0;
  CHECK_THROWS_AS(KnrInstance{spec}, InputError);
  spec = line_spec();
  spec.u_grid[0] = {scalar(0.5)};
  CHECK_THROWS_AS(KnrInstance{spec}, ConstructionError);
  spec = line_spec();
  spec.feature_scale = 1.0;
  spec.feature_bound = 0.1;
  CHECK_THROWS_AS(KnrInstance{spec}, ConstructionError);
  spec = line_spec();
  spec.action_bias.pop_back();
  CHECK_THROWS_AS(KnrInstance{spec}, InputError);
}

TEST_CASE("environment mean matches U* phi within three standard errors") {
  const auto& inst = canonical();
  Rng rng(61);
  Vector s(2);
  s << 0.3, -0.2;
  const int N = 100000;
  Vector mean = Vector::Zero(2);
  for (int i = 0; i < N; ++i) mean += inst.env().step(0, s, 1, rng).second;
  mean /= N;
  const Vector expect = inst.spec().u_star[0] * inst.features(s, 1);
  const double tol = 3.0 * inst.spec().sigma / std::sqrt(static_cast<double>(N));
  CHECK((mean - expect).cwiseAbs().maxCoeff() <= tol);
}

TEST_CASE("canonical instance values") {
  const auto& inst = canonical();
  CHECK(inst.num_hypotheses() == 9);
  CHECK(inst.optimal_index() == 0);
  CHECK(inst.optimal_value() == doctest::Approx(0.5428).epsilon(0.01));
  // The most optimistic hypotheses plan for states they cannot reach.
  int best = 0;
  for (int f = 1; f < 9; ++f)
    if (inst.optimistic_values()[f] > inst.optimistic_values()[best]) best = f;
  CHECK(best != inst.optimal_index());
  CHECK(inst.policy_values()[best] < inst.optimal_value() - 0.1);
  for (int f = 0; f < 9; ++f) CHECK(inst.policy_values()[f] <= inst.optimal_value() + 3 * inst.policy_value_errors()[f] + 1e-9);
}

TEST_CASE("U* policy value agrees with independent rollouts") {
  const auto& inst = canonical();
  const int star = inst.optimal_index();
  Rng rng(67);
  const int N = 4000;
  double sum = 0.0;
  double sq = 0.0;
  for (int i = 0; i < N; ++i) {
    const auto traj = rollout(inst.env(), [&](int h, const Vector& s) { return inst.act(star, h, s); }, rng);
    const double g = trajectory_return(traj);
    sum += g;
    sq += g * g;
  }
  const double mean = sum / N;
  const double se = std::sqrt((sq / N - mean * mean) / N);
  CHECK(std::abs(mean - inst.optimal_value()) <= 4.0 * se + 3.0 * inst.policy_value_errors()[star]);
}

TEST_CASE("noiseless least squares recovers U*") {
  auto spec = canonical_knr_spec();
  spec.sigma = 0.0;
  spec.planning_budget = 2;
  spec.value_rollouts = 2;
  const KnrInstance inst(spec);
  Rng rng(71);
  const auto history = sample_transitions(inst, 0, 10, rng);
  const auto fit = knr_confidence(inst, 0, history, 0.0);
  CHECK((fit.estimate - spec.u_star[0]).cwiseAbs().maxCoeff() < 1e-10);
  CHECK(fit.contains(spec.u_star[0], 1e-18));
}

TEST_CASE("fifty noisy samples recover U* in operator norm") {
  auto spec = canonical_knr_spec();
  spec.planning_budget = 2;
  spec.value_rollouts = 2;
  const KnrInstance inst(spec);
  Rng rng(73);
  const auto history = sample_transitions(inst, 1, 50, rng);
  const auto fit = knr_confidence(inst, 1, history, 0.0);
  // Independent solver: one least-squares problem per output coordinate.
  Matrix Phi(50, 2);
  Matrix Y(50, 2);
  for (int i = 0; i < 50; ++i) {
    Phi.row(i) = inst.features(history[i].state, history[i].action).transpose();
    Y.row(i) = history[i].next.transpose();
  }
  Matrix rows(2, 2);
  for (int k = 0; k < 2; ++k) rows.row(k) = Phi.colPivHouseholderQr().solve(Y.col(k)).transpose();
  CHECK((fit.estimate - rows).cwiseAbs().maxCoeff() < 1e-9);
  Eigen::JacobiSVD<Matrix> svd(fit.estimate - spec.u_star[1]);
  CHECK(svd.singularValues()(0) <= 0.2);
}

TEST_CASE("matrix form equals the raw residual form") {
  const auto& inst = canonical();
  KnrConfidence conf(inst, KnrConstraintForm::kMatrix, 0.0);
  KnrConfidence finite(inst, KnrConstraintForm::kFiniteClass, 0.0);
  Rng rng(79);
  for (int h = 0; h < 3; ++h)
    for (const auto& o : sample_transitions(inst, h, 40, rng)) {
      conf.add(h, o, 0);
      finite.add(h, o, 0);
    }
  for (int h = 0; h < 3; ++h) {
    const auto fit = conf.fit(h);
    const double best = conf.raw_residual(h, fit.estimate);
    double class_min = 1e300;
    for (int g = 0; g < inst.num_hypotheses(); ++g) class_min = std::min(class_min, conf.raw_residual(h, inst.u(g, h)));
    for (int f = 0; f < inst.num_hypotheses(); ++f) {
      const double raw = conf.raw_residual(h, inst.u(f, h));
      CHECK(std::abs(conf.lhs(h, f) - (raw - best)) <= 1e-8);
      CHECK(finite.lhs(h, f) == doctest::Approx(raw - class_min).epsilon(1e-9));
      CHECK(finite.lhs(h, f) <= conf.lhs(h, f) + 1e-8);
    }
  }
}

TEST_CASE("loss, clipping and decomposability") {
  const auto& inst = canonical();
  const double R = inst.clip_radius(1000, 0.1);
  CHECK(R > 2.0 * inst.feature_bound());
  const KnrDef def(inst, R);
  CHECK(check_knr_decomposability(inst, def, 500, 3, 1e-10).passed);
  const KnrDef tight(inst, 1e-3);
  Rng rng(83);
  const auto o = sample_transitions(inst, 0, 1, rng)[0];
  CHECK(tight.eval(0, o, 1).norm() <= 1e-3 + 1e-12);
  CHECK(tight.clip_events() >= 1);
  const Vector raw = def.eval_unclipped(0, o, 1);
  CHECK((raw - (inst.u(1, 0) * inst.features(o.state, o.action) - o.next)).norm() < 1e-12);
  CHECK(def.expected(0, o.state, o.action, inst.optimal_index()).norm() < 1e-15);
  CHECK_THROWS_AS(KnrDef(inst, 0.0), InputError);
}

TEST_CASE("coupling and dominance checks") {
  const auto& inst = canonical();
  const KnrCoupling coupling(inst, 1000, 5);
  CHECK(coupling.kappa() == doctest::Approx(0.1 / 6.0));
  for (int g = 0; g < inst.num_hypotheses(); ++g)
    for (int h = 0; h < 3; ++h) {
      CHECK(coupling.value(h, inst.optimal_index(), g) == doctest::Approx(0.0));
      CHECK(coupling.value(h, g, g) >= 0.0);
    }
  CHECK(check_knr_dominating_average(inst, coupling, 1e-9).passed);
  CHECK(check_knr_bellman_dominance(inst, coupling, 1000, 7).passed);
  const auto abe = knr_average_bellman_error(inst, inst.optimal_index(), 0, 500, 9);
  CHECK(std::abs(abe.mean) <= 4.0 * abe.standard_error + 1e-9);
}

TEST_CASE("an OPERA run on the regulator stays optimistic") {
  const auto& inst = canonical();
  const auto problem = inst.problem();
  KnrConfidence conf(inst);
  OperaConfig cfg;
  cfg.episodes = 40;
  const double beta = beta_knr(40, 3, 0.1, 2, 2, 0.1, 1.0);
  const auto log = opera_run(problem, conf, cfg, beta);
  CHECK(log.optimism_violations == 0);
  CHECK(log.episodes.back().selected == inst.optimal_index());
  CHECK(conf.count(0) == 40);
}
