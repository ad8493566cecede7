#include <cmath>
#include <limits>
#include <memory>

#include "doctest.h"
#include "fixtures.hpp"
#include "opera/confidence.hpp"
#include "opera/errors.hpp"
#include "opera/estimation.hpp"
#include "opera/instances.hpp"
#include "opera/opera.hpp"

using namespace opera;
using namespace opera::testing;

namespace {

// One state, two actions, H = 1; action 0 pays 0.5 and action 1 pays 0.
TabularMdp bandit() {
  std::vector<Matrix> P(1, Matrix::Ones(2, 1));
  Matrix r(1, 2);
  r << 0.5, 0.0;
  return TabularMdp(1, 1, 2, P, {r}, 0);
}

Matrix row(double a, double b) {
  Matrix m(1, 2);
  m << a, b;
  return m;
}

std::vector<HistoryEntry> random_history(const TabularMdp& env, const HypothesisClass& F, int episodes,
                                         int h, Rng& rng) {
  std::vector<HistoryEntry> out;
  for (int t = 0; t < episodes; ++t) {
    const int b = static_cast<int>(rng.below(F.size()));
    const auto traj = rollout(env, greedy_policy(F[b], env.num_actions()), rng);
    out.push_back({traj[h], b});
  }
  return out;
}

}  // namespace

TEST_CASE("constraint LHS on an empty history is zero") {
  const auto env = bandit();
  auto F = std::make_shared<HypothesisClass>(std::vector<Hypothesis>{
      make_value_hypothesis(0, {row(0.5, 0.0)}), make_value_hypothesis(1, {row(0.5, 1.0)})});
  const BellmanDef def(F, F, env, 1.0);
  CHECK(constraint_lhs(def, 0, 0, {}) == 0.0);
  CHECK(constraint_lhs(def, 0, 1, {}) == 0.0);
  CHECK_THROWS_AS(constraint_lhs(def, 0, 0, {}, {}), InputError);
}

TEST_CASE("constraint LHS for a single Bellman observation") {
  const auto env = bandit();
  auto F = std::make_shared<HypothesisClass>(std::vector<Hypothesis>{
      make_value_hypothesis(0, {row(0.5, 0.0)}), make_value_hypothesis(1, {row(0.5, 1.0)}),
      make_value_hypothesis(2, {row(0.5, 0.3)})});
  const BellmanDef def(F, F, env, 1.0);
  const std::vector<HistoryEntry> history = {{Transition<int>{0, 1, 0.0, 0}, 1}};
  // Losses at (0, a1): 0, 1, 0.3; the minimizer is g = 0.
  CHECK(constraint_lhs(def, 0, 1, history) == doctest::Approx(1.0));
  CHECK(constraint_lhs(def, 0, 2, history) == doctest::Approx(0.09));
  CHECK(constraint_lhs(def, 0, 0, history) == doctest::Approx(0.0));
  CHECK(constraint_lhs(def, 0, 2, history, {1, 2}) == doctest::Approx(0.0));
}

TEST_CASE("incremental confidence matches brute force over (v, g)") {
  const auto spec = canonical_witness_spec();
  std::vector<Hypothesis> items = {make_model_hypothesis(0, spec.truth)};
  for (int i = 0; i < 4; ++i) items.push_back(make_model_hypothesis(i + 1, spec.alternatives[i]));
  auto F = std::make_shared<HypothesisClass>(items, Metric::kParameterSup);
  Vector u0 = Vector::Zero(3), u1(3), u2(3);
  u1 << 0.0, 1.0, -1.0;
  u2 << 0.5, -0.5, 1.0;
  auto def = std::make_shared<WitnessDef>(F, DiscriminatorClass::assembled(3, 2, {u0, u1, u2}), 0);
  Rng rng(41);
  for (int h = 0; h < 2; ++h) {
    EnumeratedConfidence conf(def);
    const auto history = random_history(spec.truth, *F, 3, h, rng);
    for (const auto& e : history) conf.add(h, e.observation, e.behavior);
    CHECK(conf.count(h) == 3);
    for (int f = 0; f < F->size(); ++f) {
      const double brute = constraint_lhs(*def, h, f, history);
      CHECK(conf.lhs(h, f) == doctest::Approx(brute).epsilon(1e-12));
      CHECK(brute >= 0.0);
    }
  }
}

TEST_CASE("selection picks the optimistic feasible hypothesis") {
  const std::vector<double> values = {0.2, 0.9, 0.7};
  const std::vector<std::vector<double>> none(2, std::vector<double>(3, 0.0));
  CHECK(select_hypothesis(values, none, 0.0) == 1);
  const double inf = std::numeric_limits<double>::infinity();
  const std::vector<std::vector<double>> big = {{5, 9, 7}, {8, 3, 4}};
  CHECK(select_hypothesis(values, big, inf) == 1);
  // The value argmax violates the constraint at step 1 only.
  const std::vector<std::vector<double>> adversarial = {{0.0, 0.1, 0.2}, {0.0, 2.0, 0.5}};
  CHECK(select_hypothesis(values, adversarial, 1.0) == 2);
  CHECK(select_hypothesis(values, adversarial, 0.3) == 0);
  CHECK(select_hypothesis({0.5, 0.5, 0.1}, none, 0.0) == 0);
  CHECK_THROWS_AS(select_hypothesis(values, adversarial, -1.0), InfeasibleSet);
}

TEST_CASE("beta schedules") {
  CHECK(beta_default(100, 3, 10.0, 0.1, 1.0) == doctest::Approx(18.0065).epsilon(1e-4));
  CHECK(beta_default(100, 3, 10.0, 0.1, 1.0) == doctest::Approx(std::log(100.0 * 3.0 * std::exp(10.0) / 0.1)));
  CHECK(log_loss_cover(5.0, 5.0, 0.0) == doctest::Approx(15.0));
  const double near_one = beta_default(100, 3, 10.0, 1.0 - 1e-12, 2.0);
  CHECK(near_one == doctest::Approx(2.0 * std::log(300.0 * std::exp(10.0))));
  CHECK(beta_default(100, 3, 10.0 + std::log(2.0), 0.1, 1.5) - beta_default(100, 3, 10.0, 0.1, 1.5) ==
        doctest::Approx(1.5 * std::log(2.0)));
  const double l = std::log(400.0 * 3 / 0.1);
  CHECK(beta_knr(400, 3, 0.1, 2, 2, 0.1, 1.0) == doctest::Approx(0.01 * 4 * l * l));
}

TEST_CASE("config validation") {
  OperaConfig c;
  CHECK_NOTHROW(c.validate());
  c.episodes = 0;
  CHECK_THROWS_AS(c.validate(), InputError);
  c = OperaConfig{};
  c.delta = 1.0;
  CHECK_THROWS_AS(c.validate(), InputError);
  c = OperaConfig{};
  c.beta = -0.5;
  CHECK_THROWS_AS(c.validate(), InputError);
  c = OperaConfig{};
  c.c = 0.0;
  CHECK_THROWS_AS(c.validate(), InputError);
}

TEST_CASE("ridge fit against an independent solver") {
  Rng rng(43);
  Matrix X(3, 40), Y(2, 40);
  for (int i = 0; i < X.size(); ++i) X.data()[i] = rng.normal();
  for (int i = 0; i < Y.size(); ++i) Y.data()[i] = rng.normal();
  const auto fit = ridge_fit_columns(X, Y, 0.0);
  CHECK_FALSE(fit.pseudo_inverse);
  const Matrix ls = X.transpose().colPivHouseholderQr().solve(Y.transpose()).transpose();
  CHECK((fit.estimate - ls).cwiseAbs().maxCoeff() < 1e-10);
  // Raw residual differences equal the Sigma-norm distance.
  const Matrix P = ls + Matrix::Constant(2, 3, 0.1);
  const double raw = (P * X - Y).squaredNorm() - (ls * X - Y).squaredNorm();
  CHECK(fit.distance(P) == doctest::Approx(raw).epsilon(1e-9));
  CHECK(residual_sum(P, X * X.transpose(), Y * X.transpose(), Y.squaredNorm()) ==
        doctest::Approx((P * X - Y).squaredNorm()).epsilon(1e-10));
}

TEST_CASE("single datapoint and singular Gram matrix") {
  Matrix x(2, 1), y(1, 1);
  x << 1.0, 2.0;
  y << 3.0;
  const auto fit = ridge_fit_columns(x, y, 0.0);
  CHECK(fit.pseudo_inverse);
  CHECK((fit.estimate * x)(0, 0) == doctest::Approx(3.0));
  CHECK(fit.distance(fit.estimate) == doctest::Approx(0.0).scale(1.0));
  CHECK_THROWS_AS(ridge_fit_columns(x, y, -1.0), InputError);
}

TEST_CASE("linear mixture closed form equals the raw residual form") {
  const auto inst = make_linear_mixture(canonical_linear_mixture_spec());
  const auto& def = *inst.mixture;
  Rng rng(47);
  for (int h = 0; h < 3; ++h) {
    const auto history = random_history(*inst.env, *inst.hypotheses, 30, h, rng);
    const auto fit = linear_mixture_confidence(def, h, history, 0.0);
    LinearMixtureConfidence conf(inst.mixture, 0.0);
    for (const auto& e : history) conf.add(h, e.observation, e.behavior);
    for (int f = 0; f < def.num_hypotheses(); f += 3) {
      double raw_f = 0.0;
      double raw_hat = 0.0;
      for (const auto& e : history) {
        const Vector& x = def.regressor(h, e.behavior, e.observation.state, e.observation.action);
        const double y = e.observation.reward + (*inst.hypotheses)[e.behavior].v[h + 1](e.observation.next);
        raw_f += std::pow(def.theta(h, f).dot(x) - y, 2);
        raw_hat += std::pow((fit.estimate * x)(0) - y, 2);
      }
      const double closed = fit.distance(def.theta(h, f).transpose());
      CHECK(std::abs(closed - (raw_f - raw_hat)) <= 1e-8);
      CHECK(conf.lhs(h, f) == doctest::Approx(closed).epsilon(1e-10));
    }
  }
}

TEST_CASE("singleton class has zero regret") {
  const auto full = make_linear_mixture(canonical_linear_mixture_spec());
  auto spec = canonical_linear_mixture_spec();
  for (int h = 0; h < 3; ++h) spec.theta_grid[h] = {spec.theta_star[h]};
  const auto inst = make_linear_mixture(spec);
  REQUIRE(inst.hypotheses->size() == 1);
  const auto problem = make_problem(inst);
  auto conf = make_confidence(inst, false);
  OperaConfig cfg;
  cfg.episodes = 30;
  const auto log = opera_run(problem, *conf, cfg, 0.0);
  for (const auto& e : log.episodes) {
    CHECK(e.selected == 0);
    CHECK(std::abs(e.regret) < 1e-12);
  }
  CHECK(problem.optimal_value == doctest::Approx(0.355556).epsilon(1e-5));
  CHECK(full.hypotheses->size() == 64);
}

TEST_CASE("a wrong optimistic hypothesis is eliminated after one episode") {
  const auto env = bandit();
  auto F = std::make_shared<HypothesisClass>(std::vector<Hypothesis>{
      make_value_hypothesis(0, {row(0.5, 0.0)}), make_value_hypothesis(1, {row(0.5, 1.0)})});
  F->set_optimal_index(0);
  auto G = std::make_shared<HypothesisClass>(close_under_backup(*F, env));
  auto def = std::make_shared<BellmanDef>(F, G, env, 1e-12);
  OperaProblem<int> problem;
  problem.horizon = 1;
  problem.num_actions = 2;
  problem.num_hypotheses = 2;
  problem.step = [env](int h, int s, int a, Rng& rng) { return env.step(h, s, a, rng); };
  problem.act = [F](int f, int h, int s) { return (*F)[f].action(h, s); };
  problem.optimistic_values = {0.5, 1.0};
  problem.policy_values = {0.5, 0.0};
  problem.optimal_value = 0.5;
  problem.optimal_index = 0;
  EnumeratedConfidence conf(def);
  OperaConfig cfg;
  cfg.episodes = 10;
  const auto log = opera_run(problem, conf, cfg, 0.5);
  CHECK(log.episodes[0].selected == 1);
  CHECK(log.episodes[0].regret == doctest::Approx(0.5));
  for (int t = 1; t < 10; ++t) CHECK(log.episodes[t].selected == 0);
  CHECK(log.cumulative_regret(10) == doctest::Approx(0.5));
  CHECK(log.fstar_always_feasible());
  CHECK(log.optimism_violations == 0);
  CHECK(conf.lhs(0, 1) == doctest::Approx(1.0));
  CHECK(log.sample_complexity(0.05) == 10);
  CHECK_FALSE(log.sample_complexity(0.01).has_value());
  CHECK_THROWS_AS(log.cumulative_regret(11), InputError);
}

TEST_CASE("dataset sizes in both modes") {
  const auto inst = make_witness(canonical_witness_spec());
  const auto problem = make_problem(inst);
  for (const auto mode : {OperatingMode::kQType, OperatingMode::kVType}) {
    auto conf = make_confidence(inst, false);
    OperaConfig cfg;
    cfg.episodes = 7;
    cfg.mode = mode;
    opera_run(problem, *conf, cfg, 1e9);
    for (int h = 0; h < 2; ++h) CHECK(conf->count(h) == 7);
  }
}

TEST_CASE("optimism holds whenever f* is feasible") {
  const auto inst = make_linear_mixture(canonical_linear_mixture_spec());
  const auto problem = make_problem(inst);
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    auto conf = make_confidence(inst, true);
    OperaConfig cfg;
    cfg.episodes = 100;
    cfg.seed = seed;
    const auto log = opera_run(problem, *conf, cfg, default_beta(inst, 100, 0.1, 0.05));
    CHECK(log.optimism_violations == 0);
    for (const auto& e : log.episodes) {
      if (e.fstar_feasible) CHECK(e.value_optimistic >= problem.optimal_value - 1e-12);
      CHECK(e.regret >= -1e-12);
    }
    for (std::size_t t = 1; t < log.episodes.size(); ++t)
      CHECK(log.episodes[t].cum_regret >= log.episodes[t - 1].cum_regret - 1e-12);
  }
}

TEST_CASE("enumerated and closed-form linear mixture runs select the same hypotheses") {
  // theta* = (1, 0) makes every transition deterministic, so the regression
  // targets are noise free and the class contains the least-squares fit.
  auto spec = canonical_linear_mixture_spec();
  for (auto& t : spec.theta_star) t << 1.0, 0.0;
  const auto inst = make_linear_mixture(spec);
  const auto problem = make_problem(inst);
  auto enumerated = make_confidence(inst, false);
  auto closed = make_confidence(inst, true);
  OperaConfig cfg;
  cfg.episodes = 60;
  cfg.seed = 3;
  const double beta = 0.05;
  const auto a = opera_run(problem, *enumerated, cfg, beta);
  const auto b = opera_run(problem, *closed, cfg, beta);
  for (int t = 0; t < cfg.episodes; ++t) CHECK(a.episodes[t].selected == b.episodes[t].selected);
}
