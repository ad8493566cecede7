#include <cmath>

#include "doctest.h"
#include "fixtures.hpp"
#include "opera/errors.hpp"
#include "opera/instances.hpp"
#include "opera/serialization.hpp"

using namespace opera;
using namespace opera::testing;

namespace {

bool all_passed(const std::vector<CheckReport>& checks) {
  for (const auto& c : checks)
    if (!c.passed) return false;
  return !checks.empty();
}

const CheckReport* find(const std::vector<CheckReport>& checks, const std::string& prefix) {
  for (const auto& c : checks)
    if (c.name.rfind(prefix, 0) == 0) return &c;
  return nullptr;
}

double max_abs_diff(const TabularMdp& a, const TabularMdp& b) {
  double m = 0.0;
  for (int h = 0; h < a.horizon(); ++h) {
    m = std::max(m, (a.transition_matrix(h) - b.transition_matrix(h)).cwiseAbs().maxCoeff());
    m = std::max(m, (a.reward_matrix(h) - b.reward_matrix(h)).cwiseAbs().maxCoeff());
  }
  return m;
}

}  // namespace

TEST_CASE("canonical linear mixture fixture") {
  const auto spec = canonical_linear_mixture_spec();
  const auto inst = make_linear_mixture(spec);
  CHECK(inst.family == "linear_mixture");
  CHECK(inst.hypotheses->size() == 64);
  CHECK(inst.optimal_index == 21);
  CHECK(all_passed(inst.construction_checks));
  CHECK(inst.tightest_kappa == doctest::Approx(1.0));
  const auto& env = *inst.env;
  for (int h = 0; h < env.horizon(); ++h)
    for (int c = 0; c < env.num_states() * env.num_actions(); ++c) {
      CHECK(env.transition_matrix(h).row(c).sum() == doctest::Approx(1.0));
      CHECK(env.transition_matrix(h).row(c).minCoeff() >= 0.0);
    }
  CHECK(max_abs_diff(mixture_model(spec.features, spec.theta_star, spec.initial_state), env) == 0.0);
  CHECK(optimal_values(env).values.v[0](0) == doctest::Approx(0.355556).epsilon(1e-5));
}

TEST_CASE("one-component mixtures keep only the valid scalar") {
  MixtureFeatures feat;
  feat.dim = 1;
  feat.num_states = 2;
  feat.num_actions = 1;
  feat.phi.assign(4, Vector::Zero(1));
  feat.psi.assign(2, Vector::Zero(1));
  feat.phi[0](0) = 0.0;
  feat.phi[1](0) = 1.0;
  feat.phi[3](0) = 1.0;
  feat.psi[1](0) = 0.5;
  LinearMixtureSpec spec;
  spec.horizon = 1;
  spec.features = feat;
  spec.theta_star = {Vector::Constant(1, 1.0)};
  spec.theta_grid = {{Vector::Constant(1, 0.5), Vector::Constant(1, 1.0), Vector::Constant(1, -1.0),
                      Vector::Constant(1, 1.5)}};
  const auto inst = make_linear_mixture(spec);
  CHECK(inst.hypotheses->size() == 1);
  CHECK_THROWS_AS(mixture_model(feat, {Vector::Constant(1, 0.5)}, 0), InputError);
  spec.theta_star = {Vector::Constant(1, 0.5)};
  CHECK_THROWS_AS(make_linear_mixture(spec), ConstructionError);
  spec.theta_star = {Vector::Constant(1, 1.0)};
  spec.theta_grid = {{Vector::Constant(1, -1.0)}};
  CHECK_THROWS_AS(make_linear_mixture(spec), ConstructionError);
}

TEST_CASE("random linear mixture instances pass their checks") {
  Rng rng(91);
  for (int i = 0; i < 5; ++i) {
    const auto spec = random_linear_mixture_spec(2, 2, 3, 2, 3, rng);
    const auto inst = make_linear_mixture(spec);
    CHECK(all_passed(inst.construction_checks));
    const auto bell = make_bellman_instance(spec);
    CHECK(all_passed(bell.construction_checks));
  }
}

TEST_CASE("Bellman fixture and broken kappa") {
  const auto inst = make_bellman_instance(canonical_linear_mixture_spec());
  CHECK(inst.family == "bellman");
  CHECK(inst.kappa == 1.0);
  CHECK(all_passed(inst.construction_checks));
  const auto broken = verify_instance(inst, 2.0);
  const auto* dom = find(broken, "bellman_dominance");
  REQUIRE(dom != nullptr);
  CHECK_FALSE(dom->passed);
  CHECK(find(broken, "decomposability")->passed);
}

TEST_CASE("witness fixture") {
  const auto inst = make_witness(canonical_witness_spec());
  CHECK(inst.family == "witness");
  CHECK(inst.hypotheses->size() == 8);
  CHECK(inst.optimal_index == 0);
  CHECK(inst.kappa == 1.0);
  CHECK(inst.tightest_kappa >= inst.kappa - 1e-12);
  CHECK(all_passed(inst.construction_checks));
  CHECK(optimal_values(*inst.env).values.v[0](0) == doctest::Approx(0.72));
}

TEST_CASE("a singleton model class has a zero coupling") {
  auto spec = canonical_witness_spec();
  spec.alternatives.clear();
  const auto inst = make_witness(spec);
  CHECK(inst.hypotheses->size() == 1);
  for (int h = 0; h < 2; ++h) CHECK(inst.coupling(h, 0, 0) == 0.0);
  CHECK(all_passed(inst.construction_checks));
}

TEST_CASE("witness discrepancy under indicators is the total variation distance") {
  const auto spec = canonical_witness_spec();
  WitnessSpec two{spec.truth, {spec.alternatives[1]}, 1.0, 1.0};  // p0 = 0.5, p1 = 0.6
  const auto inst = make_witness(two);
  const auto& V = inst.def->discriminators();
  double best = -1.0;
  for (int u = 0; u < V.num_units(); ++u) {
    const auto v = V.element_with(V.cell_of(0, 0), u);
    best = std::max(best, expected_def(*inst.def, spec.truth, 0, 0, 0, 0, 0, 1, v)(0));
  }
  CHECK(best == doctest::Approx(0.3));
  for (int u = 0; u < V.num_units(); ++u) {
    const auto v = V.element_with(V.cell_of(0, 1), u);
    CHECK(std::abs(expected_def(*inst.def, spec.truth, 0, 0, 0, 1, 0, 1, v)(0)) < 1e-15);
  }
}

TEST_CASE("random witness instances pass their checks") {
  Rng rng(97);
  for (int i = 0; i < 3; ++i) {
    const auto inst = make_witness(random_witness_spec(3, 2, 2, 4, rng));
    CHECK(inst.hypotheses->size() == 4);
    CHECK(all_passed(inst.construction_checks));
  }
}

TEST_CASE("default beta uses the class sizes") {
  const auto inst = make_linear_mixture(canonical_linear_mixture_spec());
  const double lf = std::log(64.0);
  const double expect = 0.05 * (std::log(400.0) + std::log(3.0) + 3 * lf + std::log(10.0));
  CHECK(default_beta(inst, 400, 0.1, 0.05) == doctest::Approx(expect));
}

TEST_CASE("JSON round trips") {
  Rng rng(101);
  const auto env = random_mdp(3, 2, 2, rng);
  CHECK(max_abs_diff(tabular_mdp_from_json(to_json(env)), env) == 0.0);
  const auto lm = canonical_linear_mixture_spec();
  const auto lm2 = linear_mixture_spec_from_json(to_json(lm));
  CHECK(lm2.horizon == lm.horizon);
  CHECK(lm2.theta_grid[1].size() == lm.theta_grid[1].size());
  CHECK(make_linear_mixture(lm2).optimal_index == 21);
  const auto ws = canonical_witness_spec();
  const auto ws2 = witness_spec_from_json(to_json(ws));
  CHECK(ws2.alternatives.size() == 7);
  CHECK(max_abs_diff(ws2.alternatives[4], ws.alternatives[4]) == 0.0);
  const auto ks = canonical_knr_spec();
  const auto ks2 = knr_spec_from_json(to_json(ks));
  CHECK(ks2.u_grid[0].size() == 3);
  CHECK((ks2.u_grid[1][2] - ks.u_grid[1][2]).norm() == 0.0);
  CHECK(ks2.planning_budget == 256);
  Matrix t(2, 3);
  t << 1, 2, 3, 4, 5, 6;
  CHECK((coupling_table_from_json(coupling_table_json(t)) - t).norm() == 0.0);
  CHECK_THROWS(tabular_mdp_from_json(Json::parse(R"({"H": 1})")));
}
