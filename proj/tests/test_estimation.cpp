#include <cmath>
#include <memory>

#include "doctest.h"
#include "fixtures.hpp"
#include "opera/discriminator.hpp"
#include "opera/errors.hpp"
#include "opera/estimation.hpp"
#include "opera/instances.hpp"

using namespace opera;
using namespace opera::testing;

namespace {

std::shared_ptr<HypothesisClass> share(std::vector<Hypothesis> items, Metric m = Metric::kValueSup) {
  return std::make_shared<HypothesisClass>(std::move(items), m);
}

// Two states, one action, H = 2, s1 = 0 moves to state 1.
TabularMdp two_step() {
  std::vector<Matrix> P(2, Matrix::Zero(2, 2));
  P[0](0, 1) = 1.0;
  P[0](1, 1) = 1.0;
  P[1](0, 0) = 1.0;
  P[1](1, 1) = 1.0;
  std::vector<Matrix> r(2, Matrix::Zero(2, 1));
  r[0](0, 0) = 0.2;
  r[1](1, 0) = 0.1;
  return TabularMdp(2, 2, 1, P, r, 0);
}

int full_indicator_unit(const DiscriminatorClass& V) {
  for (int u = 0; u < V.num_units(); ++u) {
    bool all_one = true;
    for (int x = 0; x < V.num_states(); ++x) all_one = all_one && V.unit_value(u, 0, 0, x) == 1.0;
    if (all_one) return u;
  }
  return -1;
}

}  // namespace

TEST_CASE("Bellman loss is zero along f* on a deterministic environment") {
  const auto env = chain(3);
  auto F = share({make_value_hypothesis(0, optimal_values(env).values.q)});
  auto G = std::make_shared<HypothesisClass>(close_under_backup(*F, env));
  const BellmanDef def(F, G, env, 1e-12);
  Rng rng(1);
  const auto traj = rollout(env, Policy::deterministic((*F)[0].greedy, 2), rng);
  for (int h = 0; h < 3; ++h) CHECK(def.eval(h, 0, traj[h], 0, 0, 0)(0) == doctest::Approx(0.0));
}

TEST_CASE("Bellman loss arithmetic") {
  const auto env = two_step();
  std::vector<Matrix> qf = {Matrix::Constant(2, 1, 0.3), Matrix::Constant(2, 1, 0.1)};
  std::vector<Matrix> qg = {Matrix::Constant(2, 1, 0.5), Matrix::Constant(2, 1, 0.7)};
  auto F = share({make_value_hypothesis(0, qf), make_value_hypothesis(1, qg)});
  auto G = std::make_shared<HypothesisClass>(close_under_backup(*F, env));
  const BellmanDef def(F, G, env, 1e-12);
  const Transition<int> o{0, 0, 0.2, 1};
  CHECK(def.eval(0, 0, o, 0, 1, 0)(0) == doctest::Approx(0.2));
  CHECK(def.squared_norm(0, 0, o, 0, 1, 0) == doctest::Approx(0.04));
}

TEST_CASE("Bellman loss matches recomputation from raw tables") {
  Rng rng(17);
  const auto env = random_mdp(3, 2, 3, rng);
  std::vector<Hypothesis> items;
  for (int i = 0; i < 4; ++i) items.push_back(make_value_hypothesis(i, random_q(3, 2, 3, rng)));
  auto F = share(items);
  auto G = std::make_shared<HypothesisClass>(close_under_backup(*F, env));
  const BellmanDef def(F, G, env, 1e-12);
  for (int k = 0; k < 200; ++k) {
    const int h = static_cast<int>(rng.below(3));
    const Transition<int> o{static_cast<int>(rng.below(3)), static_cast<int>(rng.below(2)), rng.uniform() / 3,
                            static_cast<int>(rng.below(3))};
    const int f = static_cast<int>(rng.below(4));
    const int g = static_cast<int>(rng.below(G->size()));
    const double expect = (*G)[g].q[h](o.state, o.action) - o.reward - (*F)[f].v[h + 1](o.next);
    CHECK(def.eval(h, 0, o, f, g, 0)(0) == doctest::Approx(expect).epsilon(1e-14));
  }
}

TEST_CASE("backup-closed class is exactly decomposable") {
  Rng rng(18);
  const auto env = random_mdp(3, 2, 3, rng);
  std::vector<Hypothesis> items;
  for (int i = 0; i < 5; ++i) items.push_back(make_value_hypothesis(i, random_q(3, 2, 3, rng)));
  auto F = share(items);
  auto G = std::make_shared<HypothesisClass>(close_under_backup(*F, env));
  const BellmanDef def(F, G, env, 1e-12);
  CHECK(def.completion_gap() <= 1e-12);
  const auto rep = check_decomposability(def, env, 1e-10);
  CHECK(rep.passed);
  CHECK(rep.max_violation <= 1e-10);
}

TEST_CASE("missing backup image raises a completeness violation") {
  const auto env = chain(2);
  auto q = optimal_values(env).values.q;
  q[0].array() += 0.1;
  auto F = share({make_value_hypothesis(0, q)});
  CHECK_THROWS_AS(BellmanDef(F, F, env, 0.01), CompletenessViolation);
  CHECK_NOTHROW(BellmanDef(F, F, env, 0.2));
}

TEST_CASE("expected Bellman loss of f* vanishes") {
  Rng rng(19);
  const auto env = random_mdp(3, 2, 2, rng);
  auto F = share({make_value_hypothesis(0, optimal_values(env).values.q)});
  auto G = std::make_shared<HypothesisClass>(close_under_backup(*F, env));
  const BellmanDef def(F, G, env, 1e-12);
  for (int h = 0; h < 2; ++h)
    for (int s = 0; s < 3; ++s)
      for (int a = 0; a < 2; ++a) CHECK(std::abs(expected_def(def, env, h, 0, s, a, 0, 0, 0)(0)) < 1e-14);
}

TEST_CASE("linear mixture loss: theta* gives zero mean and the mean is linear in theta") {
  const auto inst = make_linear_mixture(canonical_linear_mixture_spec());
  const auto& def = *inst.mixture;
  const auto& env = *inst.env;
  const int star = inst.optimal_index;
  const int n = inst.hypotheses->size();
  for (int h = 0; h < env.horizon(); ++h) {
    for (int b = 0; b < n; b += 7) {
      for (int s = 0; s < env.num_states(); ++s) {
        for (int a = 0; a < env.num_actions(); ++a) {
          CHECK(std::abs(expected_def(def, env, h, b, s, a, 0, star, 0)(0)) < 1e-14);
          for (int g = 0; g < n; g += 5) {
            const double formula =
                (def.theta(h, g) - def.theta(h, star)).dot(def.regressor(h, b, s, a));
            CHECK(expected_def(def, env, h, b, s, a, 0, g, 0)(0) == doctest::Approx(formula).epsilon(1e-12));
          }
        }
      }
    }
  }
}

TEST_CASE("linear mixture decomposability on random evaluations") {
  const auto inst = make_linear_mixture(canonical_linear_mixture_spec());
  const auto& def = *inst.mixture;
  const auto& env = *inst.env;
  Rng rng(23);
  for (int k = 0; k < 100; ++k) {
    const int h = static_cast<int>(rng.below(3));
    const int s = static_cast<int>(rng.below(3));
    const int a = static_cast<int>(rng.below(2));
    const int next = static_cast<int>(rng.below(3));
    const int b = static_cast<int>(rng.below(def.num_hypotheses()));
    const int f = static_cast<int>(rng.below(def.num_hypotheses()));
    const Transition<int> o{s, a, env.reward(h, s, a), next};
    const double residual = def.eval(h, b, o, f, f, 0)(0) - expected_def(def, env, h, b, s, a, f, f, 0)(0) -
                            def.eval(h, b, o, f, def.completion(h, f), 0)(0);
    CHECK(std::abs(residual) <= 1e-10);
    CHECK(std::abs(def.eval(h, b, o, f, f, 0)(0)) <= def.bound() + 1e-9);
  }
}

TEST_CASE("witness loss on point masses and constant discriminators") {
  // Truth sends (0, 0) to state 2; the alternative sends it to state 1.
  auto model = [](int target) {
    std::vector<Matrix> P(1, Matrix::Zero(3 * 2, 3));
    for (int c = 0; c < 6; ++c) P[0](c, c / 2) = 1.0;
    P[0].row(0).setZero();
    P[0](0, target) = 1.0;
    return TabularMdp(1, 3, 2, P, {Matrix::Zero(3, 2)}, 0);
  };
  const auto truth = model(2);
  auto cls = share({make_model_hypothesis(0, truth), make_model_hypothesis(1, model(1))}, Metric::kParameterSup);
  const auto V = DiscriminatorClass::indicator_family(3, 2, 1.0);
  const WitnessDef def(cls, V, 0);
  for (std::int64_t v = 0; v < 40; ++v) {
    CHECK(std::abs(expected_def(def, truth, 0, 0, 0, 0, 0, 0, v)(0)) < 1e-15);
    const double point = V.value(v, 0, 0, 1) - V.value(v, 0, 0, 2);
    CHECK(expected_def(def, truth, 0, 0, 0, 0, 0, 1, v)(0) == doctest::Approx(point));
  }
  const int unit = full_indicator_unit(V);
  REQUIRE(unit >= 0);
  const auto constant = V.element_with(V.cell_of(0, 0), unit);
  CHECK(std::abs(expected_def(def, truth, 0, 0, 0, 0, 0, 1, constant)(0)) < 1e-15);
  CHECK(def.bound() == 2.0);
}

TEST_CASE("indicator family is symmetric and assembled") {
  const auto V = DiscriminatorClass::indicator_family(3, 2, 1.0);
  CHECK(V.is_assembled());
  CHECK(V.num_units() == 15);
  CHECK(V.is_symmetric());
  CHECK(V.bound() == 1.0);
  CHECK(V.log_size() == doctest::Approx(6 * std::log(15.0)));
  const std::vector<int> choice = {3, 0, 14, 7, 1, 2};
  const auto k = V.element_from_choices(choice);
  for (int c = 0; c < 6; ++c) CHECK(V.choice_at(k, c) == choice[c]);
}

TEST_CASE("global discriminator optimality") {
  SUBCASE("trivial for losses that ignore v") {
    const auto inst = make_linear_mixture(canonical_linear_mixture_spec());
    CHECK(check_global_discriminator_optimality(*inst.def, *inst.env, 1e-10).passed);
  }
  SUBCASE("assembled witness class has a uniform maximizer") {
    const auto inst = make_witness(canonical_witness_spec());
    CHECK(check_global_discriminator_optimality(*inst.def, *inst.env, 1e-10).passed);
  }
  const auto spec = canonical_witness_spec();
  auto cls = share({make_model_hypothesis(0, spec.truth), make_model_hypothesis(1, spec.alternatives[2])},
                   Metric::kParameterSup);
  Matrix v = Matrix::Zero(6, 3);
  v.row(0) << 0.0, 1.0, 0.0;
  v.row(1) << 0.0, 0.0, 0.5;
  SUBCASE("a symmetric pair passes") {
    const WitnessDef def(cls, DiscriminatorClass::listed(3, 2, {v, -v}), 0);
    CHECK(check_global_discriminator_optimality(def, spec.truth, 1e-10).passed);
  }
  SUBCASE("two elements each optimal on a different cell fail") {
    Matrix w = Matrix::Zero(6, 3);
    w.row(0) << 0.0, 0.0, 0.5;
    w.row(1) << 0.0, 1.0, 0.0;
    // Model 1 differs from the truth on both (0, 0) and (0, 1).
    const WitnessDef def(cls, DiscriminatorClass::listed(3, 2, {v, w}), 0);
    CHECK_FALSE(check_global_discriminator_optimality(def, spec.truth, 1e-10).passed);
  }
}

namespace {

class ConstantDef final : public EstimationFunction {
 public:
  explicit ConstantDef(std::shared_ptr<const HypothesisClass> F)
      : EstimationFunction(F, F, DiscriminatorClass::trivial(F->num_states(), F->num_actions())) {}
  std::string name() const override { return "constant"; }
  Vector eval(int, int, const Transition<int>&, int, int, std::int64_t) const override {
    return Vector::Constant(1, 0.25);
  }
  double squared_norm(int, int, const Transition<int>&, int, int, std::int64_t) const override {
    return 0.0625;
  }
  int completion(int, int f) const override { return f; }
  double bound() const override { return 0.25; }
  double lipschitz() const override { return 0.0; }
};

}  // namespace

TEST_CASE("Lipschitz estimates") {
  Rng rng(29);
  const auto env = random_mdp(3, 2, 2, rng);
  std::vector<Hypothesis> items;
  for (int i = 0; i < 6; ++i) items.push_back(make_value_hypothesis(i, random_q(3, 2, 2, rng)));
  auto F = share(items);
  SUBCASE("constant loss") {
    const auto est = estimate_lipschitz(ConstantDef(F), env, 500, rng);
    CHECK(est.f == 0.0);
    CHECK(est.g == 0.0);
    CHECK(est.pairs > 0);
  }
  SUBCASE("Bellman slot g has coefficient one") {
    auto G = std::make_shared<HypothesisClass>(close_under_backup(*F, env));
    const BellmanDef def(F, G, env, 1e-12);
    const auto est = estimate_lipschitz(def, env, 2000, rng);
    CHECK(est.g <= 1.0 + 1e-12);
    CHECK(est.g > 0.0);
    CHECK(est.f <= 1.0 + 1e-12);
  }
  SUBCASE("linear mixture slot g is below the regressor bound") {
    const auto inst = make_linear_mixture(canonical_linear_mixture_spec());
    const auto est = estimate_lipschitz(*inst.def, *inst.env, 2000, rng);
    CHECK(est.g <= inst.def->lipschitz() + 1e-12);
    CHECK(est.g > 0.0);
  }
}
