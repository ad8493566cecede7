#include <algorithm>
#include <cmath>

#include "doctest.h"
#include "fixtures.hpp"
#include "opera/errors.hpp"
#include "opera/hypothesis.hpp"

using namespace opera;
using namespace opera::testing;

TEST_CASE("greedy policy breaks ties toward action 0") {
  const auto f = make_value_hypothesis(0, {Matrix::Constant(2, 3, 0.4)});
  CHECK(f.action(0, 0) == 0);
  CHECK(f.action(0, 1) == 0);
  Matrix q(1, 2);
  q << 0.1, 0.9;
  CHECK(make_value_hypothesis(0, {q}).action(0, 0) == 1);
}

TEST_CASE("greedy action is invariant to a constant shift") {
  Rng rng(5);
  const auto q = random_q(4, 3, 2, rng);
  auto shifted = q;
  for (auto& m : shifted) m.array() += 0.3;
  const auto f = make_value_hypothesis(0, q);
  const auto g = make_value_hypothesis(1, shifted);
  for (int h = 0; h < 2; ++h)
    for (int s = 0; s < 4; ++s) CHECK(f.action(h, s) == g.action(h, s));
}

TEST_CASE("V equals max over actions of Q") {
  Rng rng(8);
  const auto f = make_value_hypothesis(0, random_q(5, 3, 3, rng));
  for (int h = 0; h < 3; ++h)
    for (int s = 0; s < 5; ++s) CHECK(std::abs(f.v[h](s) - f.q[h].row(s).maxCoeff()) <= 1e-10);
  CHECK(f.v[3].cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("model hypotheses carry the model's optimal Q") {
  Rng rng(2);
  const auto env = random_mdp(3, 2, 2, rng);
  const auto f = make_model_hypothesis(0, env);
  const auto opt = optimal_values(env);
  REQUIRE(f.model() != nullptr);
  for (int h = 0; h < 2; ++h) CHECK((f.q[h] - opt.values.q[h]).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("realizability with the oracle's Q") {
  Rng rng(3);
  const auto env = random_mdp(3, 2, 3, rng);
  const auto opt = optimal_values(env);
  const HypothesisClass cls({make_value_hypothesis(0, random_q(3, 2, 3, rng)),
                             make_value_hypothesis(1, opt.values.q)});
  const auto rep = check_realizability(cls, env, 1e-8);
  CHECK(rep.realizable);
  CHECK(rep.witness == 1);
  CHECK(rep.deviation == 0.0);
}

TEST_CASE("all-zero class is not realizable when V* is one") {
  const auto env = chain(2);
  const HypothesisClass cls({make_value_hypothesis(0, std::vector<Matrix>(2, Matrix::Zero(2, 2)))});
  const auto rep = check_realizability(cls, env, 1e-8);
  CHECK_FALSE(rep.realizable);
  CHECK(rep.deviation == doctest::Approx(1.0));
}

TEST_CASE("perturbed f* is realizable at loose tolerance only") {
  Rng rng(4);
  const auto env = random_mdp(3, 2, 2, rng);
  auto q = optimal_values(env).values.q;
  q[1](2, 1) += 0.02;
  const HypothesisClass cls({make_value_hypothesis(0, q)});
  CHECK(check_realizability(cls, env, 0.05).realizable);
  CHECK_FALSE(check_realizability(cls, env, 0.01).realizable);
}

TEST_CASE("realizability is unsupported for continuous environments") {
  ContinuousMdp c;
  c.initial_state = Vector::Zero(1);
  const HypothesisClass cls({make_value_hypothesis(0, {Matrix::Zero(1, 1)})});
  CHECK_THROWS_AS(check_realizability(cls, EpisodicMdp(c), 1e-8), UnsupportedInstance);
}

namespace {

// Class of scalar hypotheses Q = x on a single (s, a), so distances are |x - y|.
HypothesisClass line(const std::vector<double>& xs) {
  std::vector<Hypothesis> items;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    items.push_back(make_value_hypothesis(static_cast<int>(i), {Matrix::Constant(1, 1, xs[i])}));
  }
  return HypothesisClass(items);
}

// Smallest k such that k balls of radius eps centered at class points cover it.
int exhaustive_cover(const std::vector<double>& xs, double eps) {
  const int n = static_cast<int>(xs.size());
  int best = n;
  for (int mask = 1; mask < (1 << n); ++mask) {
    bool covers = true;
    for (int i = 0; i < n && covers; ++i) {
      bool hit = false;
      for (int j = 0; j < n; ++j)
        if ((mask >> j & 1) && std::abs(xs[i] - xs[j]) <= eps) hit = true;
      covers = hit;
    }
    if (covers) best = std::min(best, __builtin_popcount(mask));
  }
  return best;
}

}  // namespace

TEST_CASE("covering number at zero and beyond the diameter") {
  std::vector<double> xs;
  for (int i = 0; i < 10; ++i) xs.push_back(0.05 * i);
  const auto cls = line(xs);
  CHECK(log_covering_number(cls, 0.0) == doctest::Approx(std::log(10.0)));
  CHECK(log_covering_number(cls, 1.0) == doctest::Approx(0.0));
  CHECK(cls.log_cardinality() == doctest::Approx(std::log(10.0)));
  CHECK_THROWS_AS(log_covering_number(cls, -0.1), InputError);
}

TEST_CASE("greedy cover matches the exhaustive minimum on a line") {
  const std::vector<double> xs = {0, 1, 2, 3, 4};
  const auto cls = line(xs);
  CHECK(std::exp(log_covering_number(cls, 1.5)) == doctest::Approx(exhaustive_cover(xs, 1.5)));
}

TEST_CASE("covering number is nonincreasing in eps") {
  Rng rng(12);
  std::vector<double> xs;
  for (int i = 0; i < 12; ++i) xs.push_back(rng.uniform());
  const auto cls = line(xs);
  double prev = log_covering_number(cls, 0.0);
  for (double eps = 0.01; eps < 1.0; eps += 0.01) {
    const double cur = log_covering_number(cls, eps);
    CHECK(cur <= prev + 1e-12);
    prev = cur;
  }
}

TEST_CASE("class metric is symmetric and zero only on the diagonal") {
  Rng rng(13);
  std::vector<Hypothesis> items;
  for (int i = 0; i < 5; ++i) items.push_back(make_value_hypothesis(i, random_q(3, 2, 2, rng)));
  const HypothesisClass cls(items);
  for (int i = 0; i < 5; ++i) {
    CHECK(cls.distance(i, i) == 0.0);
    for (int j = 0; j < 5; ++j) {
      CHECK(cls.distance(i, j) == cls.distance(j, i));
      if (i != j) CHECK(cls.distance(i, j) > 0.0);
    }
  }
}
