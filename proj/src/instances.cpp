#include "opera/instances.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "opera/errors.hpp"

namespace opera {

namespace {

Vector vec2(double a, double b) {
  Vector v(2);
  v << a, b;
  return v;
}

Vector random_distribution(int n, Rng& rng) {
  Vector p(n);
  for (int i = 0; i < n; ++i) p(i) = -std::log(1.0 - rng.uniform());
  return p / p.sum();
}

// All points of the simplex {theta >= 0, sum theta = 1} with coordinates in
// multiples of 1/resolution.
void simplex_grid(int dim, int resolution, int remaining, Vector& current, int index,
                  std::vector<Vector>& out) {
  if (index == dim - 1) {
    current(index) = static_cast<double>(remaining) / resolution;
    out.push_back(current);
    return;
  }
  for (int k = 0; k <= remaining; ++k) {
    current(index) = static_cast<double>(k) / resolution;
    simplex_grid(dim, resolution, remaining - k, current, index + 1, out);
  }
}

void require(const CheckReport& report) {
  if (!report.passed) {
    throw ConstructionError("instance check " + report.name + " failed: " + report.detail);
  }
}

}  // namespace

TabularMdp mixture_model(const MixtureFeatures& features, const std::vector<Vector>& theta,
                         int initial_state) {
  const int H = static_cast<int>(theta.size());
  const int S = features.num_states;
  const int A = features.num_actions;
  std::vector<Matrix> transitions(H, Matrix::Zero(S * A, S));
  std::vector<Matrix> rewards(H, Matrix::Zero(S, A));
  for (int h = 0; h < H; ++h) {
    if (theta[h].size() != features.dim) throw InputError("mixture_model: theta has the wrong size");
    for (int s = 0; s < S; ++s) {
      for (int a = 0; a < A; ++a) {
        for (int x = 0; x < S; ++x) {
          double p = theta[h].dot(features.phi_at(s, a, x));
          if (p < -1e-12) throw InputError("mixture_model: negative transition probability");
          transitions[h](s * A + a, x) = std::max(p, 0.0);
        }
        const double r = theta[h].dot(features.psi_at(s, a));
        if (r < -1e-12) throw InputError("mixture_model: negative reward");
        rewards[h](s, a) = std::max(r, 0.0);
      }
    }
  }
  return TabularMdp(H, S, A, std::move(transitions), std::move(rewards), initial_state);
}

LinearMixtureSpec canonical_linear_mixture_spec() {
  // States: 0 start, 1 good, 2 bad. The features do not depend on s.
  LinearMixtureSpec spec;
  spec.horizon = 3;
  spec.initial_state = 0;
  auto& ft = spec.features;
  ft.dim = 2;
  ft.num_states = 3;
  ft.num_actions = 2;
  ft.phi.assign(3 * 2 * 3, Vector::Zero(2));
  ft.psi.assign(3 * 2, Vector::Zero(2));
  for (int s = 0; s < 3; ++s) {
    // a0: component 1 goes to good, component 2 to bad.
    ft.phi[(s * 2 + 0) * 3 + 1] = vec2(1.0, 0.0);
    ft.phi[(s * 2 + 0) * 3 + 2] = vec2(0.0, 1.0);
    // a1: component 1 goes to bad, component 2 to good w.p. 0.8.
    ft.phi[(s * 2 + 1) * 3 + 1] = vec2(0.0, 0.8);
    ft.phi[(s * 2 + 1) * 3 + 2] = vec2(1.0, 0.2);
  }
  ft.psi[1 * 2 + 0] = vec2(1.0 / 3.0, 1.0 / 3.0);
  ft.psi[1 * 2 + 1] = vec2(1.0 / 3.0, 1.0 / 3.0);
  const std::vector<Vector> grid = {vec2(0.0, 1.0), vec2(1.0 / 3.0, 2.0 / 3.0),
                                    vec2(2.0 / 3.0, 1.0 / 3.0), vec2(1.0, 0.0)};
  spec.theta_star.assign(3, grid[1]);
  spec.theta_grid.assign(3, grid);
  return spec;
}

LinearMixtureSpec random_linear_mixture_spec(int dim, int horizon, int num_states, int num_actions,
                                             int resolution, Rng& rng) {
  if (dim < 1 || horizon < 1 || num_states < 1 || num_actions < 1 || resolution < 1) {
    throw InputError("random_linear_mixture_spec: sizes must be positive");
  }
  LinearMixtureSpec spec;
  spec.horizon = horizon;
  spec.initial_state = 0;
  auto& ft = spec.features;
  ft.dim = dim;
  ft.num_states = num_states;
  ft.num_actions = num_actions;
  ft.phi.assign(num_states * num_actions * num_states, Vector::Zero(dim));
  ft.psi.assign(num_states * num_actions, Vector::Zero(dim));
  for (int s = 0; s < num_states; ++s) {
    for (int a = 0; a < num_actions; ++a) {
      for (int k = 0; k < dim; ++k) {
        const Vector p = random_distribution(num_states, rng);
        for (int x = 0; x < num_states; ++x) ft.phi[(s * num_actions + a) * num_states + x](k) = p(x);
        ft.psi[s * num_actions + a](k) = rng.uniform() / horizon;
      }
    }
  }
  std::vector<Vector> grid;
  Vector current(dim);
  simplex_grid(dim, resolution, resolution, current, 0, grid);
  for (int h = 0; h < horizon; ++h) {
    spec.theta_grid.push_back(grid);
    spec.theta_star.push_back(grid[rng.below(grid.size())]);
  }
  return spec;
}

TabularInstance make_linear_mixture(const LinearMixtureSpec& spec) {
  const int H = spec.horizon;
  if (static_cast<int>(spec.theta_star.size()) != H || static_cast<int>(spec.theta_grid.size()) != H) {
    throw InputError("make_linear_mixture: need theta* and a grid for every step");
  }
  std::shared_ptr<const TabularMdp> env;
  try {
    env = std::make_shared<TabularMdp>(mixture_model(spec.features, spec.theta_star, spec.initial_state));
  } catch (const InputError& e) {
    throw ConstructionError(std::string("make_linear_mixture: theta* is invalid: ") + e.what());
  }

  // A grid point is kept when a one-step kernel built from it is valid.
  std::vector<std::vector<Vector>> grid(H);
  for (int h = 0; h < H; ++h) {
    for (const auto& t : spec.theta_grid[h]) {
      try {
        mixture_model(spec.features, {t}, spec.initial_state);
        grid[h].push_back(t);
      } catch (const InputError&) {
      }
    }
    if (grid[h].empty()) {
      throw ConstructionError("make_linear_mixture: no valid grid point at step " + std::to_string(h));
    }
  }

  std::vector<Hypothesis> items;
  int optimal = -1;
  std::vector<int> digits(H, 0);
  while (true) {
    std::vector<Vector> theta(H);
    bool star = true;
    for (int h = 0; h < H; ++h) {
      theta[h] = grid[h][digits[h]];
      if ((theta[h] - spec.theta_star[h]).cwiseAbs().maxCoeff() > 1e-12) star = false;
    }
    try {
      const TabularMdp model = mixture_model(spec.features, theta, spec.initial_state);
      if (star) optimal = static_cast<int>(items.size());
      auto solution = optimal_values(model);
      items.push_back(make_value_hypothesis(static_cast<int>(items.size()), std::move(solution.values.q),
                                            LinearMixtureParams{theta}));
    } catch (const InputError&) {
      // Per-step kernels can be valid while the total return exceeds one.
    }
    int h = 0;
    while (h < H && ++digits[h] == static_cast<int>(grid[h].size())) digits[h++] = 0;
    if (h == H) break;
  }
  if (optimal < 0) throw ConstructionError("make_linear_mixture: theta* is not in the grid");

  auto cls = std::make_shared<HypothesisClass>(std::move(items), Metric::kParameterSup);
  cls->set_optimal_index(optimal);
  TabularInstance inst;
  inst.family = "linear_mixture";
  inst.env = env;
  inst.hypotheses = cls;
  inst.mixture = std::make_shared<LinearMixtureDef>(cls, spec.features, optimal);
  inst.def = inst.mixture;
  inst.coupling = make_linear_mixture_coupling(inst.mixture, *env);
  inst.optimal_index = optimal;
  inst.kappa = inst.coupling.kappa;
  inst.construction_checks = verify_instance(inst);
  inst.tightest_kappa = tightest_kappa(inst.coupling, *cls, *env);
  return inst;
}

TabularInstance make_bellman_instance(const LinearMixtureSpec& spec) {
  const TabularInstance base = make_linear_mixture(spec);
  // Value copies of the mixture hypotheses.
  std::vector<Hypothesis> items;
  for (const auto& f : base.hypotheses->items()) items.push_back(make_value_hypothesis(f.id, f.q));
  auto cls = std::make_shared<HypothesisClass>(std::move(items), Metric::kValueSup);
  cls->set_optimal_index(base.optimal_index);
  auto candidates = std::make_shared<HypothesisClass>(close_under_backup(*cls, *base.env));
  TabularInstance inst;
  inst.family = "bellman";
  inst.env = base.env;
  inst.hypotheses = cls;
  inst.def = std::make_shared<BellmanDef>(cls, candidates, *base.env, 1e-9);
  inst.coupling = make_bellman_coupling(cls, *base.env);
  inst.optimal_index = base.optimal_index;
  inst.kappa = inst.coupling.kappa;
  inst.construction_checks = verify_instance(inst);
  inst.tightest_kappa = tightest_kappa(inst.coupling, *cls, *base.env);
  return inst;
}

WitnessSpec canonical_witness_spec() {
  // From state 0, action 0 reaches state 1 w.p. p0 and action 1 w.p. p1;
  // state 1 pays 1 and state 2 pays 0.3 at the last step.
  auto model = [](double p0, double p1) {
    std::vector<Matrix> P(2, Matrix::Zero(6, 3));
    P[0].row(0) << 0.0, p0, 1.0 - p0;
    P[0].row(1) << 0.0, p1, 1.0 - p1;
    for (int s = 1; s < 3; ++s) {
      for (int a = 0; a < 2; ++a) P[0](s * 2 + a, s) = 1.0;
    }
    for (int s = 0; s < 3; ++s) {
      for (int a = 0; a < 2; ++a) P[1](s * 2 + a, s) = 1.0;
    }
    std::vector<Matrix> r(2, Matrix::Zero(3, 2));
    r[1].row(1).setConstant(1.0);
    r[1].row(2).setConstant(0.3);
    return TabularMdp(2, 3, 2, std::move(P), std::move(r), 0);
  };
  WitnessSpec spec{model(0.2, 0.6), {}, 1.0, 1.0};
  for (const double p0 : {0.2, 0.5, 0.8, 0.9}) {
    for (const double p1 : {0.6, 0.3}) {
      if (p0 == 0.2 && p1 == 0.6) continue;
      spec.alternatives.push_back(model(p0, p1));
    }
  }
  return spec;
}

WitnessSpec random_witness_spec(int num_states, int num_actions, int horizon, int class_size,
                                Rng& rng) {
  if (num_states < 1 || num_actions < 1 || horizon < 1 || class_size < 1) {
    throw InputError("random_witness_spec: sizes must be positive");
  }
  const int S = num_states;
  const int A = num_actions;
  std::vector<Matrix> P(horizon, Matrix::Zero(S * A, S));
  std::vector<Matrix> r(horizon, Matrix::Zero(S, A));
  for (int h = 0; h < horizon; ++h) {
    for (int c = 0; c < S * A; ++c) P[h].row(c) = random_distribution(S, rng).transpose();
    for (int s = 0; s < S; ++s)
      for (int a = 0; a < A; ++a) r[h](s, a) = rng.uniform() / horizon;
  }
  WitnessSpec spec{TabularMdp(horizon, S, A, P, r, 0), {}, 1.0, 1.0};
  for (int k = 1; k < class_size; ++k) {
    std::vector<Matrix> Q = P;
    for (int h = 0; h < horizon; ++h) {
      const int c = static_cast<int>(rng.below(S * A));
      Q[h].row(c) = 0.5 * Q[h].row(c) + 0.5 * random_distribution(S, rng).transpose();
    }
    spec.alternatives.emplace_back(horizon, S, A, std::move(Q), r, 0);
  }
  return spec;
}

TabularInstance make_witness(const WitnessSpec& spec) {
  std::vector<Hypothesis> items;
  items.push_back(make_model_hypothesis(0, spec.truth));
  for (const auto& m : spec.alternatives) {
    if (m.horizon() != spec.truth.horizon() || m.num_states() != spec.truth.num_states() ||
        m.num_actions() != spec.truth.num_actions() || m.initial_state() != spec.truth.initial_state()) {
      throw InputError("make_witness: models disagree on the horizon or spaces");
    }
    items.push_back(make_model_hypothesis(static_cast<int>(items.size()), m));
  }
  auto cls = std::make_shared<HypothesisClass>(std::move(items), Metric::kParameterSup);
  cls->set_optimal_index(0);
  auto env = std::make_shared<TabularMdp>(spec.truth);
  const int S = env->num_states();
  const int A = env->num_actions();
  TabularInstance inst;
  inst.family = "witness";
  inst.env = env;
  inst.hypotheses = cls;
  inst.def = std::make_shared<WitnessDef>(
      cls, DiscriminatorClass::indicator_family(S, A, spec.discriminator_bound), 0);
  inst.coupling = make_witness_coupling(cls, *env, spec.discriminator_bound, spec.kappa);
  inst.optimal_index = 0;
  inst.kappa = spec.kappa;
  inst.construction_checks = verify_instance(inst);
  inst.tightest_kappa = tightest_kappa(inst.coupling, *cls, *env);
  return inst;
}

std::vector<CheckReport> verify_instance(const TabularInstance& instance, double kappa_scale) {
  const TabularMdp& env = *instance.env;
  std::vector<CheckReport> reports;
  reports.push_back(check_decomposability(*instance.def, env, 1e-10));
  reports.push_back(check_global_discriminator_optimality(*instance.def, env, 1e-10));
  reports.push_back(check_dominating_average(*instance.def, instance.coupling, env, 1e-8));
  CouplingFunction scaled = instance.coupling;
  scaled.kappa *= kappa_scale;
  reports.push_back(check_bellman_dominance(scaled, *instance.hypotheses, env, 1e-8));
  if (instance.coupling.bilinear()) {
    reports.push_back(check_bilinear_factorization(instance.coupling, env.horizon(),
                                                   instance.hypotheses->size(), 1e-10));
  }
  reports.push_back(check_policy_loss_decomposition(*instance.hypotheses, env, 1e-10));
  if (kappa_scale == 1.0) {
    for (const auto& r : reports) require(r);
  }
  return reports;
}

OperaProblem<int> make_problem(const TabularInstance& instance) {
  const auto env = instance.env;
  const auto cls = instance.hypotheses;
  OperaProblem<int> p;
  p.horizon = env->horizon();
  p.num_actions = env->num_actions();
  p.num_hypotheses = cls->size();
  p.initial_state = env->initial_state();
  p.step = [env](int h, const int& s, int a, Rng& rng) { return env->step(h, s, a, rng); };
  p.act = [cls](int f, int h, const int& s) { return (*cls)[f].action(h, s); };
  for (const auto& f : cls->items()) {
    p.optimistic_values.push_back(f.initial_value(env->initial_state()));
    const auto values = exact_value(*env, greedy_policy(f, env->num_actions()));
    p.policy_values.push_back(values.v[0](env->initial_state()));
  }
  p.optimal_value = optimal_values(*env).values.v[0](env->initial_state());
  p.optimal_index = instance.optimal_index;
  return p;
}

std::unique_ptr<ConfidenceSet<int>> make_confidence(const TabularInstance& instance,
                                                    bool closed_form) {
  if (closed_form) {
    if (!instance.mixture) {
      throw UnsupportedInstance("closed-form confidence sets exist only for linear mixture instances");
    }
    return std::make_unique<LinearMixtureConfidence>(instance.mixture);
  }
  return std::make_unique<EnumeratedConfidence>(instance.def);
}

double default_beta(const TabularInstance& instance, int episodes, double delta, double c) {
  const double log_f = instance.hypotheses->log_cardinality();
  const double log_g = std::log(static_cast<double>(instance.def->candidates().size()));
  const double log_v = instance.def->discriminators().log_size();
  return beta_default(episodes, instance.env->horizon(), log_loss_cover(log_f, log_g, log_v), delta,
                      c);
}

std::vector<CheckReport> verify_knr(const KnrInstance& instance, const KnrCheckOptions& checks,
                                    double kappa_scale) {
  std::vector<CheckReport> reports;
  const KnrDef def(instance, instance.clip_radius(1000, 0.1));
  reports.push_back(check_knr_decomposability(instance, def, 2000, checks.seed, 1e-10));
  const KnrCoupling coupling(instance, checks.coupling_rollouts, checks.seed + 1);
  reports.push_back(check_knr_dominating_average(instance, coupling, 1e-8));
  reports.push_back(check_knr_bellman_dominance(instance, coupling, checks.bellman_rollouts,
                                                checks.seed + 2, kappa_scale));
  return reports;
}

KnrBundle make_knr(KnrSpec spec, const KnrCheckOptions& checks) {
  KnrBundle bundle;
  bundle.instance = std::make_unique<KnrInstance>(std::move(spec));
  if (checks.run) {
    bundle.construction_checks = verify_knr(*bundle.instance, checks);
    for (const auto& r : bundle.construction_checks) require(r);
  }
  return bundle;
}

}  // namespace opera
