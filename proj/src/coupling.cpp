#include "opera/coupling.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "opera/errors.hpp"

namespace opera {

std::vector<std::vector<Vector>> greedy_roll_ins(const HypothesisClass& cls,
                                                 const TabularMdp& env) {
  std::vector<std::vector<Vector>> out;
  out.reserve(cls.size());
  for (const auto& f : cls.items()) {
    out.push_back(state_distribution(env, greedy_policy(f, env.num_actions())));
  }
  return out;
}

namespace {

// Q_{h,f}(s,a) - r_h(s,a) - E_{s'} V_{h+1,f}(s') for every (s, a).
Matrix bellman_residual(const TabularMdp& env, const Hypothesis& f, int h) {
  const int S = env.num_states();
  const int A = env.num_actions();
  const Vector pv = env.transition_matrix(h) * f.v[h + 1];
  Matrix out(S, A);
  for (int s = 0; s < S; ++s) {
    for (int a = 0; a < A; ++a) out(s, a) = f.q[h](s, a) - env.reward(h, s, a) - pv(s * A + a);
  }
  return out;
}

Vector occupancy(const Vector& states, const Hypothesis& g, int h, int num_actions) {
  const auto S = states.size();
  Vector x = Vector::Zero(S * num_actions);
  for (Eigen::Index s = 0; s < S; ++s) x(s * num_actions + g.action(h, static_cast<int>(s))) = states(s);
  return x;
}

std::string summary(const char* what, double worst, long long probes) {
  std::ostringstream msg;
  msg << what << " " << worst << " over " << probes << " probes";
  return msg.str();
}

}  // namespace

double average_bellman_error(const TabularMdp& env, const Hypothesis& f, int h) {
  const auto d = state_distribution(env, greedy_policy(f, env.num_actions()));
  const Matrix residual = bellman_residual(env, f, h);
  double total = 0.0;
  for (int s = 0; s < env.num_states(); ++s) total += d[h](s) * residual(s, f.action(h, s));
  return total;
}

CouplingFunction make_bellman_coupling(std::shared_ptr<const HypothesisClass> cls,
                                       const TabularMdp& env) {
  const int H = env.horizon();
  const int A = env.num_actions();
  auto roll = std::make_shared<std::vector<std::vector<Vector>>>(greedy_roll_ins(*cls, env));
  auto residuals = std::make_shared<std::vector<std::vector<Vector>>>();
  for (const auto& f : cls->items()) {
    std::vector<Vector> per_step;
    for (int h = 0; h < H; ++h) {
      const Matrix r = bellman_residual(env, f, h);
      // Row-major flattening to match occupancy(): index s*A + a.
      Vector flat(r.size());
      for (Eigen::Index s = 0; s < r.rows(); ++s) {
        for (Eigen::Index a = 0; a < r.cols(); ++a) flat(s * A + a) = r(s, a);
      }
      per_step.push_back(std::move(flat));
    }
    residuals->push_back(std::move(per_step));
  }
  CouplingFunction c;
  c.name = "bellman";
  c.kappa = 1.0;
  c.mode = OperatingMode::kQType;
  c.cap = 2.0;
  c.w = [residuals](int h, int f) { return (*residuals)[f][h]; };
  c.x = [cls, roll, A](int h, int g) { return occupancy((*roll)[g][h], (*cls)[g], h, A); };
  c.value = [w = c.w, x = c.x](int h, int f, int g) { return w(h, f).dot(x(h, g)); };
  return c;
}

CouplingFunction make_linear_mixture_coupling(std::shared_ptr<const LinearMixtureDef> def,
                                              const TabularMdp& env) {
  const auto& F = def->hypotheses();
  const int H = env.horizon();
  const int S = env.num_states();
  const int star = def->completion(0, 0);
  const auto roll = greedy_roll_ins(F, env);
  // X_h(g) = E_{pi_g}[psi + phi_{V_{h+1,g}}], the regressor with g as behavior.
  auto xs = std::make_shared<std::vector<std::vector<Vector>>>(F.size());
  double cap = 0.0;
  for (int g = 0; g < F.size(); ++g) {
    for (int h = 0; h < H; ++h) {
      Vector x = Vector::Zero(def->features().dim);
      for (int s = 0; s < S; ++s) {
        if (roll[g][h](s) != 0.0) x += roll[g][h](s) * def->regressor(h, g, s, F[g].action(h, s));
      }
      (*xs)[g].push_back(std::move(x));
    }
  }
  CouplingFunction c;
  c.name = "linear_mixture";
  c.kappa = 1.0;
  c.mode = OperatingMode::kQType;
  c.w = [def, star](int h, int f) -> Vector { return def->theta(h, f) - def->theta(h, star); };
  c.x = [xs](int h, int g) { return (*xs)[g][h]; };
  c.value = [w = c.w, x = c.x](int h, int f, int g) { return w(h, f).dot(x(h, g)); };
  for (int h = 0; h < H; ++h) {
    for (int f = 0; f < F.size(); ++f) {
      for (int g = 0; g < F.size(); ++g) cap = std::max(cap, std::abs(c.value(h, f, g)));
    }
  }
  c.cap = cap;
  return c;
}

CouplingFunction make_witness_coupling(std::shared_ptr<const HypothesisClass> models,
                                       const TabularMdp& env, double discriminator_bound,
                                       double kappa) {
  const int H = env.horizon();
  const int S = env.num_states();
  auto roll = std::make_shared<std::vector<std::vector<Vector>>>(greedy_roll_ins(*models, env));
  auto ws = std::make_shared<std::vector<std::vector<Vector>>>(models->size());
  for (int f = 0; f < models->size(); ++f) {
    const TabularMdp& m = *(*models)[f].model();
    for (int h = 0; h < H; ++h) {
      Vector w(S);
      for (int s = 0; s < S; ++s) {
        const int a = (*models)[f].action(h, s);
        const double tv =
            0.5 * (m.next_distribution(h, s, a) - env.next_distribution(h, s, a)).cwiseAbs().sum();
        w(s) = discriminator_bound * tv;
      }
      (*ws)[f].push_back(std::move(w));
    }
  }
  CouplingFunction c;
  c.name = "witness";
  c.kappa = kappa;
  c.mode = OperatingMode::kVType;
  c.cap = discriminator_bound;
  c.w = [ws](int h, int f) { return (*ws)[f][h]; };
  c.x = [roll](int h, int g) { return (*roll)[g][h]; };
  c.value = [w = c.w, x = c.x](int h, int f, int g) { return w(h, f).dot(x(h, g)); };
  return c;
}

CheckReport check_dominating_average(const EstimationFunction& def, const CouplingFunction& coupling,
                                     const TabularMdp& env, double tol) {
  CheckReport report;
  report.name = "dominating_average/" + coupling.name;
  const auto& F = def.hypotheses();
  const auto& V = def.discriminators();
  const int H = env.horizon();
  const int S = env.num_states();
  const auto roll = greedy_roll_ins(F, env);
  for (int h = 0; h < H; ++h) {
    for (int f = 0; f < F.size(); ++f) {
      for (int g = 0; g < F.size(); ++g) {
        const Vector& d = roll[g][h];
        auto op_action = [&](int s) {
          return coupling.mode == OperatingMode::kQType ? F[g].action(h, s) : F[f].action(h, s);
        };
        auto sq = [&](int s, std::int64_t v) {
          return expected_def(def, env, h, g, s, op_action(s), f, f, v).squaredNorm();
        };
        double lhs = 0.0;
        if (!def.uses_discriminator()) {
          for (int s = 0; s < S; ++s) {
            if (d(s) != 0.0) lhs += d(s) * sq(s, 0);
          }
        } else if (V.is_assembled()) {
          for (int s = 0; s < S; ++s) {
            if (d(s) == 0.0) continue;
            const int cell = V.cell_of(s, op_action(s));
            double best = 0.0;
            for (int u = 0; u < V.num_units(); ++u) best = std::max(best, sq(s, V.element_with(cell, u)));
            lhs += d(s) * best;
          }
        } else {
          for (int k = 0; k < V.num_units(); ++k) {
            double total = 0.0;
            for (int s = 0; s < S; ++s) {
              if (d(s) != 0.0) total += d(s) * sq(s, k);
            }
            lhs = std::max(lhs, total);
          }
        }
        const double G = coupling(h, f, g);
        const double violation = G * G - lhs;
        if (violation > report.max_violation) {
          report.max_violation = violation;
          std::ostringstream msg;
          msg << "worst at h=" << h << " f=" << f << " g=" << g << ": lhs " << lhs << " vs G^2 "
              << G * G;
          report.detail = msg.str();
        }
        ++report.probes;
      }
    }
  }
  report.passed = report.max_violation <= tol;
  if (report.detail.empty()) report.detail = summary("max violation", report.max_violation, report.probes);
  return report;
}

CheckReport check_bellman_dominance(const CouplingFunction& coupling, const HypothesisClass& cls,
                                    const TabularMdp& env, double tol) {
  CheckReport report;
  report.name = "bellman_dominance/" + coupling.name;
  for (int h = 0; h < env.horizon(); ++h) {
    for (int f = 0; f < cls.size(); ++f) {
      const double lhs = coupling.kappa * std::abs(average_bellman_error(env, cls[f], h));
      const double violation = lhs - std::abs(coupling(h, f, f));
      if (violation > report.max_violation) {
        report.max_violation = violation;
        std::ostringstream msg;
        msg << "worst at h=" << h << " f=" << f << ": kappa*|ABE| " << lhs << " vs |G(f,f)| "
            << std::abs(coupling(h, f, f));
        report.detail = msg.str();
      }
      ++report.probes;
    }
  }
  report.passed = report.max_violation <= tol;
  if (report.detail.empty()) report.detail = summary("max violation", report.max_violation, report.probes);
  return report;
}

CheckReport check_bilinear_factorization(const CouplingFunction& coupling, int horizon,
                                         int num_hypotheses, double tol) {
  CheckReport report;
  report.name = "bilinear_factorization/" + coupling.name;
  if (!coupling.bilinear()) {
    report.detail = "coupling has no bilinear factors";
    return report;
  }
  for (int h = 0; h < horizon; ++h) {
    for (int f = 0; f < num_hypotheses; ++f) {
      for (int g = 0; g < num_hypotheses; ++g) {
        const double gap = std::abs(coupling.w(h, f).dot(coupling.x(h, g)) - coupling(h, f, g));
        report.max_violation = std::max(report.max_violation, gap);
        ++report.probes;
      }
    }
  }
  report.passed = report.max_violation <= tol;
  report.detail = summary("max gap", report.max_violation, report.probes);
  return report;
}

CheckReport check_policy_loss_decomposition(const HypothesisClass& cls, const TabularMdp& env,
                                            double tol) {
  CheckReport report;
  report.name = "policy_loss_decomposition";
  const int s1 = env.initial_state();
  for (int f = 0; f < cls.size(); ++f) {
    double total = 0.0;
    for (int h = 0; h < env.horizon(); ++h) total += average_bellman_error(env, cls[f], h);
    const double loss =
        cls[f].v[0](s1) - exact_value(env, greedy_policy(cls[f], env.num_actions())).v[0](s1);
    report.max_violation = std::max(report.max_violation, std::abs(total - loss));
    ++report.probes;
  }
  report.passed = report.max_violation <= tol;
  report.detail = summary("max gap", report.max_violation, report.probes);
  return report;
}

double tightest_kappa(const CouplingFunction& coupling, const HypothesisClass& cls,
                      const TabularMdp& env) {
  double kappa = 1.0;
  for (int h = 0; h < env.horizon(); ++h) {
    for (int f = 0; f < cls.size(); ++f) {
      const double abe = std::abs(average_bellman_error(env, cls[f], h));
      if (abe > 1e-14) kappa = std::min(kappa, std::abs(coupling(h, f, f)) / abe);
    }
  }
  return kappa;
}

}  // namespace opera
