#include "opera/estimation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "opera/errors.hpp"

namespace opera {

EstimationFunction::EstimationFunction(std::shared_ptr<const HypothesisClass> hypotheses,
                                       std::shared_ptr<const HypothesisClass> candidates,
                                       DiscriminatorClass discriminators)
    : hypotheses_(std::move(hypotheses)),
      candidates_(std::move(candidates)),
      discriminators_(std::move(discriminators)) {
  if (!hypotheses_ || hypotheses_->empty()) throw InputError("DEF needs a nonempty class F");
  if (!candidates_ || candidates_->size() < hypotheses_->size()) {
    throw InputError("DEF needs G to contain F");
  }
}

Vector expected_def(const EstimationFunction& def, const TabularMdp& env, int h, int behavior,
                    int s, int a, int f, int g, std::int64_t v) {
  const auto row = env.next_distribution(h, s, a);
  Vector mean = Vector::Zero(def.dim());
  for (int sp = 0; sp < env.num_states(); ++sp) {
    if (row(sp) == 0.0) continue;
    mean += row(sp) * def.eval(h, behavior, {s, a, env.reward(h, s, a), sp}, f, g, v);
  }
  return mean;
}

// ---------------------------------------------------------------- Bellman

namespace {

Matrix backup(const TabularMdp& env, int h, const Vector& next_values) {
  const int S = env.num_states();
  const int A = env.num_actions();
  const Vector pv = env.transition_matrix(h) * next_values;
  Matrix out(S, A);
  for (int s = 0; s < S; ++s) {
    for (int a = 0; a < A; ++a) out(s, a) = env.reward(h, s, a) + pv(s * A + a);
  }
  return out;
}

}  // namespace

BellmanDef::BellmanDef(std::shared_ptr<const HypothesisClass> hypotheses,
                       std::shared_ptr<const HypothesisClass> candidates, const TabularMdp& env,
                       double tol)
    : EstimationFunction(std::move(hypotheses), std::move(candidates),
                         DiscriminatorClass::trivial(env.num_states(), env.num_actions())) {
  const int H = env.horizon();
  const auto& F = *hypotheses_;
  const auto& G = *candidates_;
  completion_.assign(H, std::vector<int>(F.size(), 0));
  for (int h = 0; h < H; ++h) {
    for (int f = 0; f < F.size(); ++f) {
      const Matrix target = backup(env, h, F[f].v[h + 1]);
      double best = std::numeric_limits<double>::infinity();
      int arg = 0;
      for (int g = 0; g < G.size(); ++g) {
        const double gap = (G[g].q[h] - target).cwiseAbs().maxCoeff();
        if (gap < best) {
          best = gap;
          arg = g;
        }
      }
      if (best > tol) {
        std::ostringstream msg;
        msg << "G is not closed under the Bellman backup: hypothesis " << f << " at step " << h
            << " is " << best << " away from every candidate";
        throw CompletenessViolation(msg.str());
      }
      completion_[h][f] = arg;
      completion_gap_ = std::max(completion_gap_, best);
    }
  }
}

double BellmanDef::value(int h, const Transition<int>& o, int f, int g) const {
  return (*candidates_)[g].q[h](o.state, o.action) - o.reward - (*hypotheses_)[f].v[h + 1](o.next);
}

Vector BellmanDef::eval(int h, int, const Transition<int>& o, int f, int g, std::int64_t) const {
  return Vector::Constant(1, value(h, o, f, g));
}

double BellmanDef::squared_norm(int h, int, const Transition<int>& o, int f, int g,
                                std::int64_t) const {
  const double x = value(h, o, f, g);
  return x * x;
}

HypothesisClass close_under_backup(const HypothesisClass& hypotheses, const TabularMdp& env) {
  std::vector<Hypothesis> items = hypotheses.items();
  for (const auto& f : hypotheses.items()) {
    std::vector<Matrix> q;
    for (int h = 0; h < env.horizon(); ++h) q.push_back(backup(env, h, f.v[h + 1]));
    const bool present = std::any_of(items.begin(), items.end(), [&](const Hypothesis& g) {
      for (int h = 0; h < env.horizon(); ++h) {
        if ((g.q[h] - q[h]).cwiseAbs().maxCoeff() > 1e-12) return false;
      }
      return true;
    });
    if (!present) items.push_back(make_value_hypothesis(0, std::move(q)));
  }
  return HypothesisClass(std::move(items), Metric::kValueSup);
}

// ---------------------------------------------------------- linear mixture

Vector MixtureFeatures::regressor(int s, int a, const Vector& next_values) const {
  Vector x = psi_at(s, a);
  for (int sp = 0; sp < num_states; ++sp) x += phi_at(s, a, sp) * next_values(sp);
  return x;
}

LinearMixtureDef::LinearMixtureDef(std::shared_ptr<const HypothesisClass> hypotheses,
                                   MixtureFeatures features, int optimal_index)
    : EstimationFunction(hypotheses, hypotheses,
                         DiscriminatorClass::trivial(features.num_states, features.num_actions)),
      features_(std::move(features)),
      optimal_(optimal_index) {
  const auto& F = *hypotheses_;
  if (optimal_ < 0 || optimal_ >= F.size()) throw InputError("optimal index out of range");
  const int H = F.horizon();
  const int cells = features_.num_states * features_.num_actions;
  if (static_cast<int>(features_.psi.size()) != cells ||
      static_cast<int>(features_.phi.size()) != cells * features_.num_states) {
    throw InputError("mixture features have the wrong number of entries");
  }
  for (const auto& f : F.items()) {
    const auto* params = f.mixture();
    if (!params || static_cast<int>(params->theta.size()) != H) {
      throw InputError("linear mixture DEF needs theta payloads for every step");
    }
    for (const auto& t : params->theta) {
      if (t.size() != features_.dim) throw InputError("theta and feature dimensions differ");
    }
  }
  regressors_.assign(H, std::vector<std::vector<Vector>>(F.size()));
  double max_inner = 0.0;
  for (int h = 0; h < H; ++h) {
    for (int b = 0; b < F.size(); ++b) {
      auto& row = regressors_[h][b];
      row.reserve(cells);
      for (int s = 0; s < features_.num_states; ++s) {
        for (int a = 0; a < features_.num_actions; ++a) {
          row.push_back(features_.regressor(s, a, F[b].v[h + 1]));
          lipschitz_ = std::max(lipschitz_, row.back().lpNorm<1>());
          for (int g = 0; g < F.size(); ++g) {
            max_inner = std::max(max_inner, std::abs(theta(h, g).dot(row.back())));
          }
        }
      }
    }
  }
  bound_ = max_inner + 2.0;
}

const Vector& LinearMixtureDef::theta(int h, int g) const {
  return (*candidates_)[g].mixture()->theta[h];
}

double LinearMixtureDef::value(int h, int behavior, const Transition<int>& o, int g) const {
  return theta(h, g).dot(regressor(h, behavior, o.state, o.action)) - o.reward -
         (*hypotheses_)[behavior].v[h + 1](o.next);
}

Vector LinearMixtureDef::eval(int h, int behavior, const Transition<int>& o, int, int g,
                              std::int64_t) const {
  return Vector::Constant(1, value(h, behavior, o, g));
}

double LinearMixtureDef::squared_norm(int h, int behavior, const Transition<int>& o, int, int g,
                                      std::int64_t) const {
  const double x = value(h, behavior, o, g);
  return x * x;
}

// ----------------------------------------------------------------- witness

WitnessDef::WitnessDef(std::shared_ptr<const HypothesisClass> models,
                       DiscriminatorClass discriminators, int optimal_index)
    : EstimationFunction(models, models, std::move(discriminators)), optimal_(optimal_index) {
  const auto& F = *hypotheses_;
  if (optimal_ < 0 || optimal_ >= F.size()) throw InputError("optimal index out of range");
  for (const auto& f : F.items()) {
    if (!f.model()) throw InputError("witness DEF needs tabular model payloads");
    if (f.model()->num_states() != discriminators_.num_states() ||
        f.model()->num_actions() != discriminators_.num_actions()) {
      throw InputError("discriminators and models disagree on the state/action spaces");
    }
  }
}

double WitnessDef::value(int h, const Transition<int>& o, int g, std::int64_t v) const {
  const TabularMdp& model = *(*candidates_)[g].model();
  const auto row = model.next_distribution(h, o.state, o.action);
  double predicted = 0.0;
  for (int x = 0; x < model.num_states(); ++x) {
    if (row(x) != 0.0) predicted += row(x) * discriminators_.value(v, o.state, o.action, x);
  }
  return predicted - discriminators_.value(v, o.state, o.action, o.next);
}

Vector WitnessDef::eval(int h, int, const Transition<int>& o, int, int g, std::int64_t v) const {
  return Vector::Constant(1, value(h, o, g, v));
}

double WitnessDef::squared_norm(int h, int, const Transition<int>& o, int, int g,
                                std::int64_t v) const {
  const double x = value(h, o, g, v);
  return x * x;
}

double WitnessDef::lipschitz() const {
  return discriminators_.num_states() * discriminators_.bound();
}

// ---------------------------------------------------------------- checkers

namespace {

// (f, g) pairs to probe: all of them when few, otherwise a seeded sample.
std::vector<std::pair<int, int>> probe_pairs(int nf, int ng, int max_pairs, Rng& rng) {
  std::vector<std::pair<int, int>> pairs;
  if (static_cast<long long>(nf) * ng <= max_pairs) {
    for (int f = 0; f < nf; ++f) {
      for (int g = 0; g < ng; ++g) pairs.emplace_back(f, g);
    }
  } else {
    for (int i = 0; i < max_pairs; ++i) {
      pairs.emplace_back(static_cast<int>(rng.below(nf)), static_cast<int>(rng.below(ng)));
    }
  }
  return pairs;
}

std::vector<std::int64_t> probe_discriminators(const EstimationFunction& def, int cell,
                                               int max_units, Rng& rng) {
  const auto& V = def.discriminators();
  if (!def.uses_discriminator()) return {0};
  std::vector<std::int64_t> out;
  if (V.num_units() <= max_units) {
    for (int u = 0; u < V.num_units(); ++u) out.push_back(V.element_with(cell, u));
  } else {
    for (int i = 0; i < max_units; ++i) {
      out.push_back(V.element_with(cell, static_cast<int>(rng.below(V.num_units()))));
    }
  }
  return out;
}

}  // namespace

CheckReport check_decomposability(const EstimationFunction& def, const TabularMdp& env,
                                  double tol, const ProbeOptions& probes) {
  CheckReport report;
  report.name = "decomposability/" + def.name();
  Rng rng(probes.seed);
  const int H = env.horizon();
  const int S = env.num_states();
  const int A = env.num_actions();
  const auto& V = def.discriminators();
  for (int h = 0; h < H; ++h) {
    for (const auto& [f, g] : probe_pairs(def.num_hypotheses(), def.num_candidates(),
                                          probes.max_pairs, rng)) {
      const int behavior =
          def.uses_behavior() ? static_cast<int>(rng.below(def.num_hypotheses())) : 0;
      const int tf = def.completion(h, f);
      for (int s = 0; s < S; ++s) {
        for (int a = 0; a < A; ++a) {
          for (const auto v : probe_discriminators(def, V.cell_of(s, a), probes.max_units, rng)) {
            const Vector mean = expected_def(def, env, h, behavior, s, a, f, g, v);
            for (int sp = 0; sp < S; ++sp) {
              const Transition<int> o{s, a, env.reward(h, s, a), sp};
              const Vector residual =
                  def.eval(h, behavior, o, f, g, v) - mean - def.eval(h, behavior, o, f, tf, v);
              report.max_violation = std::max(report.max_violation, residual.cwiseAbs().maxCoeff());
              ++report.probes;
            }
          }
        }
      }
    }
  }
  report.passed = report.max_violation <= tol;
  std::ostringstream msg;
  msg << "max residual " << report.max_violation << " over " << report.probes << " probes";
  report.detail = msg.str();
  return report;
}

CheckReport check_global_discriminator_optimality(const EstimationFunction& def,
                                                  const TabularMdp& env, double tol,
                                                  const ProbeOptions&) {
  CheckReport report;
  report.name = "discriminator_optimality/" + def.name();
  if (!def.uses_discriminator()) {
    report.detail = "loss does not depend on the discriminator; any element is optimal";
    return report;
  }
  const auto& V = def.discriminators();
  const int H = env.horizon();
  const int S = env.num_states();
  const int A = env.num_actions();
  const int cells = S * A;
  for (int h = 0; h < H; ++h) {
    for (int f = 0; f < def.num_hypotheses(); ++f) {
      // Per (s, a): the best attainable |E l| and, for listed classes, each
      // element's value so a uniform maximizer can be searched for.
      std::vector<double> cell_max(cells, 0.0);
      std::vector<int> cell_arg(cells, 0);
      if (V.is_assembled()) {
        for (int s = 0; s < S; ++s) {
          for (int a = 0; a < A; ++a) {
            const int c = s * A + a;
            for (int u = 0; u < V.num_units(); ++u) {
              const double val =
                  expected_def(def, env, h, 0, s, a, f, f, V.element_with(c, u)).norm();
              if (val > cell_max[c] + 1e-15) {
                cell_max[c] = val;
                cell_arg[c] = u;
              }
              ++report.probes;
            }
          }
        }
        const auto k = V.element_from_choices(cell_arg);
        for (int s = 0; s < S; ++s) {
          for (int a = 0; a < A; ++a) {
            const double gap =
                cell_max[s * A + a] - expected_def(def, env, h, 0, s, a, f, f, k).norm();
            report.max_violation = std::max(report.max_violation, gap);
          }
        }
      } else {
        const int n = V.num_units();
        std::vector<std::vector<double>> values(n, std::vector<double>(cells, 0.0));
        for (int k = 0; k < n; ++k) {
          for (int s = 0; s < S; ++s) {
            for (int a = 0; a < A; ++a) {
              values[k][s * A + a] = expected_def(def, env, h, 0, s, a, f, f, k).norm();
              cell_max[s * A + a] = std::max(cell_max[s * A + a], values[k][s * A + a]);
              ++report.probes;
            }
          }
        }
        double best_gap = std::numeric_limits<double>::infinity();
        for (int k = 0; k < n; ++k) {
          double gap = 0.0;
          for (int c = 0; c < cells; ++c) gap = std::max(gap, cell_max[c] - values[k][c]);
          best_gap = std::min(best_gap, gap);
        }
        if (best_gap > tol && report.max_violation <= tol) {
          std::ostringstream msg;
          msg << "no single discriminator is optimal for hypothesis " << f << " at step " << h;
          report.detail = msg.str();
        }
        report.max_violation = std::max(report.max_violation, best_gap);
      }
    }
  }
  report.passed = report.max_violation <= tol;
  if (report.detail.empty()) {
    std::ostringstream msg;
    msg << "max optimality gap " << report.max_violation;
    report.detail = msg.str();
  }
  return report;
}

LipschitzEstimate estimate_lipschitz(const EstimationFunction& def, const TabularMdp& env,
                                     int samples, Rng& rng) {
  LipschitzEstimate out;
  const auto& F = def.hypotheses();
  const auto& G = def.candidates();
  const auto& V = def.discriminators();
  const int H = env.horizon();
  auto ratio = [](const Vector& x, const Vector& y, double dist) {
    return (x - y).cwiseAbs().maxCoeff() / dist;
  };
  for (int i = 0; i < samples; ++i) {
    const int h = static_cast<int>(rng.below(H));
    const int s = static_cast<int>(rng.below(env.num_states()));
    const int a = static_cast<int>(rng.below(env.num_actions()));
    const int sp = static_cast<int>(rng.below(env.num_states()));
    const Transition<int> o{s, a, env.reward(h, s, a), sp};
    const int b = static_cast<int>(rng.below(F.size()));
    const int f = static_cast<int>(rng.below(F.size()));
    const int g = static_cast<int>(rng.below(G.size()));
    const std::int64_t v =
        V.element_with(V.cell_of(s, a), static_cast<int>(rng.below(V.num_units())));
    const Vector base = def.eval(h, b, o, f, g, v);

    const int f2 = static_cast<int>(rng.below(F.size()));
    if (const double d = F.distance(f, f2); d > 0.0) {
      out.f = std::max(out.f, ratio(base, def.eval(h, b, o, f2, g, v), d));
      ++out.pairs;
    }
    const int g2 = static_cast<int>(rng.below(G.size()));
    if (const double d = G.distance(g, g2); d > 0.0) {
      out.g = std::max(out.g, ratio(base, def.eval(h, b, o, f, g2, v), d));
      ++out.pairs;
    }
    const int b2 = static_cast<int>(rng.below(F.size()));
    if (const double d = F.distance(b, b2); d > 0.0) {
      out.behavior = std::max(out.behavior, ratio(base, def.eval(h, b2, o, f, g, v), d));
      ++out.pairs;
    }
    const std::int64_t v2 =
        V.element_with(V.cell_of(s, a), static_cast<int>(rng.below(V.num_units())));
    if (const double d = V.distance(v, v2); d > 0.0) {
      out.v = std::max(out.v, ratio(base, def.eval(h, b, o, f, g, v2), d));
      ++out.pairs;
    }
  }
  return out;
}

}  // namespace opera
