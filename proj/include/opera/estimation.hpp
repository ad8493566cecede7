#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "opera/discriminator.hpp"
#include "opera/hypothesis.hpp"
#include "opera/mdp.hpp"

namespace opera {

// Decomposable estimation function on a tabular space.
//
// Arguments follow the loss l_{h,f'}(o, f_{h+1}, g_h, v): `behavior` is the
// hypothesis f' that collected the observation, `f` indexes F and supplies
// the step-(h+1) part, `g` indexes G and supplies the step-h part, `v`
// indexes the discriminator class. G always starts with the elements of F in
// the same order, so f itself is candidate number f.
class EstimationFunction {
 public:
  EstimationFunction(std::shared_ptr<const HypothesisClass> hypotheses,
                     std::shared_ptr<const HypothesisClass> candidates,
                     DiscriminatorClass discriminators);
  virtual ~EstimationFunction() = default;

  virtual std::string name() const = 0;
  virtual int dim() const { return 1; }
  virtual Vector eval(int h, int behavior, const Transition<int>& o, int f, int g,
                      std::int64_t v) const = 0;
  virtual double squared_norm(int h, int behavior, const Transition<int>& o, int f, int g,
                              std::int64_t v) const {
    return eval(h, behavior, o, f, g, v).squaredNorm();
  }
  // Index in G of T(f)_h.
  virtual int completion(int h, int f) const = 0;
  virtual double bound() const = 0;
  virtual double lipschitz() const = 0;

  virtual bool uses_discriminator() const { return false; }
  virtual bool uses_behavior() const { return false; }
  virtual bool depends_on_next() const { return true; }

  const HypothesisClass& hypotheses() const { return *hypotheses_; }
  const HypothesisClass& candidates() const { return *candidates_; }
  const DiscriminatorClass& discriminators() const { return discriminators_; }
  int num_hypotheses() const { return hypotheses_->size(); }
  int num_candidates() const { return candidates_->size(); }

 protected:
  std::shared_ptr<const HypothesisClass> hypotheses_;
  std::shared_ptr<const HypothesisClass> candidates_;
  DiscriminatorClass discriminators_;
};

// Exact conditional mean over s' ~ P_h(.|s,a) of the true environment.
Vector expected_def(const EstimationFunction& def, const TabularMdp& env, int h, int behavior,
                    int s, int a, int f, int g, std::int64_t v);

// l = Q_{h,g}(s,a) - r - V_{h+1,f}(s').
class BellmanDef final : public EstimationFunction {
 public:
  // Throws CompletenessViolation when some backup r_h + P_h V_{h+1,f} is
  // farther than tol (sup norm) from every element of G.
  BellmanDef(std::shared_ptr<const HypothesisClass> hypotheses,
             std::shared_ptr<const HypothesisClass> candidates, const TabularMdp& env, double tol);

  std::string name() const override { return "bellman"; }
  Vector eval(int h, int behavior, const Transition<int>& o, int f, int g,
              std::int64_t v) const override;
  double squared_norm(int h, int behavior, const Transition<int>& o, int f, int g,
                      std::int64_t v) const override;
  int completion(int h, int f) const override { return completion_[h][f]; }
  double bound() const override { return 2.0; }
  double lipschitz() const override { return 1.0; }
  double completion_gap() const { return completion_gap_; }

 private:
  double value(int h, const Transition<int>& o, int f, int g) const;
  std::vector<std::vector<int>> completion_;
  double completion_gap_ = 0.0;
};

// G = F followed by the Bellman backups of every f (deduplicated), so the
// Bellman DEF is exactly decomposable on it.
HypothesisClass close_under_backup(const HypothesisClass& hypotheses, const TabularMdp& env);

// Known features of a linear mixture model: P_h(s'|s,a) = <theta_h, phi(s,a,s')>
// and r_h(s,a) = <theta_h, psi(s,a)>.
struct MixtureFeatures {
  int dim = 1;
  int num_states = 1;
  int num_actions = 1;
  std::vector<Vector> phi;  // index (s*A + a)*S + s'
  std::vector<Vector> psi;  // index s*A + a

  const Vector& phi_at(int s, int a, int next) const {
    return phi[(s * num_actions + a) * num_states + next];
  }
  const Vector& psi_at(int s, int a) const { return psi[s * num_actions + a]; }
  // psi(s,a) + sum_{s'} phi(s,a,s') V(s').
  Vector regressor(int s, int a, const Vector& next_values) const;
};

// l = theta_{h,g}^T [psi + phi_{V_{h+1,f'}}](s,a) - r - V_{h+1,f'}(s').
class LinearMixtureDef final : public EstimationFunction {
 public:
  LinearMixtureDef(std::shared_ptr<const HypothesisClass> hypotheses, MixtureFeatures features,
                   int optimal_index);

  std::string name() const override { return "linear_mixture"; }
  Vector eval(int h, int behavior, const Transition<int>& o, int f, int g,
              std::int64_t v) const override;
  double squared_norm(int h, int behavior, const Transition<int>& o, int f, int g,
                      std::int64_t v) const override;
  int completion(int, int) const override { return optimal_; }
  double bound() const override { return bound_; }
  double lipschitz() const override { return lipschitz_; }
  bool uses_behavior() const override { return true; }
  bool depends_on_next() const override { return false; }

  const MixtureFeatures& features() const { return features_; }
  // Regressor psi + phi_{V_{h+1,f'}} at (s, a) for behavior f'.
  const Vector& regressor(int h, int behavior, int s, int a) const {
    return regressors_[h][behavior][s * features_.num_actions + a];
  }
  const Vector& theta(int h, int g) const;

 private:
  double value(int h, int behavior, const Transition<int>& o, int g) const;
  MixtureFeatures features_;
  int optimal_;
  std::vector<std::vector<std::vector<Vector>>> regressors_;  // [h][f'][cell]
  double bound_ = 0.0;
  double lipschitz_ = 0.0;
};

// l = E_{x ~ g_h(.|s,a)} v(s,a,x) - v(s,a,s').
class WitnessDef final : public EstimationFunction {
 public:
  WitnessDef(std::shared_ptr<const HypothesisClass> models, DiscriminatorClass discriminators,
             int optimal_index);

  std::string name() const override { return "witness"; }
  Vector eval(int h, int behavior, const Transition<int>& o, int f, int g,
              std::int64_t v) const override;
  double squared_norm(int h, int behavior, const Transition<int>& o, int f, int g,
                      std::int64_t v) const override;
  int completion(int, int) const override { return optimal_; }
  double bound() const override { return 2.0 * discriminators_.bound(); }
  double lipschitz() const override;
  bool uses_discriminator() const override { return true; }
  bool depends_on_next() const override { return false; }

 private:
  double value(int h, const Transition<int>& o, int g, std::int64_t v) const;
  int optimal_;
};

struct CheckReport {
  std::string name;
  bool passed = true;
  double max_violation = 0.0;
  long long probes = 0;
  std::string detail;
};

struct ProbeOptions {
  int max_pairs = 4096;   // (f, g) pairs per step before sampling kicks in
  int max_units = 64;     // discriminator units per cell
  std::uint64_t seed = 7;
};

// Residual l - E_{s'}[l] - l(., ., T(f), .) under exact expectations.
CheckReport check_decomposability(const EstimationFunction& def, const TabularMdp& env,
                                  double tol, const ProbeOptions& probes = {});

// For each probed (h, f), finds per (s,a) the discriminators maximizing
// |E_{s'} l(o, f, f, v)| and checks that one class element attains all of
// these maxima simultaneously.
CheckReport check_global_discriminator_optimality(const EstimationFunction& def,
                                                  const TabularMdp& env, double tol,
                                                  const ProbeOptions& probes = {});

struct LipschitzEstimate {
  double f = 0.0;
  double g = 0.0;
  double v = 0.0;
  double behavior = 0.0;
  long long pairs = 0;
};

// Empirical max of ||l(x) - l(y)||_inf / rho(x, y) when one argument slot
// changes; pairs at distance zero are skipped.
LipschitzEstimate estimate_lipschitz(const EstimationFunction& def, const TabularMdp& env,
                                     int samples, Rng& rng);

}  // namespace opera
