#pragma once

#include <atomic>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "opera/confidence.hpp"
#include "opera/estimation.hpp"
#include "opera/mdp.hpp"
#include "opera/opera.hpp"

namespace opera {

// Kernelized nonlinear regulator with s' = U*_h phi(s, a) + sigma * eps and
// phi(s, a) = scale * tanh(W s + b_a).
struct KnrSpec {
  int state_dim = 2;
  int feature_dim = 2;
  int num_actions = 2;
  int horizon = 3;
  double sigma = 0.1;
  Matrix feature_weights;             // d_phi x d_s
  std::vector<Vector> action_bias;    // [a] in R^{d_phi}
  double feature_scale = 1.0;
  double feature_bound = 0.0;         // 0 means sqrt(d_phi) * scale
  Vector initial_state;

  // Reward (1/H) exp(-||s - goal||^2 / width^2) by default; with
  // linear_reward, (1/H) clamp(<w, s> + offset, 0, 1).
  Vector goal;
  double goal_width = 1.0;
  bool linear_reward = false;
  Vector reward_weights;
  double reward_offset = 0.0;

  std::vector<Matrix> u_star;               // [h] d_s x d_phi
  std::vector<std::vector<Matrix>> u_grid;  // [h] candidates, each contains u_star[h]

  int planning_budget = 2048;
  std::uint64_t planning_seed = 11;
  int value_rollouts = 10000;
  std::uint64_t value_seed = 13;
  double clip_constant = 1.0;
};

KnrSpec canonical_knr_spec();
KnrSpec random_knr_spec(int state_dim, int feature_dim, int horizon, double sigma, Rng& rng);

class KnrInstance;

// Certainty-equivalent planner under one hypothesis. Expectations over the
// Gaussian noise are replaced by a fixed set of shared draws, so values are
// deterministic functions of the state.
class KnrPlanner {
 public:
  KnrPlanner(const KnrInstance* instance, std::vector<Matrix> u);
  double q(int h, const Vector& s, int a) const;
  double value(int h, const Vector& s) const;
  int action(int h, const Vector& s) const;
  const std::vector<Matrix>& u() const { return u_; }

 private:
  const KnrInstance* instance_;
  std::vector<Matrix> u_;
};

class KnrInstance {
 public:
  explicit KnrInstance(KnrSpec spec);
  KnrInstance(const KnrInstance&) = delete;
  KnrInstance& operator=(const KnrInstance&) = delete;

  const KnrSpec& spec() const { return spec_; }
  const ContinuousMdp& env() const { return env_; }
  int horizon() const { return spec_.horizon; }
  int num_hypotheses() const { return static_cast<int>(planners_.size()); }
  int optimal_index() const { return optimal_; }
  const Matrix& u(int f, int h) const { return planners_[f]->u()[h]; }
  const KnrPlanner& planner(int f) const { return *planners_[f]; }

  Vector features(const Vector& s, int a) const;
  double reward(int h, const Vector& s, int a) const;
  const std::vector<Vector>& noise_draws() const { return noise_; }
  double feature_bound() const;

  int act(int f, int h, const Vector& s) const { return planners_[f]->action(h, s); }
  const std::vector<double>& optimistic_values() const { return optimistic_; }
  const std::vector<double>& policy_values() const { return policy_values_; }
  const std::vector<double>& policy_value_errors() const { return policy_errors_; }
  double optimal_value() const { return policy_values_[optimal_]; }

  // Clipping radius 2 B_U B + c sigma sqrt(ln(T H d_s / delta)).
  double clip_radius(int episodes, double delta) const;

  // Roll-in to step h under the greedy policy of g on the true dynamics.
  std::vector<std::pair<Vector, int>> sample_state_actions(int g, int h, int count,
                                                           std::uint64_t seed) const;

  OperaProblem<Vector> problem() const;
  // Serialized hypothesis parameters.
  std::vector<std::vector<Matrix>> hypotheses() const;

 private:
  KnrSpec spec_;
  ContinuousMdp env_;
  std::vector<Vector> noise_;
  std::vector<std::unique_ptr<KnrPlanner>> planners_;
  int optimal_ = 0;
  std::vector<double> optimistic_;
  std::vector<double> policy_values_;
  std::vector<double> policy_errors_;
};

// l = U_{h,g} phi(s, a) - s', clipped to norm R; T(f) = f*.
class KnrDef {
 public:
  KnrDef(const KnrInstance& instance, double radius);
  Vector eval(int h, const Transition<Vector>& o, int g) const;
  Vector eval_unclipped(int h, const Transition<Vector>& o, int g) const;
  // Exact Gaussian mean: (U_g - U*) phi(s, a).
  Vector expected(int h, const Vector& s, int a, int g) const;
  int completion() const { return instance_.optimal_index(); }
  double bound() const { return radius_; }
  int dim() const { return instance_.spec().state_dim; }
  long long clip_events() const { return clips_.load(); }

 private:
  const KnrInstance& instance_;
  double radius_;
  mutable std::atomic<long long> clips_{0};
};

CheckReport check_knr_decomposability(const KnrInstance& instance, const KnrDef& def,
                                      int samples, std::uint64_t seed, double tol);

// Per-(g, h) second moments of phi under the roll-in of pi_g, estimated by
// Monte Carlo; the KNR coupling is sqrt(tr(dU Sigma dU^T)).
class KnrCoupling {
 public:
  KnrCoupling(const KnrInstance& instance, int rollouts, std::uint64_t seed);
  double value(int h, int f, int g) const;
  // Standard error of G(f, g), via |sqrt(a) - sqrt(b)| <= sqrt(|a - b|).
  double standard_error(int h, int f, int g) const;
  double kappa() const;
  const Matrix& second_moment(int g, int h) const { return moments_[g][h]; }

 private:
  const KnrInstance& instance_;
  int rollouts_;
  std::vector<std::vector<Matrix>> moments_;                // [g][h]
  std::vector<std::vector<std::vector<Vector>>> features_;  // [g][h] sampled phi
};

struct MonteCarloEstimate {
  double mean = 0.0;
  double standard_error = 0.0;
};

MonteCarloEstimate knr_average_bellman_error(const KnrInstance& instance, int f, int h,
                                             int rollouts, std::uint64_t seed);

// Both ABC conditions with 3-standard-error slack; kappa_scale multiplies
// the declared kappa.
CheckReport check_knr_dominating_average(const KnrInstance& instance, const KnrCoupling& coupling,
                                         double tol);
CheckReport check_knr_bellman_dominance(const KnrInstance& instance, const KnrCoupling& coupling,
                                        int rollouts, std::uint64_t seed, double kappa_scale = 1.0);

enum class KnrConstraintForm { kMatrix, kFiniteClass };

// Confidence constraint for the regulator. kMatrix: ||(U_f - U_hat) Sigma^{1/2}||_F^2 with the
// least-squares U_hat; kFiniteClass: the raw residual difference with the inf
// taken over the finite class.
class KnrConfidence final : public ConfidenceSet<Vector> {
 public:
  // A positive clip_radius counts transitions on which some hypothesis has a
  // residual longer than the radius.
  KnrConfidence(const KnrInstance& instance, KnrConstraintForm form = KnrConstraintForm::kMatrix,
                double lambda = 1e-8, double clip_radius = 0.0);
  void add(int h, const Transition<Vector>& o, int behavior) override;
  double lhs(int h, int f) const override;
  int count(int h) const override { return counts_[h]; }
  RidgeFit fit(int h) const;
  double raw_residual(int h, const Matrix& u) const;
  long long clip_events() const { return clips_; }

 private:
  const KnrInstance& instance_;
  KnrConstraintForm form_;
  double lambda_;
  double clip_radius_;
  long long clips_ = 0;
  std::vector<Matrix> sigma_;
  std::vector<Matrix> cross_;
  std::vector<double> yy_;
  std::vector<int> counts_;
  mutable std::vector<std::vector<double>> cache_;
  mutable std::vector<bool> fresh_;
};

// Least-squares fit of U_h from raw transitions.
RidgeFit knr_confidence(const KnrInstance& instance, int h,
                        const std::vector<Transition<Vector>>& history, double lambda);

}  // namespace opera
