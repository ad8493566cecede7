#pragma once

#include <functional>
#include <utility>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "opera/random.hpp"

namespace opera {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

// Steps are 0-based throughout: h = 0 is the first decision of an episode.

// Q-type: the operating action at the probed step follows the hypothesis
// being evaluated. V-type: the action is drawn uniformly during data
// collection and the coupling conditions are checked under the policy of f.
enum class OperatingMode { kQType, kVType };

template <class State>
struct Transition {
  State state;
  int action = 0;
  double reward = 0.0;
  State next;
};

template <class State>
using Trajectory = std::vector<Transition<State>>;

// Finite-horizon MDP over finite states and actions.
//
// Transition kernels are stored per step as an (S*A) x S matrix whose row
// s*A + a is P_h(. | s, a); rewards per step as an S x A matrix.
class TabularMdp {
 public:
  TabularMdp(int horizon, int num_states, int num_actions,
             std::vector<Matrix> transitions, std::vector<Matrix> rewards,
             int initial_state);

  int horizon() const { return horizon_; }
  int num_states() const { return num_states_; }
  int num_actions() const { return num_actions_; }
  int initial_state() const { return initial_state_; }

  auto next_distribution(int h, int s, int a) const {
    return transitions_[h].row(s * num_actions_ + a);
  }
  double reward(int h, int s, int a) const { return rewards_[h](s, a); }
  const Matrix& transition_matrix(int h) const { return transitions_[h]; }
  const Matrix& reward_matrix(int h) const { return rewards_[h]; }

  // Samples s' ~ P_h(.|s,a); throws InputError on invalid ids.
  std::pair<double, int> step(int h, int s, int a, Rng& rng) const;

  // Largest and smallest return over all trajectories with positive probability.
  std::pair<double, double> return_range() const;

  void check_ids(int h, int s, int a) const;

 private:
  int horizon_;
  int num_states_;
  int num_actions_;
  std::vector<Matrix> transitions_;
  std::vector<Matrix> rewards_;
  int initial_state_;
};

// Real-vector state space with a finite action set. Dynamics are supplied
// as a sampler; there is no exact planner for this family.
struct ContinuousMdp {
  int horizon = 1;
  int num_actions = 1;
  int state_dim = 1;
  Vector initial_state;
  std::function<double(int h, const Vector& s, int a)> reward;
  std::function<Vector(int h, const Vector& s, int a, Rng& rng)> sample_next;

  std::pair<double, Vector> step(int h, const Vector& s, int a, Rng& rng) const;
};

using EpisodicMdp = std::variant<TabularMdp, ContinuousMdp>;

// Per-step action distributions, stored as S x A row-stochastic matrices.
class Policy {
 public:
  explicit Policy(std::vector<Matrix> probs);
  static Policy deterministic(const std::vector<std::vector<int>>& actions, int num_actions);

  int horizon() const { return static_cast<int>(probs_.size()); }
  double prob(int h, int s, int a) const { return probs_[h](s, a); }
  const Matrix& table(int h) const { return probs_[h]; }
  int sample(int h, int s, Rng& rng) const;

 private:
  std::vector<Matrix> probs_;
};

struct ValueTables {
  std::vector<Matrix> q;  // [h] S x A
  std::vector<Vector> v;  // [h] S, with v[H] == 0
};

struct OptimalSolution {
  ValueTables values;
  std::vector<std::vector<int>> greedy;  // [h][s]
  Policy policy(int num_actions) const { return Policy::deterministic(greedy, num_actions); }
};

std::pair<double, int> step(const TabularMdp& env, int h, int s, int a, Rng& rng);

Trajectory<int> rollout(const TabularMdp& env, const Policy& policy, Rng& rng);
Trajectory<Vector> rollout(const ContinuousMdp& env,
                           const std::function<int(int, const Vector&)>& policy, Rng& rng);

double trajectory_return(const Trajectory<int>& traj);
double trajectory_return(const Trajectory<Vector>& traj);

// Backward induction for V^pi and Q^pi.
ValueTables exact_value(const TabularMdp& env, const Policy& policy);
ValueTables exact_value(const EpisodicMdp& env, const Policy& policy);

// Backward induction with the Bellman optimality operator; ties go to the
// smallest action id.
OptimalSolution optimal_values(const TabularMdp& env);
OptimalSolution optimal_values(const EpisodicMdp& env);

// Marginal distribution of s_h under the policy, for h = 0..H-1.
std::vector<Vector> state_distribution(const TabularMdp& env, const Policy& policy);

// Argmax with smallest-index tie-break.
template <class Derived>
int argmax_first(const Eigen::DenseBase<Derived>& values) {
  int best = 0;
  for (Eigen::Index i = 1; i < values.size(); ++i) {
    if (values(i) > values(best)) best = static_cast<int>(i);
  }
  return best;
}

}  // namespace opera
