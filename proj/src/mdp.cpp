#include "opera/mdp.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "opera/errors.hpp"

namespace opera {

namespace {

constexpr double kRowTolerance = 1e-12;

}  // namespace

TabularMdp::TabularMdp(int horizon, int num_states, int num_actions,
                       std::vector<Matrix> transitions, std::vector<Matrix> rewards,
                       int initial_state)
    : horizon_(horizon),
      num_states_(num_states),
      num_actions_(num_actions),
      transitions_(std::move(transitions)),
      rewards_(std::move(rewards)),
      initial_state_(initial_state) {
  if (horizon_ < 1 || num_states_ < 1 || num_actions_ < 1) {
    throw InputError("TabularMdp: horizon, state count and action count must be positive");
  }
  if (initial_state_ < 0 || initial_state_ >= num_states_) {
    throw InputError("TabularMdp: initial state out of range");
  }
  if (static_cast<int>(transitions_.size()) != horizon_ ||
      static_cast<int>(rewards_.size()) != horizon_) {
    throw InputError("TabularMdp: need one transition and reward table per step");
  }
  for (int h = 0; h < horizon_; ++h) {
    const Matrix& p = transitions_[h];
    if (p.rows() != num_states_ * num_actions_ || p.cols() != num_states_) {
      throw InputError("TabularMdp: transition table has wrong shape at step " + std::to_string(h));
    }
    if (rewards_[h].rows() != num_states_ || rewards_[h].cols() != num_actions_) {
      throw InputError("TabularMdp: reward table has wrong shape at step " + std::to_string(h));
    }
    if ((p.array() < 0.0).any()) {
      throw InputError("TabularMdp: negative transition probability at step " + std::to_string(h));
    }
    for (Eigen::Index row = 0; row < p.rows(); ++row) {
      if (std::abs(p.row(row).sum() - 1.0) > kRowTolerance) {
        throw InputError("TabularMdp: transition row does not sum to one at step " +
                         std::to_string(h));
      }
    }
    if ((rewards_[h].array() < 0.0).any()) {
      throw InputError("TabularMdp: rewards must be nonnegative");
    }
  }
  const auto [lo, hi] = return_range();
  if (lo < -1e-12 || hi > 1.0 + 1e-12) {
    throw InputError("TabularMdp: some trajectory has return outside [0, 1]");
  }
}

void TabularMdp::check_ids(int h, int s, int a) const {
  if (h < 0 || h >= horizon_) throw InputError("step index out of range");
  if (s < 0 || s >= num_states_) throw InputError("state id out of range");
  if (a < 0 || a >= num_actions_) throw InputError("action id out of range");
}

std::pair<double, int> TabularMdp::step(int h, int s, int a, Rng& rng) const {
  check_ids(h, s, a);
  const auto row = next_distribution(h, s, a);
  const auto next = static_cast<int>(rng.categorical(row));
  return {rewards_[h](s, a), next};
}

std::pair<double, double> TabularMdp::return_range() const {
  // Extremes over every path with positive probability, ignoring reachability
  // from the initial state (a stronger check than the invariant needs).
  Vector hi = Vector::Zero(num_states_);
  Vector lo = Vector::Zero(num_states_);
  for (int h = horizon_ - 1; h >= 0; --h) {
    Vector new_hi(num_states_);
    Vector new_lo(num_states_);
    for (int s = 0; s < num_states_; ++s) {
      double best = -1e300;
      double worst = 1e300;
      for (int a = 0; a < num_actions_; ++a) {
        const auto row = next_distribution(h, s, a);
        double cont_hi = -1e300;
        double cont_lo = 1e300;
        for (int sp = 0; sp < num_states_; ++sp) {
          if (row(sp) <= 0.0) continue;
          cont_hi = std::max(cont_hi, hi(sp));
          cont_lo = std::min(cont_lo, lo(sp));
        }
        best = std::max(best, rewards_[h](s, a) + cont_hi);
        worst = std::min(worst, rewards_[h](s, a) + cont_lo);
      }
      new_hi(s) = best;
      new_lo(s) = worst;
    }
    hi = std::move(new_hi);
    lo = std::move(new_lo);
  }
  return {lo.minCoeff(), hi.maxCoeff()};
}

std::pair<double, Vector> ContinuousMdp::step(int h, const Vector& s, int a, Rng& rng) const {
  if (h < 0 || h >= horizon) throw InputError("step index out of range");
  if (a < 0 || a >= num_actions) throw InputError("action id out of range");
  if (s.size() != state_dim) throw InputError("state has wrong dimension");
  return {reward(h, s, a), sample_next(h, s, a, rng)};
}

Policy::Policy(std::vector<Matrix> probs) : probs_(std::move(probs)) {
  for (const Matrix& table : probs_) {
    for (Eigen::Index s = 0; s < table.rows(); ++s) {
      if ((table.row(s).array() < 0.0).any() || std::abs(table.row(s).sum() - 1.0) > 1e-9) {
        throw InputError("Policy: every action distribution must be a probability vector");
      }
    }
  }
}

Policy Policy::deterministic(const std::vector<std::vector<int>>& actions, int num_actions) {
  std::vector<Matrix> probs;
  probs.reserve(actions.size());
  for (const auto& per_state : actions) {
    Matrix table = Matrix::Zero(static_cast<Eigen::Index>(per_state.size()), num_actions);
    for (std::size_t s = 0; s < per_state.size(); ++s) {
      if (per_state[s] < 0 || per_state[s] >= num_actions) {
        throw InputError("Policy: action id out of range");
      }
      table(static_cast<Eigen::Index>(s), per_state[s]) = 1.0;
    }
    probs.push_back(std::move(table));
  }
  return Policy(std::move(probs));
}

int Policy::sample(int h, int s, Rng& rng) const {
  return static_cast<int>(rng.categorical(probs_[h].row(s)));
}

std::pair<double, int> step(const TabularMdp& env, int h, int s, int a, Rng& rng) {
  return env.step(h, s, a, rng);
}

Trajectory<int> rollout(const TabularMdp& env, const Policy& policy, Rng& rng) {
  Trajectory<int> traj;
  traj.reserve(static_cast<std::size_t>(env.horizon()));
  int s = env.initial_state();
  for (int h = 0; h < env.horizon(); ++h) {
    const int a = policy.sample(h, s, rng);
    const auto [r, next] = env.step(h, s, a, rng);
    traj.push_back({s, a, r, next});
    s = next;
  }
  return traj;
}

Trajectory<Vector> rollout(const ContinuousMdp& env,
                           const std::function<int(int, const Vector&)>& policy, Rng& rng) {
  Trajectory<Vector> traj;
  traj.reserve(static_cast<std::size_t>(env.horizon));
  Vector s = env.initial_state;
  for (int h = 0; h < env.horizon; ++h) {
    const int a = policy(h, s);
    auto [r, next] = env.step(h, s, a, rng);
    traj.push_back({s, a, r, next});
    s = std::move(next);
  }
  return traj;
}

double trajectory_return(const Trajectory<int>& traj) {
  double total = 0.0;
  for (const auto& tr : traj) total += tr.reward;
  return total;
}

double trajectory_return(const Trajectory<Vector>& traj) {
  double total = 0.0;
  for (const auto& tr : traj) total += tr.reward;
  return total;
}

ValueTables exact_value(const TabularMdp& env, const Policy& policy) {
  const int H = env.horizon();
  const int S = env.num_states();
  const int A = env.num_actions();
  if (policy.horizon() != H) throw InputError("exact_value: policy horizon mismatch");
  ValueTables out;
  out.q.assign(H, Matrix::Zero(S, A));
  out.v.assign(H + 1, Vector::Zero(S));
  for (int h = H - 1; h >= 0; --h) {
    const Vector next_values = env.transition_matrix(h) * out.v[h + 1];
    for (int s = 0; s < S; ++s) {
      for (int a = 0; a < A; ++a) {
        out.q[h](s, a) = env.reward(h, s, a) + next_values(s * A + a);
      }
      out.v[h](s) = policy.table(h).row(s).dot(out.q[h].row(s));
    }
  }
  return out;
}

ValueTables exact_value(const EpisodicMdp& env, const Policy& policy) {
  if (const auto* tab = std::get_if<TabularMdp>(&env)) return exact_value(*tab, policy);
  throw UnsupportedInstance("exact_value requires a tabular environment");
}

OptimalSolution optimal_values(const TabularMdp& env) {
  const int H = env.horizon();
  const int S = env.num_states();
  const int A = env.num_actions();
  OptimalSolution out;
  out.values.q.assign(H, Matrix::Zero(S, A));
  out.values.v.assign(H + 1, Vector::Zero(S));
  out.greedy.assign(H, std::vector<int>(S, 0));
  for (int h = H - 1; h >= 0; --h) {
    const Vector next_values = env.transition_matrix(h) * out.values.v[h + 1];
    for (int s = 0; s < S; ++s) {
      for (int a = 0; a < A; ++a) {
        out.values.q[h](s, a) = env.reward(h, s, a) + next_values(s * A + a);
      }
      const int best = argmax_first(out.values.q[h].row(s));
      out.greedy[h][s] = best;
      out.values.v[h](s) = out.values.q[h](s, best);
    }
  }
  return out;
}

OptimalSolution optimal_values(const EpisodicMdp& env) {
  if (const auto* tab = std::get_if<TabularMdp>(&env)) return optimal_values(*tab);
  throw UnsupportedInstance("optimal_values requires a tabular environment");
}

std::vector<Vector> state_distribution(const TabularMdp& env, const Policy& policy) {
  const int S = env.num_states();
  const int A = env.num_actions();
  std::vector<Vector> dist;
  dist.reserve(static_cast<std::size_t>(env.horizon()));
  Vector d = Vector::Zero(S);
  d(env.initial_state()) = 1.0;
  for (int h = 0; h < env.horizon(); ++h) {
    dist.push_back(d);
    Vector next = Vector::Zero(S);
    for (int s = 0; s < S; ++s) {
      if (d(s) == 0.0) continue;
      for (int a = 0; a < A; ++a) {
        const double w = d(s) * policy.prob(h, s, a);
        if (w == 0.0) continue;
        next += w * env.next_distribution(h, s, a).transpose();
      }
    }
    d = std::move(next);
  }
  return dist;
}

}  // namespace opera
