#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "opera/confidence.hpp"
#include "opera/errors.hpp"
#include "opera/mdp.hpp"
#include "opera/random.hpp"

namespace opera {

// Everything the optimistic loop needs to know about an instance.
template <class State>
struct OperaProblem {
  int horizon = 1;
  int num_actions = 1;
  int num_hypotheses = 0;
  State initial_state{};
  std::function<std::pair<double, State>(int h, const State& s, int a, Rng& rng)> step;
  std::function<int(int f, int h, const State& s)> act;  // greedy action of f
  std::vector<double> optimistic_values;                 // V_{1,f}(s_1)
  std::vector<double> policy_values;                     // V_1^{pi_f}(s_1)
  double optimal_value = 0.0;
  std::optional<int> optimal_index;
};

struct OperaConfig {
  int episodes = 100;
  double delta = 0.1;
  std::optional<double> beta;  // explicit value; otherwise the default schedule
  double c = 1.0;
  OperatingMode mode = OperatingMode::kQType;
  std::uint64_t seed = 1;

  void validate() const;
};

struct EpisodeRecord {
  int episode = 0;  // 1-based
  int selected = 0;
  double value_optimistic = 0.0;
  double value_actual = 0.0;
  double realized_return = 0.0;
  double regret = 0.0;
  double cum_regret = 0.0;
  bool fstar_feasible = true;
  double max_constraint_lhs = 0.0;  // max over h of the constraint LHS of f*
};

struct RunLog {
  std::uint64_t seed = 0;
  double beta = 0.0;
  std::vector<EpisodeRecord> episodes;
  int optimism_violations = 0;
  int fstar_infeasible_episodes = 0;
  long long clip_events = 0;

  bool fstar_always_feasible() const { return fstar_infeasible_episodes == 0; }
  double cumulative_regret(int t) const;
  // Suboptimality of the uniform mixture over pi^1..pi^t.
  double mixture_suboptimality(int t) const { return cumulative_regret(t) / t; }
  // First t whose uniform-mixture suboptimality is at most eps.
  std::optional<int> sample_complexity(double eps) const;
};

// c (ln T + ln H + log N_L + ln(1/delta)), log N_L = 2 ln|F| + ln|G| + ln|V|.
double beta_default(int episodes, int horizon, double log_loss_cover, double delta, double c);
double log_loss_cover(double log_f, double log_g, double log_v);
// c sigma^2 d_phi d_s ln^2(T H / delta).
double beta_knr(int episodes, int horizon, double sigma, int d_phi, int d_s, double delta,
                double c);

// Smallest-index argmax of the optimistic value among hypotheses whose
// constraint LHS is at most beta at every step. lhs[h][f] must be filled.
int select_hypothesis(const std::vector<double>& optimistic_values,
                      const std::vector<std::vector<double>>& lhs, double beta);

template <class State>
std::vector<std::vector<double>> all_constraint_lhs(const ConfidenceSet<State>& conf, int horizon,
                                                    int num_hypotheses) {
  std::vector<std::vector<double>> out(horizon, std::vector<double>(num_hypotheses, 0.0));
  for (int h = 0; h < horizon; ++h) {
    for (int f = 0; f < num_hypotheses; ++f) out[h][f] = conf.lhs(h, f);
  }
  return out;
}

// Main loop: optimistic selection under the confidence constraint,
// then data collection. Q-type slices one trajectory of pi^t into per-step
// tuples; V-type runs a fresh roll-in to each step h and takes a uniform
// action there.
template <class State>
RunLog opera_run(const OperaProblem<State>& problem, ConfidenceSet<State>& conf,
                 const OperaConfig& config, double beta) {
  config.validate();
  if (beta < 0.0) throw InputError("opera_run: beta must be nonnegative");
  RunLog log;
  log.seed = config.seed;
  log.beta = beta;
  Rng rng(config.seed);
  const int H = problem.horizon;
  double cum = 0.0;
  for (int t = 1; t <= config.episodes; ++t) {
    const auto lhs = all_constraint_lhs(conf, H, problem.num_hypotheses);
    EpisodeRecord rec;
    rec.episode = t;
    rec.selected = select_hypothesis(problem.optimistic_values, lhs, beta);
    if (problem.optimal_index) {
      const int star = *problem.optimal_index;
      rec.max_constraint_lhs = 0.0;
      for (int h = 0; h < H; ++h) rec.max_constraint_lhs = std::max(rec.max_constraint_lhs, lhs[h][star]);
      rec.fstar_feasible = rec.max_constraint_lhs <= beta;
      if (!rec.fstar_feasible) ++log.fstar_infeasible_episodes;
      if (rec.fstar_feasible &&
          problem.optimistic_values[rec.selected] < problem.optimistic_values[star] - 1e-12) {
        ++log.optimism_violations;
      }
    } else {
      for (int h = 0; h < H; ++h) rec.max_constraint_lhs = std::max(rec.max_constraint_lhs, lhs[h][rec.selected]);
    }
    rec.value_optimistic = problem.optimistic_values[rec.selected];
    rec.value_actual = problem.policy_values[rec.selected];
    rec.regret = problem.optimal_value - rec.value_actual;
    cum += rec.regret;
    rec.cum_regret = cum;

    const int f = rec.selected;
    if (config.mode == OperatingMode::kQType) {
      State s = problem.initial_state;
      for (int h = 0; h < H; ++h) {
        const int a = problem.act(f, h, s);
        auto [r, next] = problem.step(h, s, a, rng);
        rec.realized_return += r;
        conf.add(h, Transition<State>{s, a, r, next}, f);
        s = std::move(next);
      }
    } else {
      for (int h = 0; h < H; ++h) {
        State s = problem.initial_state;
        double ret = 0.0;
        for (int k = 0; k < h; ++k) {
          auto [r, next] = problem.step(k, s, problem.act(f, k, s), rng);
          ret += r;
          s = std::move(next);
        }
        const int a = static_cast<int>(rng.below(static_cast<std::size_t>(problem.num_actions)));
        auto [r, next] = problem.step(h, s, a, rng);
        conf.add(h, Transition<State>{s, a, r, next}, f);
        if (h == H - 1) rec.realized_return = ret + r;
      }
    }
    log.episodes.push_back(rec);
  }
  return log;
}

}  // namespace opera
