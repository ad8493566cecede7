#pragma once

#include <memory>
#include <string>
#include <vector>

#include "opera/confidence.hpp"
#include "opera/coupling.hpp"
#include "opera/discriminator.hpp"
#include "opera/estimation.hpp"
#include "opera/hypothesis.hpp"
#include "opera/knr.hpp"
#include "opera/mdp.hpp"
#include "opera/opera.hpp"

namespace opera {

// Environment, hypothesis class, DEF and coupling of one tabular fixture.
struct TabularInstance {
  std::string family;  // linear_mixture, bellman or witness
  std::shared_ptr<const TabularMdp> env;
  std::shared_ptr<const HypothesisClass> hypotheses;
  std::shared_ptr<const EstimationFunction> def;
  std::shared_ptr<const LinearMixtureDef> mixture;  // linear mixture only
  CouplingFunction coupling;
  int optimal_index = 0;
  double kappa = 1.0;
  double tightest_kappa = 1.0;
  std::vector<CheckReport> construction_checks;

  OperatingMode mode() const { return coupling.mode; }
};

struct LinearMixtureSpec {
  int horizon = 1;
  int initial_state = 0;
  MixtureFeatures features;
  std::vector<Vector> theta_star;               // [h]
  std::vector<std::vector<Vector>> theta_grid;  // [h] candidates
};

LinearMixtureSpec canonical_linear_mixture_spec();
// Random base kernels, psi in [0, 1/H]^d and a simplex grid with the given
// resolution; theta* is drawn from the grid.
LinearMixtureSpec random_linear_mixture_spec(int dim, int horizon, int num_states, int num_actions,
                                             int resolution, Rng& rng);

// Kernel P_h = sum_k theta_k K^k and reward theta^T psi; throws InputError
// when theta produces an invalid kernel or reward.
TabularMdp mixture_model(const MixtureFeatures& features, const std::vector<Vector>& theta,
                         int initial_state);

// Invalid grid points are dropped; an empty grid or an invalid theta* is a
// ConstructionError.
TabularInstance make_linear_mixture(const LinearMixtureSpec& spec);

// Same environment and hypotheses as the linear mixture fixture, but with the
// Bellman DEF on the backup-closed candidate class.
TabularInstance make_bellman_instance(const LinearMixtureSpec& spec);

struct WitnessSpec {
  TabularMdp truth;
  std::vector<TabularMdp> alternatives;
  double discriminator_bound = 1.0;
  double kappa = 1.0;
};

WitnessSpec canonical_witness_spec();
WitnessSpec random_witness_spec(int num_states, int num_actions, int horizon, int class_size,
                                Rng& rng);
TabularInstance make_witness(const WitnessSpec& spec);

// Runs every checker on the instance; throws ConstructionError with the
// offending report on failure.
std::vector<CheckReport> verify_instance(const TabularInstance& instance, double kappa_scale = 1.0);

OperaProblem<int> make_problem(const TabularInstance& instance);
std::unique_ptr<ConfidenceSet<int>> make_confidence(const TabularInstance& instance,
                                                    bool closed_form);
double default_beta(const TabularInstance& instance, int episodes, double delta, double c);

// KNR instance plus the checks run on it at construction.
struct KnrBundle {
  std::unique_ptr<KnrInstance> instance;
  std::vector<CheckReport> construction_checks;
};

struct KnrCheckOptions {
  int coupling_rollouts = 2000;
  int bellman_rollouts = 2000;
  std::uint64_t seed = 5;
  bool run = true;
};

KnrBundle make_knr(KnrSpec spec, const KnrCheckOptions& checks = {});
std::vector<CheckReport> verify_knr(const KnrInstance& instance, const KnrCheckOptions& checks,
                                    double kappa_scale = 1.0);

}  // namespace opera
