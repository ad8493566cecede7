#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "opera/instances.hpp"
#include "opera/knr.hpp"
#include "opera/opera.hpp"
#include "opera/serialization.hpp"

namespace opera {

struct InstanceConfig {
  std::string family = "linear_mixture";  // linear_mixture, bellman, witness or knr
  std::string fixture;                    // JSON spec path; canonical instance when empty
  bool random = false;
  std::uint64_t seed = 1;
  int dim = 2;
  int horizon = 3;
  int num_states = 3;
  int num_actions = 2;
  int resolution = 3;
  int class_size = 4;
  double sigma = 0.1;
  std::optional<int> planning_budget;
  std::optional<int> value_rollouts;
};

struct ExperimentConfig {
  InstanceConfig instance;
  OperaConfig opera;
  std::optional<OperatingMode> mode;  // instance default when empty
  std::string confidence = "enumerated";  // enumerated or closed_form
  std::vector<std::uint64_t> seeds{1};
  std::string output_dir;
  std::vector<std::string> checkers;
  double kappa_scale = 1.0;
  bool svg = true;
  double sample_complexity_eps = 0.1;
  double fedim_eps = 0.1;
  int threads = 0;  // 0: hardware concurrency, capped by OPERA_THREADS
  Json source;      // the parsed document, echoed into the summary
};

// Throws InputError on malformed or out-of-range fields.
ExperimentConfig parse_config(const Json& j);
ExperimentConfig load_config(const std::string& path);

// Either a tabular instance or a KNR instance, built once and shared by all
// seeds.
struct BuiltInstance {
  std::optional<TabularInstance> tabular;
  std::shared_ptr<KnrInstance> knr;
  std::vector<CheckReport> construction_checks;
};

BuiltInstance build_instance(const InstanceConfig& config, bool run_checks = true);

struct SeedSummary {
  std::uint64_t seed = 0;
  bool ok = false;
  std::string error;
  double beta = 0.0;
  double final_cum_regret = 0.0;
  bool fstar_always_feasible = false;
  int optimism_violations = 0;
  long long clip_events = 0;
  std::optional<int> sample_complexity;
  std::string csv_path;
};

struct AggregateReport {
  std::vector<SeedSummary> seeds;
  std::vector<RunLog> logs;          // successful runs, in seed order
  std::vector<double> mean_cum_regret;  // [t-1]
  std::vector<double> q10, q50, q90;
  double feasibility_frequency = 0.0;
  std::optional<double> sample_complexity;  // median over seeds that reach eps
  int sample_complexity_reached = 0;
  int failed = 0;

  double mean_cumulative_regret(int t) const { return mean_cum_regret.at(t - 1); }
  double mean_per_episode_regret(int t) const { return mean_cum_regret.at(t - 1) / t; }
};

std::string run_log_csv(const RunLog& log);
std::string aggregate_csv(const AggregateReport& report);
std::string regret_svg(const AggregateReport& report);

// One OPERA run on a prebuilt instance.
RunLog run_seed(const BuiltInstance& instance, const ExperimentConfig& config, std::uint64_t seed);

// Runs every seed (in parallel), aggregates and writes files when an output
// directory is set. Seed failures are recorded and excluded.
AggregateReport run_experiment(const ExperimentConfig& config);
AggregateReport run_experiment(const BuiltInstance& instance, const ExperimentConfig& config);

struct CheckSuiteReport {
  std::vector<CheckReport> checks;
  bool passed() const;
  Json to_json() const;
};

// Suites: decomposability, abc, policy_loss, fedim, all.
CheckSuiteReport run_checkers(const ExperimentConfig& config);
CheckSuiteReport run_checkers(const BuiltInstance& instance, const ExperimentConfig& config);

int worker_count(int requested, int jobs);

}  // namespace opera
