#include <cstdio>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "opera/errors.hpp"
#include "opera/fe_dimension.hpp"
#include "opera/harness.hpp"
#include "opera/serialization.hpp"

namespace {

constexpr int kPass = 0;
constexpr int kCheckFailure = 1;
constexpr int kConfigError = 2;
constexpr int kRuntimeError = 3;

int run_command(const std::string& config_path, int seeds, const std::string& out) {
  auto config = opera::load_config(config_path);
  if (seeds > 0) {
    config.seeds.clear();
    for (int i = 1; i <= seeds; ++i) config.seeds.push_back(static_cast<std::uint64_t>(i));
  }
  if (!out.empty()) config.output_dir = out;
  const auto report = opera::run_experiment(config);
  const int T = config.opera.episodes;
  std::cout << "seeds: " << report.logs.size() << " ok, " << report.failed << " failed\n";
  for (const auto& s : report.seeds) {
    if (!s.ok) std::cout << "  seed " << s.seed << " failed: " << s.error << "\n";
  }
  if (!report.mean_cum_regret.empty()) {
    std::cout << "mean cumulative regret at T=" << T << ": " << report.mean_cumulative_regret(T) << "\n";
    std::cout << "f* feasible throughout: " << report.feasibility_frequency * 100.0 << "% of runs\n";
    if (report.sample_complexity) {
      std::cout << "median sample complexity (eps " << config.sample_complexity_eps
                << "): " << *report.sample_complexity << " episodes\n";
    }
  }
  if (!config.output_dir.empty()) std::cout << "outputs in " << config.output_dir << "\n";
  return report.logs.empty() ? kRuntimeError : kPass;
}

int check_command(const std::string& config_path, const std::string& suite, double kappa_scale) {
  auto config = opera::load_config(config_path);
  if (!suite.empty()) config.checkers = {suite};
  if (kappa_scale > 0.0) config.kappa_scale = kappa_scale;
  const auto report = opera::run_checkers(config);
  std::cout << report.to_json().dump(2) << "\n";
  return report.passed() ? kPass : kCheckFailure;
}

int fedim_command(const std::string& table_path, double eps, int cap) {
  const auto table = opera::coupling_table_from_json(opera::read_json_file(table_path));
  const auto result = opera::fe_dimension(table, eps, cap);
  opera::Json out{{"dim", result.dim},
                  {"exact", result.exact},
                  {"threshold", result.threshold},
                  {"sequence", result.sequence},
                  {"witnesses", result.witnesses}};
  std::cout << out.dump(2) << "\n";
  return kPass;
}

int export_command(const std::string& family, const std::string& out) {
  opera::Json j;
  if (family == "linear_mixture" || family == "bellman") {
    j = opera::to_json(opera::canonical_linear_mixture_spec());
  } else if (family == "witness") {
    j = opera::to_json(opera::canonical_witness_spec());
  } else if (family == "knr") {
    j = opera::to_json(opera::canonical_knr_spec());
  } else {
    throw opera::InputError("unknown family " + family);
  }
  if (out.empty()) {
    std::cout << j.dump(2) << "\n";
  } else {
    opera::write_json_file(out, j);
  }
  return kPass;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"OPERA experiments and checkers"};
  app.require_subcommand(1);

  std::string config_path;
  int seeds = 0;
  std::string out_dir;
  auto* run = app.add_subcommand("run", "run OPERA over seeds and write CSV/JSON/SVG outputs");
  run->add_option("--config", config_path, "experiment config (JSON)")->required();
  run->add_option("--seeds", seeds, "run seeds 1..N instead of the configured list");
  run->add_option("--out", out_dir, "output directory");

  std::string suite;
  double kappa_scale = 0.0;
  auto* check = app.add_subcommand("check", "run checker suites on the configured instance");
  check->add_option("--config", config_path, "experiment config (JSON)")->required();
  check->add_option("--suite", suite, "decomposability, abc, policy_loss, fedim or all")
      ->check(CLI::IsMember({"decomposability", "abc", "policy_loss", "fedim", "all"}));
  check->add_option("--kappa-scale", kappa_scale, "multiply the declared kappa");

  std::string table_path;
  double eps = 0.1;
  int cap = 12;
  auto* fedim = app.add_subcommand("fedim", "FE dimension of a coupling table");
  fedim->add_option("--table", table_path, "JSON table, rows witnesses, columns sequence")->required();
  fedim->add_option("--epsilon", eps, "scale eps > 0")->required();
  fedim->add_option("--cap", cap, "largest sequence length searched");

  std::string family;
  auto* exp = app.add_subcommand("export", "write a canonical fixture spec as JSON");
  exp->add_option("--family", family, "linear_mixture, witness or knr")->required();
  exp->add_option("--out", out_dir, "output file (stdout when omitted)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kPass : kConfigError;
  }

  try {
    if (*run) return run_command(config_path, seeds, out_dir);
    if (*check) return check_command(config_path, suite, kappa_scale);
    if (*fedim) return fedim_command(table_path, eps, cap);
    if (*exp) return export_command(family, out_dir);
  } catch (const opera::InputError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kRuntimeError;
  }
  return kConfigError;
}
