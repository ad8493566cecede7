#include "opera/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

#include "opera/errors.hpp"
#include "opera/fe_dimension.hpp"

namespace opera {

namespace {

std::string num(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.12g", x);
  return buf;
}

const std::vector<std::string> kFamilies = {"linear_mixture", "bellman", "witness", "knr"};
const std::vector<std::string> kSuites = {"decomposability", "abc", "policy_loss", "fedim", "all"};

OperatingMode parse_mode(const std::string& s) {
  if (s == "q" || s == "Q" || s == "q_type") return OperatingMode::kQType;
  if (s == "v" || s == "V" || s == "v_type") return OperatingMode::kVType;
  throw InputError("config: mode must be q or v, got " + s);
}

double quantile(std::vector<double> values, double q) {
  std::sort(values.begin(), values.end());
  const double pos = q * (values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (pos - lo) * (values[hi] - values[lo]);
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write " + path.string());
  out << text;
}

}  // namespace

ExperimentConfig parse_config(const Json& j) {
  if (!j.is_object()) throw InputError("config: expected a JSON object");
  ExperimentConfig cfg;
  cfg.source = j;
  try {
    if (j.contains("instance")) {
      const auto& in = j.at("instance");
      auto& ic = cfg.instance;
      ic.family = in.value("family", ic.family);
      if (std::find(kFamilies.begin(), kFamilies.end(), ic.family) == kFamilies.end()) {
        throw InputError("config: unknown instance family " + ic.family);
      }
      ic.fixture = in.value("fixture", std::string{});
      ic.random = in.value("random", false);
      ic.seed = in.value("seed", ic.seed);
      ic.dim = in.value("dim", ic.dim);
      ic.horizon = in.value("horizon", ic.horizon);
      ic.num_states = in.value("num_states", ic.num_states);
      ic.num_actions = in.value("num_actions", ic.num_actions);
      ic.resolution = in.value("resolution", ic.resolution);
      ic.class_size = in.value("class_size", ic.class_size);
      ic.sigma = in.value("sigma", ic.sigma);
      if (in.contains("planning_budget")) ic.planning_budget = in.at("planning_budget").get<int>();
      if (in.contains("value_rollouts")) ic.value_rollouts = in.at("value_rollouts").get<int>();
    }
    if (j.contains("opera")) {
      const auto& op = j.at("opera");
      auto& oc = cfg.opera;
      oc.episodes = op.value("episodes", oc.episodes);
      oc.delta = op.value("delta", oc.delta);
      oc.c = op.value("c", oc.c);
      if (op.contains("beta") && !(op.at("beta").is_string() && op.at("beta") == "default")) {
        oc.beta = op.at("beta").get<double>();
      }
      const std::string mode = op.value("mode", std::string{"auto"});
      if (mode != "auto") cfg.mode = parse_mode(mode);
    }
    cfg.confidence = j.value("confidence", cfg.confidence);
    if (cfg.confidence != "enumerated" && cfg.confidence != "closed_form") {
      throw InputError("config: confidence must be enumerated or closed_form");
    }
    if (j.contains("seed_list")) {
      cfg.seeds = j.at("seed_list").get<std::vector<std::uint64_t>>();
    } else if (j.contains("seeds")) {
      const int n = j.at("seeds").get<int>();
      if (n < 1) throw InputError("config: seeds must be at least 1");
      cfg.seeds.clear();
      for (int i = 1; i <= n; ++i) cfg.seeds.push_back(static_cast<std::uint64_t>(i));
    }
    if (cfg.seeds.empty()) throw InputError("config: need at least one seed");
    cfg.output_dir = j.value("output_dir", std::string{});
    if (j.contains("checkers")) cfg.checkers = j.at("checkers").get<std::vector<std::string>>();
    for (const auto& c : cfg.checkers) {
      if (std::find(kSuites.begin(), kSuites.end(), c) == kSuites.end()) {
        throw InputError("config: unknown checker suite " + c);
      }
    }
    cfg.kappa_scale = j.value("kappa_scale", 1.0);
    cfg.svg = j.value("svg", true);
    cfg.sample_complexity_eps = j.value("sample_complexity_eps", cfg.sample_complexity_eps);
    cfg.fedim_eps = j.value("fedim_eps", cfg.fedim_eps);
    cfg.threads = j.value("threads", 0);
  } catch (const Json::exception& e) {
    throw InputError(std::string("config: ") + e.what());
  }
  cfg.opera.validate();
  if (cfg.kappa_scale <= 0.0) throw InputError("config: kappa_scale must be positive");
  if (cfg.threads < 0) throw InputError("config: threads must be nonnegative");
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  ExperimentConfig cfg = parse_config(read_json_file(path));
  // Fixture paths are relative to the config file.
  if (!cfg.instance.fixture.empty() && std::filesystem::path(cfg.instance.fixture).is_relative()) {
    const auto base = std::filesystem::path(path).parent_path();
    const auto candidate = base / cfg.instance.fixture;
    if (std::filesystem::exists(candidate)) cfg.instance.fixture = candidate.string();
  }
  return cfg;
}

BuiltInstance build_instance(const InstanceConfig& ic, bool run_checks) {
  BuiltInstance built;
  Rng rng(ic.seed);
  if (ic.family == "knr") {
    KnrSpec spec;
    if (!ic.fixture.empty()) {
      spec = knr_spec_from_json(read_json_file(ic.fixture));
    } else if (ic.random) {
      spec = random_knr_spec(ic.dim, ic.dim, ic.horizon, ic.sigma, rng);
    } else {
      spec = canonical_knr_spec();
    }
    if (ic.planning_budget) spec.planning_budget = *ic.planning_budget;
    if (ic.value_rollouts) spec.value_rollouts = *ic.value_rollouts;
    KnrCheckOptions checks;
    checks.run = run_checks;
    auto bundle = make_knr(std::move(spec), checks);
    built.knr = std::move(bundle.instance);
    built.construction_checks = std::move(bundle.construction_checks);
    return built;
  }
  if (ic.family == "witness") {
    WitnessSpec spec = !ic.fixture.empty() ? witness_spec_from_json(read_json_file(ic.fixture))
                       : ic.random ? random_witness_spec(ic.num_states, ic.num_actions, ic.horizon,
                                                         ic.class_size, rng)
                                   : canonical_witness_spec();
    built.tabular = make_witness(spec);
  } else {
    LinearMixtureSpec spec =
        !ic.fixture.empty() ? linear_mixture_spec_from_json(read_json_file(ic.fixture))
        : ic.random ? random_linear_mixture_spec(ic.dim, ic.horizon, ic.num_states, ic.num_actions,
                                                 ic.resolution, rng)
                    : canonical_linear_mixture_spec();
    built.tabular = ic.family == "bellman" ? make_bellman_instance(spec) : make_linear_mixture(spec);
  }
  built.construction_checks = built.tabular->construction_checks;
  return built;
}

RunLog run_seed(const BuiltInstance& instance, const ExperimentConfig& config, std::uint64_t seed) {
  OperaConfig oc = config.opera;
  oc.seed = seed;
  if (instance.knr) {
    const KnrInstance& knr = *instance.knr;
    const auto& spec = knr.spec();
    oc.mode = config.mode.value_or(OperatingMode::kQType);
    const double beta = oc.beta ? *oc.beta
                                : beta_knr(oc.episodes, spec.horizon, spec.sigma, spec.feature_dim,
                                           spec.state_dim, oc.delta, oc.c);
    const auto form = config.confidence == "closed_form" ? KnrConstraintForm::kMatrix
                                                         : KnrConstraintForm::kFiniteClass;
    KnrConfidence conf(knr, form, 1e-8, knr.clip_radius(oc.episodes, oc.delta));
    RunLog log = opera_run(knr.problem(), conf, oc, beta);
    log.clip_events = conf.clip_events();
    return log;
  }
  const TabularInstance& inst = *instance.tabular;
  oc.mode = config.mode.value_or(inst.mode());
  const double beta = oc.beta ? *oc.beta : default_beta(inst, oc.episodes, oc.delta, oc.c);
  auto conf = make_confidence(inst, config.confidence == "closed_form");
  return opera_run(make_problem(inst), *conf, oc, beta);
}

std::string run_log_csv(const RunLog& log) {
  std::ostringstream out;
  out << "episode,selected_index,value_optimistic,value_actual,regret,cum_regret,fstar_feasible,"
         "max_constraint_lhs\n";
  for (const auto& e : log.episodes) {
    out << e.episode << ',' << e.selected << ',' << num(e.value_optimistic) << ','
        << num(e.value_actual) << ',' << num(e.regret) << ',' << num(e.cum_regret) << ','
        << (e.fstar_feasible ? 1 : 0) << ',' << num(e.max_constraint_lhs) << '\n';
  }
  return out.str();
}

std::string aggregate_csv(const AggregateReport& report) {
  std::ostringstream out;
  out << "episode,mean_cum_regret,q10_cum_regret,q50_cum_regret,q90_cum_regret,"
         "mean_per_episode_regret\n";
  for (std::size_t i = 0; i < report.mean_cum_regret.size(); ++i) {
    const int t = static_cast<int>(i) + 1;
    out << t << ',' << num(report.mean_cum_regret[i]) << ',' << num(report.q10[i]) << ','
        << num(report.q50[i]) << ',' << num(report.q90[i]) << ','
        << num(report.mean_cum_regret[i] / t) << '\n';
  }
  return out.str();
}

std::string regret_svg(const AggregateReport& report) {
  const double width = 640;
  const double height = 400;
  const double margin = 50;
  const auto& y = report.mean_cum_regret;
  const double ymax = y.empty() ? 1.0 : std::max(1e-12, *std::max_element(y.begin(), y.end()));
  const double n = std::max<double>(1.0, static_cast<double>(y.size()));
  std::ostringstream out;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
      << "\">\n";
  out << "<line x1=\"" << margin << "\" y1=\"" << height - margin << "\" x2=\"" << width - margin
      << "\" y2=\"" << height - margin << "\" stroke=\"black\"/>\n";
  out << "<line x1=\"" << margin << "\" y1=\"" << margin << "\" x2=\"" << margin << "\" y2=\""
      << height - margin << "\" stroke=\"black\"/>\n";
  out << "<text x=\"" << width / 2 << "\" y=\"" << height - 15 << "\">episode (" << y.size()
      << ")</text>\n";
  out << "<text x=\"10\" y=\"" << margin - 15 << "\">mean cumulative regret (max " << num(ymax)
      << ")</text>\n";
  out << "<polyline fill=\"none\" stroke=\"blue\" points=\"";
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double px = margin + (width - 2 * margin) * (static_cast<double>(i) + 1) / n;
    const double py = height - margin - (height - 2 * margin) * y[i] / ymax;
    out << num(px) << ',' << num(py) << (i + 1 < y.size() ? " " : "");
  }
  out << "\"/>\n</svg>\n";
  return out.str();
}

int worker_count(int requested, int jobs) {
  int n = requested > 0 ? requested : static_cast<int>(std::thread::hardware_concurrency());
  if (const char* env = std::getenv("OPERA_THREADS")) {
    const int cap = std::atoi(env);
    if (cap > 0) n = std::min(n, cap);
  }
  return std::max(1, std::min(n, jobs));
}

AggregateReport run_experiment(const ExperimentConfig& config) {
  return run_experiment(build_instance(config.instance), config);
}

AggregateReport run_experiment(const BuiltInstance& instance, const ExperimentConfig& config) {
  const int n = static_cast<int>(config.seeds.size());
  std::vector<SeedSummary> summaries(n);
  std::vector<std::optional<RunLog>> logs(n);
  std::atomic<int> next{0};
  auto worker = [&]() {
    for (int i = next++; i < n; i = next++) {
      auto& sum = summaries[i];
      sum.seed = config.seeds[i];
      try {
        RunLog log = run_seed(instance, config, sum.seed);
        sum.ok = true;
        sum.beta = log.beta;
        sum.final_cum_regret = log.cumulative_regret(static_cast<int>(log.episodes.size()));
        sum.fstar_always_feasible = log.fstar_always_feasible();
        sum.optimism_violations = log.optimism_violations;
        sum.clip_events = log.clip_events;
        sum.sample_complexity = log.sample_complexity(config.sample_complexity_eps);
        logs[i] = std::move(log);
      } catch (const std::exception& e) {
        sum.ok = false;
        sum.error = e.what();
      }
    }
  };
  const int workers = worker_count(config.threads, n);
  std::vector<std::thread> pool;
  for (int w = 1; w < workers; ++w) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  AggregateReport report;
  report.seeds = summaries;
  for (int i = 0; i < n; ++i) {
    if (logs[i]) {
      report.logs.push_back(std::move(*logs[i]));
    } else {
      ++report.failed;
    }
  }
  const int T = config.opera.episodes;
  if (!report.logs.empty()) {
    report.mean_cum_regret.assign(T, 0.0);
    report.q10.resize(T);
    report.q50.resize(T);
    report.q90.resize(T);
    std::vector<double> column(report.logs.size());
    for (int t = 0; t < T; ++t) {
      for (std::size_t k = 0; k < report.logs.size(); ++k) column[k] = report.logs[k].episodes[t].cum_regret;
      double total = 0.0;
      for (const double c : column) total += c;
      report.mean_cum_regret[t] = total / column.size();
      report.q10[t] = quantile(column, 0.1);
      report.q50[t] = quantile(column, 0.5);
      report.q90[t] = quantile(column, 0.9);
    }
    int feasible = 0;
    std::vector<double> reached;
    for (const auto& s : summaries) {
      if (!s.ok) continue;
      if (s.fstar_always_feasible) ++feasible;
      if (s.sample_complexity) reached.push_back(*s.sample_complexity);
    }
    report.feasibility_frequency = static_cast<double>(feasible) / report.logs.size();
    report.sample_complexity_reached = static_cast<int>(reached.size());
    if (!reached.empty()) report.sample_complexity = quantile(reached, 0.5);
  }

  if (!config.output_dir.empty()) {
    namespace fs = std::filesystem;
    const fs::path dir(config.output_dir);
    fs::create_directories(dir);
    std::size_t k = 0;
    double recomputed = 0.0;
    for (auto& s : report.seeds) {
      if (!s.ok) continue;
      const auto path = dir / ("seed_" + std::to_string(s.seed) + ".csv");
      write_text(path, run_log_csv(report.logs[k++]));
      s.csv_path = path.string();
      // Read the final cumulative regret back from the file just written.
      std::ifstream in(path);
      std::string line;
      std::string last;
      while (std::getline(in, line)) last = line;
      std::stringstream fields(last);
      std::string field;
      for (int c = 0; c < 6 && std::getline(fields, field, ','); ++c) {
      }
      recomputed += std::stod(field);
    }
    write_text(dir / "aggregate.csv", aggregate_csv(report));
    if (config.svg) write_text(dir / "regret.svg", regret_svg(report));

    Json seeds = Json::array();
    for (const auto& s : report.seeds) {
      Json js{{"seed", s.seed}, {"ok", s.ok}};
      if (s.ok) {
        js["beta"] = s.beta;
        js["final_cum_regret"] = s.final_cum_regret;
        js["fstar_always_feasible"] = s.fstar_always_feasible;
        js["optimism_violations"] = s.optimism_violations;
        js["clip_events"] = s.clip_events;
        js["sample_complexity"] = s.sample_complexity ? Json(*s.sample_complexity) : Json(nullptr);
        js["csv"] = fs::path(s.csv_path).filename().string();
      } else {
        js["error"] = s.error;
      }
      seeds.push_back(js);
    }
    Json summary{{"config", config.source},
                 {"seeds", seeds},
                 {"failed_seeds", report.failed},
                 {"successful_seeds", report.logs.size()},
                 {"feasibility_frequency", report.feasibility_frequency},
                 {"sample_complexity_eps", config.sample_complexity_eps},
                 {"sample_complexity_median",
                  report.sample_complexity ? Json(*report.sample_complexity) : Json(nullptr)},
                 {"sample_complexity_reached", report.sample_complexity_reached}};
    if (!report.mean_cum_regret.empty()) {
      const double mean_final = report.mean_cum_regret.back();
      summary["mean_final_cum_regret"] = mean_final;
      summary["csv_cross_check"] =
          std::abs(recomputed / report.logs.size() - mean_final) <= 1e-9 * std::max(1.0, mean_final);
    }
    write_text(dir / "summary.json", summary.dump(2) + "\n");
  }
  return report;
}

bool CheckSuiteReport::passed() const {
  return std::all_of(checks.begin(), checks.end(), [](const CheckReport& c) { return c.passed; });
}

Json CheckSuiteReport::to_json() const {
  Json items = Json::array();
  for (const auto& c : checks) {
    items.push_back(Json{{"name", c.name},
                         {"passed", c.passed},
                         {"max_violation", c.max_violation},
                         {"probes", c.probes},
                         {"detail", c.detail}});
  }
  return Json{{"passed", passed()}, {"checks", items}};
}

CheckSuiteReport run_checkers(const ExperimentConfig& config) {
  return run_checkers(build_instance(config.instance, false), config);
}

CheckSuiteReport run_checkers(const BuiltInstance& instance, const ExperimentConfig& config) {
  CheckSuiteReport out;
  auto wants = [&](const std::string& suite) {
    return std::find(config.checkers.begin(), config.checkers.end(), suite) != config.checkers.end() ||
           std::find(config.checkers.begin(), config.checkers.end(), "all") != config.checkers.end();
  };
  if (instance.knr) {
    const KnrInstance& knr = *instance.knr;
    KnrCheckOptions options;
    if (wants("decomposability")) {
      const KnrDef def(knr, knr.clip_radius(1000, 0.1));
      out.checks.push_back(check_knr_decomposability(knr, def, 2000, options.seed, 1e-10));
    }
    if (wants("abc")) {
      const KnrCoupling coupling(knr, options.coupling_rollouts, options.seed + 1);
      out.checks.push_back(check_knr_dominating_average(knr, coupling, 1e-8));
      out.checks.push_back(check_knr_bellman_dominance(knr, coupling, options.bellman_rollouts,
                                                       options.seed + 2, config.kappa_scale));
    }
    return out;
  }
  const TabularInstance& inst = *instance.tabular;
  const TabularMdp& env = *inst.env;
  if (wants("decomposability")) {
    out.checks.push_back(check_decomposability(*inst.def, env, 1e-10));
    out.checks.push_back(check_global_discriminator_optimality(*inst.def, env, 1e-10));
  }
  if (wants("abc")) {
    out.checks.push_back(check_dominating_average(*inst.def, inst.coupling, env, 1e-8));
    CouplingFunction scaled = inst.coupling;
    scaled.kappa *= config.kappa_scale;
    out.checks.push_back(check_bellman_dominance(scaled, *inst.hypotheses, env, 1e-8));
    if (inst.coupling.bilinear()) {
      out.checks.push_back(
          check_bilinear_factorization(inst.coupling, env.horizon(), inst.hypotheses->size(), 1e-10));
    }
  }
  if (wants("policy_loss")) {
    out.checks.push_back(check_policy_loss_decomposition(*inst.hypotheses, env, 1e-10));
  }
  if (wants("fedim")) {
    const int n = std::min(inst.hypotheses->size(), 16);
    std::vector<Hypothesis> items(inst.hypotheses->items().begin(),
                                  inst.hypotheses->items().begin() + n);
    const HypothesisClass subset(std::move(items));
    out.checks.push_back(verify_fe_le_be(subset, env, config.fedim_eps).report);
    if (inst.coupling.bilinear()) {
      for (int h = 0; h < env.horizon(); ++h) {
        std::vector<Vector> w;
        std::vector<Vector> x;
        for (int f = 0; f < n; ++f) {
          w.push_back(inst.coupling.w(h, f));
          x.push_back(inst.coupling.x(h, f));
        }
        auto cmp = verify_bilinear_le_effdim(w, x, config.fedim_eps);
        cmp.report.name += "/h" + std::to_string(h);
        out.checks.push_back(cmp.report);
      }
    }
  }
  return out;
}

}  // namespace opera
