#include "opera/serialization.hpp"

#include <fstream>

#include "opera/errors.hpp"

namespace opera {

namespace {

Json vector_json(const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Vector vector_from(const Json& j) {
  const auto values = j.get<std::vector<double>>();
  return Eigen::Map<const Vector>(values.data(), static_cast<Eigen::Index>(values.size()));
}

Json matrix_json(const Matrix& m) {
  Json rows = Json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) rows.push_back(vector_json(m.row(i).transpose()));
  return rows;
}

Matrix matrix_from(const Json& j) {
  if (!j.is_array() || j.empty()) throw InputError("expected a nonempty matrix");
  const auto rows = static_cast<Eigen::Index>(j.size());
  const auto cols = static_cast<Eigen::Index>(j[0].size());
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    if (static_cast<Eigen::Index>(j[i].size()) != cols) throw InputError("ragged matrix");
    for (Eigen::Index k = 0; k < cols; ++k) m(i, k) = j[i][k].get<double>();
  }
  return m;
}

template <class T, class F>
std::vector<T> list_from(const Json& j, F convert) {
  std::vector<T> out;
  for (const auto& e : j) out.push_back(convert(e));
  return out;
}

}  // namespace

Json to_json(const TabularMdp& env) {
  const int H = env.horizon();
  const int S = env.num_states();
  const int A = env.num_actions();
  Json P = Json::array();
  Json r = Json::array();
  for (int h = 0; h < H; ++h) {
    Json ph = Json::array();
    for (int s = 0; s < S; ++s) {
      Json ps = Json::array();
      for (int a = 0; a < A; ++a) ps.push_back(vector_json(env.next_distribution(h, s, a).transpose()));
      ph.push_back(ps);
    }
    P.push_back(ph);
    r.push_back(matrix_json(env.reward_matrix(h)));
  }
  return Json{{"H", H}, {"num_states", S}, {"num_actions", A}, {"P", P}, {"r", r},
              {"s1", env.initial_state()}};
}

TabularMdp tabular_mdp_from_json(const Json& j) {
  try {
    const int H = j.at("H").get<int>();
    const int S = j.at("num_states").get<int>();
    const int A = j.at("num_actions").get<int>();
    if (H < 1 || S < 1 || A < 1) throw InputError("tabular MDP sizes must be positive");
    const auto& P = j.at("P");
    const auto& r = j.at("r");
    if (static_cast<int>(P.size()) != H || static_cast<int>(r.size()) != H) {
      throw InputError("tabular MDP: P and r need one entry per step");
    }
    std::vector<Matrix> transitions(H, Matrix::Zero(S * A, S));
    std::vector<Matrix> rewards(H);
    for (int h = 0; h < H; ++h) {
      if (static_cast<int>(P[h].size()) != S) throw InputError("tabular MDP: P has the wrong shape");
      for (int s = 0; s < S; ++s) {
        if (static_cast<int>(P[h][s].size()) != A) throw InputError("tabular MDP: P has the wrong shape");
        for (int a = 0; a < A; ++a) {
          const Vector row = vector_from(P[h][s][a]);
          if (row.size() != S) throw InputError("tabular MDP: P has the wrong shape");
          transitions[h].row(s * A + a) = row.transpose();
        }
      }
      rewards[h] = matrix_from(r[h]);
    }
    return TabularMdp(H, S, A, std::move(transitions), std::move(rewards), j.value("s1", 0));
  } catch (const Json::exception& e) {
    throw InputError(std::string("tabular MDP JSON: ") + e.what());
  }
}

Json to_json(const LinearMixtureSpec& spec) {
  const auto& ft = spec.features;
  Json phi = Json::array();
  for (const auto& v : ft.phi) phi.push_back(vector_json(v));
  Json psi = Json::array();
  for (const auto& v : ft.psi) psi.push_back(vector_json(v));
  Json star = Json::array();
  for (const auto& v : spec.theta_star) star.push_back(vector_json(v));
  Json grid = Json::array();
  for (const auto& g : spec.theta_grid) {
    Json gh = Json::array();
    for (const auto& v : g) gh.push_back(vector_json(v));
    grid.push_back(gh);
  }
  return Json{{"family", "linear_mixture"},
              {"H", spec.horizon},
              {"s1", spec.initial_state},
              {"dim", ft.dim},
              {"num_states", ft.num_states},
              {"num_actions", ft.num_actions},
              {"phi", phi},
              {"psi", psi},
              {"theta_star", star},
              {"theta_grid", grid}};
}

LinearMixtureSpec linear_mixture_spec_from_json(const Json& j) {
  try {
    LinearMixtureSpec spec;
    spec.horizon = j.at("H").get<int>();
    spec.initial_state = j.value("s1", 0);
    auto& ft = spec.features;
    ft.dim = j.at("dim").get<int>();
    ft.num_states = j.at("num_states").get<int>();
    ft.num_actions = j.at("num_actions").get<int>();
    ft.phi = list_from<Vector>(j.at("phi"), vector_from);
    ft.psi = list_from<Vector>(j.at("psi"), vector_from);
    spec.theta_star = list_from<Vector>(j.at("theta_star"), vector_from);
    for (const auto& g : j.at("theta_grid")) spec.theta_grid.push_back(list_from<Vector>(g, vector_from));
    return spec;
  } catch (const Json::exception& e) {
    throw InputError(std::string("linear mixture JSON: ") + e.what());
  }
}

Json to_json(const WitnessSpec& spec) {
  Json alternatives = Json::array();
  for (const auto& m : spec.alternatives) alternatives.push_back(to_json(m));
  return Json{{"family", "witness"},
              {"truth", to_json(spec.truth)},
              {"alternatives", alternatives},
              {"discriminator_bound", spec.discriminator_bound},
              {"kappa", spec.kappa}};
}

WitnessSpec witness_spec_from_json(const Json& j) {
  try {
    WitnessSpec spec{tabular_mdp_from_json(j.at("truth")), {}, j.value("discriminator_bound", 1.0),
                     j.value("kappa", 1.0)};
    for (const auto& m : j.at("alternatives")) spec.alternatives.push_back(tabular_mdp_from_json(m));
    return spec;
  } catch (const Json::exception& e) {
    throw InputError(std::string("witness JSON: ") + e.what());
  }
}

Json to_json(const KnrSpec& spec) {
  Json bias = Json::array();
  for (const auto& b : spec.action_bias) bias.push_back(vector_json(b));
  Json star = Json::array();
  for (const auto& u : spec.u_star) star.push_back(matrix_json(u));
  Json grid = Json::array();
  for (const auto& g : spec.u_grid) {
    Json gh = Json::array();
    for (const auto& u : g) gh.push_back(matrix_json(u));
    grid.push_back(gh);
  }
  Json j{{"family", "knr"},
         {"state_dim", spec.state_dim},
         {"feature_dim", spec.feature_dim},
         {"num_actions", spec.num_actions},
         {"H", spec.horizon},
         {"sigma", spec.sigma},
         {"feature_weights", matrix_json(spec.feature_weights)},
         {"action_bias", bias},
         {"feature_scale", spec.feature_scale},
         {"feature_bound", spec.feature_bound},
         {"initial_state", vector_json(spec.initial_state)},
         {"linear_reward", spec.linear_reward},
         {"goal_width", spec.goal_width},
         {"reward_offset", spec.reward_offset},
         {"u_star", star},
         {"u_grid", grid},
         {"planning_budget", spec.planning_budget},
         {"planning_seed", spec.planning_seed},
         {"value_rollouts", spec.value_rollouts},
         {"value_seed", spec.value_seed},
         {"clip_constant", spec.clip_constant}};
  if (spec.goal.size() > 0) j["goal"] = vector_json(spec.goal);
  if (spec.reward_weights.size() > 0) j["reward_weights"] = vector_json(spec.reward_weights);
  return j;
}

KnrSpec knr_spec_from_json(const Json& j) {
  try {
    KnrSpec spec;
    spec.state_dim = j.at("state_dim").get<int>();
    spec.feature_dim = j.at("feature_dim").get<int>();
    spec.num_actions = j.at("num_actions").get<int>();
    spec.horizon = j.at("H").get<int>();
    spec.sigma = j.at("sigma").get<double>();
    spec.feature_weights = matrix_from(j.at("feature_weights"));
    spec.action_bias = list_from<Vector>(j.at("action_bias"), vector_from);
    spec.feature_scale = j.value("feature_scale", 1.0);
    spec.feature_bound = j.value("feature_bound", 0.0);
    spec.initial_state = vector_from(j.at("initial_state"));
    spec.linear_reward = j.value("linear_reward", false);
    spec.goal_width = j.value("goal_width", 1.0);
    spec.reward_offset = j.value("reward_offset", 0.0);
    if (j.contains("goal")) spec.goal = vector_from(j.at("goal"));
    if (j.contains("reward_weights")) spec.reward_weights = vector_from(j.at("reward_weights"));
    spec.u_star = list_from<Matrix>(j.at("u_star"), matrix_from);
    for (const auto& g : j.at("u_grid")) spec.u_grid.push_back(list_from<Matrix>(g, matrix_from));
    spec.planning_budget = j.value("planning_budget", 2048);
    spec.planning_seed = j.value("planning_seed", std::uint64_t{11});
    spec.value_rollouts = j.value("value_rollouts", 10000);
    spec.value_seed = j.value("value_seed", std::uint64_t{13});
    spec.clip_constant = j.value("clip_constant", 1.0);
    return spec;
  } catch (const Json::exception& e) {
    throw InputError(std::string("KNR JSON: ") + e.what());
  }
}

Json hypothesis_manifest(const TabularInstance& instance) {
  const auto& cls = *instance.hypotheses;
  const int s1 = instance.env->initial_state();
  Json items = Json::array();
  for (const auto& f : cls.items()) {
    Json item{{"id", f.id}, {"initial_value", f.initial_value(s1)}, {"greedy", f.greedy}};
    if (const auto* m = f.mixture()) {
      Json theta = Json::array();
      for (const auto& t : m->theta) theta.push_back(vector_json(t));
      item["theta"] = theta;
    }
    if (const auto* model = f.model()) item["model"] = to_json(*model);
    items.push_back(item);
  }
  return Json{{"family", instance.family},
              {"optimal_index", instance.optimal_index},
              {"kappa", instance.kappa},
              {"tightest_kappa", instance.tightest_kappa},
              {"hypotheses", items}};
}

Json coupling_table_json(const Matrix& table) { return Json{{"table", matrix_json(table)}}; }

Matrix coupling_table_from_json(const Json& j) {
  try {
    return matrix_from(j.is_object() ? j.at("table") : j);
  } catch (const Json::exception& e) {
    throw InputError(std::string("coupling table JSON: ") + e.what());
  }
}

Json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path);
  try {
    return Json::parse(in);
  } catch (const Json::exception& e) {
    throw InputError("invalid JSON in " + path + ": " + e.what());
  }
}

void write_json_file(const std::string& path, const Json& j) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write " + path);
  out << j.dump(2) << "\n";
}

}  // namespace opera
