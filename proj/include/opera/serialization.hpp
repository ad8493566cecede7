#pragma once

#include <string>

#include "json.hpp"
#include "opera/instances.hpp"
#include "opera/knr.hpp"
#include "opera/mdp.hpp"

namespace opera {

using Json = nlohmann::json;

// {H, num_states, num_actions, P[h][s][a][s'], r[h][s][a], s1}
Json to_json(const TabularMdp& env);
TabularMdp tabular_mdp_from_json(const Json& j);

Json to_json(const LinearMixtureSpec& spec);
LinearMixtureSpec linear_mixture_spec_from_json(const Json& j);

Json to_json(const WitnessSpec& spec);
WitnessSpec witness_spec_from_json(const Json& j);

Json to_json(const KnrSpec& spec);
KnrSpec knr_spec_from_json(const Json& j);

// Hypothesis manifest: initial values, greedy actions and parameters.
Json hypothesis_manifest(const TabularInstance& instance);

// Coupling table for one step, rows = witnesses g, columns = sequence f.
Json coupling_table_json(const Matrix& table);
Matrix coupling_table_from_json(const Json& j);

Json read_json_file(const std::string& path);
void write_json_file(const std::string& path, const Json& j);

}  // namespace opera
