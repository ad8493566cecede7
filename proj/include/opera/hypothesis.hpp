#pragma once

#include <optional>
#include <variant>
#include <vector>

#include "opera/mdp.hpp"

namespace opera {

// Per-step parameters of a linear mixture hypothesis.
struct LinearMixtureParams {
  std::vector<Vector> theta;  // [h] in R^d
};

using Payload = std::variant<std::monostate, LinearMixtureParams, TabularMdp>;

// One element of a tabular hypothesis class. V and the greedy policy are
// always derived from Q, so the three stay consistent.
struct Hypothesis {
  int id = 0;
  std::vector<Matrix> q;                 // [h] S x A
  std::vector<Vector> v;                 // [h] S, with v[H] == 0
  std::vector<std::vector<int>> greedy;  // [h][s]
  Payload payload;

  int horizon() const { return static_cast<int>(q.size()); }
  int action(int h, int s) const { return greedy[h][s]; }
  double initial_value(int s1) const { return v[0](s1); }
  const TabularMdp* model() const { return std::get_if<TabularMdp>(&payload); }
  const LinearMixtureParams* mixture() const { return std::get_if<LinearMixtureParams>(&payload); }
};

Hypothesis make_value_hypothesis(int id, std::vector<Matrix> q, Payload payload = {});

// Q_f = Q* of the model, computed by backward induction.
Hypothesis make_model_hypothesis(int id, TabularMdp model);

Policy greedy_policy(const Hypothesis& f, int num_actions);

enum class Metric { kValueSup, kParameterSup };

class HypothesisClass {
 public:
  HypothesisClass() = default;
  explicit HypothesisClass(std::vector<Hypothesis> items, Metric metric = Metric::kValueSup);

  int size() const { return static_cast<int>(items_.size()); }
  bool empty() const { return items_.empty(); }
  const Hypothesis& operator[](int i) const { return items_[i]; }
  const std::vector<Hypothesis>& items() const { return items_; }
  Metric metric() const { return metric_; }
  int horizon() const { return items_.front().horizon(); }
  int num_states() const { return static_cast<int>(items_.front().q[0].rows()); }
  int num_actions() const { return static_cast<int>(items_.front().q[0].cols()); }

  double log_cardinality() const;
  double distance(int i, int j) const;

  std::optional<int> optimal_index() const { return optimal_; }
  void set_optimal_index(int i) { optimal_ = i; }

 private:
  std::vector<Hypothesis> items_;
  Metric metric_ = Metric::kValueSup;
  std::optional<int> optimal_;
};

struct RealizabilityReport {
  bool realizable = false;
  double deviation = 0.0;  // smallest max_{h,s,a} |Q_f - Q*| over the class
  int witness = -1;
};

RealizabilityReport check_realizability(const HypothesisClass& cls, const EpisodicMdp& env,
                                        double tol);

// ln of the size of a greedy eps-cover under the class metric. The greedy
// cover is rerun at every pairwise distance below eps and the smallest
// result kept, which makes the value nonincreasing in eps.
double log_covering_number(const HypothesisClass& cls, double eps);

}  // namespace opera
