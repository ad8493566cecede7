#include "opera/hypothesis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include "opera/errors.hpp"

namespace opera {

Hypothesis make_value_hypothesis(int id, std::vector<Matrix> q, Payload payload) {
  if (q.empty()) throw InputError("hypothesis needs at least one step");
  Hypothesis f;
  f.id = id;
  const auto S = q[0].rows();
  const int H = static_cast<int>(q.size());
  f.v.assign(H + 1, Vector::Zero(S));
  f.greedy.assign(H, std::vector<int>(S, 0));
  for (int h = 0; h < H; ++h) {
    if (q[h].rows() != S || q[h].cols() != q[0].cols()) {
      throw InputError("hypothesis Q tables must share one shape");
    }
    for (Eigen::Index s = 0; s < S; ++s) {
      const int a = argmax_first(q[h].row(s));
      f.greedy[h][s] = a;
      f.v[h](s) = q[h](s, a);
    }
  }
  f.q = std::move(q);
  f.payload = std::move(payload);
  return f;
}

Hypothesis make_model_hypothesis(int id, TabularMdp model) {
  auto solution = optimal_values(model);
  return make_value_hypothesis(id, std::move(solution.values.q), std::move(model));
}

Policy greedy_policy(const Hypothesis& f, int num_actions) {
  return Policy::deterministic(f.greedy, num_actions);
}

HypothesisClass::HypothesisClass(std::vector<Hypothesis> items, Metric metric)
    : items_(std::move(items)), metric_(metric) {
  for (std::size_t i = 0; i < items_.size(); ++i) {
    items_[i].id = static_cast<int>(i);
    if (items_[i].horizon() != items_.front().horizon()) {
      throw InputError("hypothesis class mixes horizons");
    }
  }
}

double HypothesisClass::log_cardinality() const {
  return items_.empty() ? 0.0 : std::log(static_cast<double>(items_.size()));
}

namespace {

double value_distance(const Hypothesis& a, const Hypothesis& b) {
  double d = 0.0;
  for (int h = 0; h < a.horizon(); ++h) {
    d = std::max(d, (a.q[h] - b.q[h]).cwiseAbs().maxCoeff());
  }
  return d;
}

double parameter_distance(const Hypothesis& a, const Hypothesis& b) {
  if (a.mixture() && b.mixture()) {
    double d = 0.0;
    for (std::size_t h = 0; h < a.mixture()->theta.size(); ++h) {
      d = std::max(d, (a.mixture()->theta[h] - b.mixture()->theta[h]).cwiseAbs().maxCoeff());
    }
    return d;
  }
  if (a.model() && b.model()) {
    double d = 0.0;
    for (int h = 0; h < a.model()->horizon(); ++h) {
      d = std::max(d, (a.model()->transition_matrix(h) - b.model()->transition_matrix(h))
                          .cwiseAbs()
                          .maxCoeff());
      d = std::max(
          d, (a.model()->reward_matrix(h) - b.model()->reward_matrix(h)).cwiseAbs().maxCoeff());
    }
    return d;
  }
  return value_distance(a, b);
}

}  // namespace

double HypothesisClass::distance(int i, int j) const {
  if (i == j) return 0.0;
  return metric_ == Metric::kValueSup ? value_distance(items_[i], items_[j])
                                      : parameter_distance(items_[i], items_[j]);
}

RealizabilityReport check_realizability(const HypothesisClass& cls, const EpisodicMdp& env,
                                        double tol) {
  if (tol < 0.0) throw InputError("check_realizability: negative tolerance");
  const auto* tab = std::get_if<TabularMdp>(&env);
  if (!tab) throw UnsupportedInstance("check_realizability requires a tabular environment");
  const auto opt = optimal_values(*tab);
  RealizabilityReport report;
  report.deviation = std::numeric_limits<double>::infinity();
  for (int i = 0; i < cls.size(); ++i) {
    double dev = 0.0;
    for (int h = 0; h < tab->horizon(); ++h) {
      dev = std::max(dev, (cls[i].q[h] - opt.values.q[h]).cwiseAbs().maxCoeff());
    }
    if (dev < report.deviation) {
      report.deviation = dev;
      report.witness = i;
    }
  }
  report.realizable = report.witness >= 0 && report.deviation <= tol;
  return report;
}

namespace {

// Repeatedly picks the center covering the most uncovered points.
int greedy_cover_size(const std::vector<std::vector<double>>& dist, double eps) {
  const int n = static_cast<int>(dist.size());
  std::vector<bool> covered(n, false);
  int remaining = n;
  int centers = 0;
  while (remaining > 0) {
    int best = -1;
    int best_gain = -1;
    for (int c = 0; c < n; ++c) {
      int gain = 0;
      for (int j = 0; j < n; ++j) {
        if (!covered[j] && dist[c][j] <= eps) ++gain;
      }
      if (gain > best_gain) {
        best_gain = gain;
        best = c;
      }
    }
    for (int j = 0; j < n; ++j) {
      if (!covered[j] && dist[best][j] <= eps) {
        covered[j] = true;
        --remaining;
      }
    }
    ++centers;
  }
  return centers;
}

}  // namespace

double log_covering_number(const HypothesisClass& cls, double eps) {
  if (eps < 0.0 || std::isnan(eps)) throw InputError("log_covering_number: eps must be >= 0");
  const int n = cls.size();
  if (n == 0) return 0.0;
  std::vector<std::vector<double>> dist(n, std::vector<double>(n, 0.0));
  std::set<double> radii{eps};
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      dist[i][j] = dist[j][i] = cls.distance(i, j);
      if (dist[i][j] <= eps) radii.insert(dist[i][j]);
    }
  }
  int best = n;
  for (double r : radii) best = std::min(best, greedy_cover_size(dist, r));
  return std::log(static_cast<double>(best));
}

}  // namespace opera
