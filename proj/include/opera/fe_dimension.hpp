#pragma once

#include <vector>

#include "opera/coupling.hpp"
#include "opera/estimation.hpp"
#include "opera/mdp.hpp"

namespace opera {

struct FeResult {
  int dim = 0;
  std::vector<int> sequence;   // f_1 .. f_n (column indices)
  std::vector<int> witnesses;  // g_t certifying step t (entry 0 unused, -1)
  double threshold = 0.0;      // the eps' the sequence is certified at, approached from below
  bool exact = true;
};

// Longest eps'-independent sequence for a coupling table. `table(g, f)`
// holds G(g, f): rows are witnesses, columns are sequence elements.
//
// For every achieved |G| value tau > eps the search uses the limit eps' -> tau
// from below (|G(g, f_t)| >= tau, sum_{i<t} G(g, f_i)^2 < tau^2); these limits
// cover every eps' >= eps. `cap` bounds the sequence length and
// `node_budget` the search size; hitting either clears `exact`.
FeResult fe_dimension(const Matrix& table, double eps, int cap = 12,
                      long long node_budget = 20'000'000);

// table(g, f) = G_h(g, f) over the first n hypotheses.
Matrix coupling_table(const CouplingFunction& coupling, int h, int n);

// Max over steps of the per-step FE dimension.
FeResult fe_dimension(const CouplingFunction& coupling, int horizon, int n, double eps,
                      int cap = 12);

// Eluder dimension of a finite function class on finite points, with
// values(i, x) = f_i(x). Runs the same search with witnesses f_i - f_j.
FeResult eluder_dimension(const Matrix& values, double eps, int cap = 12);

struct EffectiveDimension {
  int value = 0;   // exact value when `exact`, otherwise the upper bound
  bool exact = true;
  int lower = 0;
  int upper = 0;
};

// Smallest n with n > e * sup over multisets {x_1..x_n} of
// log det(I + eps^-2 sum x_i x_i^T). The sup is enumerated while the number
// of multisets stays within `budget`; past that the greedy selection gives a
// lower bound on the sup and the trace bound d log(1 + n B / (d eps^2)) an
// upper bound, which turn into upper and lower bounds on the dimension.
EffectiveDimension effective_dimension(const std::vector<Vector>& points, double eps,
                                       long long budget = 2'000'000);

struct DimensionComparison {
  CheckReport report;
  int left = 0;
  int right = 0;
};

// FE dimension of G_h(g, f) = E_{pi_f}[g_h - T_h g_{h+1}] against the
// distributional eluder dimension of the Bellman residuals over the distinct
// roll-in distributions of the class (the Bellman eluder dimension).
DimensionComparison verify_fe_le_be(const HypothesisClass& cls, const TabularMdp& env, double eps,
                                    int cap = 12);

// FE dimension of <W(a), X(b)> against effective_dimension({X}, eps/sqrt(B)),
// B the largest squared norm among the factors.
DimensionComparison verify_bilinear_le_effdim(const std::vector<Vector>& w,
                                              const std::vector<Vector>& x, double eps,
                                              int cap = 12);

}  // namespace opera
