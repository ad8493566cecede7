#pragma once

#include <cstdint>
#include <memory>
#include <vector>

#include "opera/estimation.hpp"
#include "opera/mdp.hpp"

namespace opera {

// Per-step data D_h and the left-hand side of the confidence constraint
//   max_v { sum_i ||l_{h,f^i}(o^i, f, f, v)||^2 - min_g sum_i ||l_{h,f^i}(o^i, f, g, v)||^2 }.
template <class State>
class ConfidenceSet {
 public:
  virtual ~ConfidenceSet() = default;
  virtual void add(int h, const Transition<State>& o, int behavior) = 0;
  virtual double lhs(int h, int f) const = 0;
  virtual int count(int h) const = 0;
};

struct HistoryEntry {
  Transition<int> observation;
  int behavior = 0;
};

// Brute-force evaluation straight from the raw history: every element of V
// against every listed candidate. Throws InputError for an empty candidate
// list or a discriminator class too large to enumerate.
double constraint_lhs(const EstimationFunction& def, int h, int f,
                      const std::vector<HistoryEntry>& history,
                      const std::vector<int>& candidates);
double constraint_lhs(const EstimationFunction& def, int h, int f,
                      const std::vector<HistoryEntry>& history);

// Incremental version for finite F, G and V. Keeps per-(cell, unit, f, g)
// sums of squared losses; with an assembled discriminator class the max over
// V splits into independent maxima per (s, a) cell.
class EnumeratedConfidence final : public ConfidenceSet<int> {
 public:
  explicit EnumeratedConfidence(std::shared_ptr<const EstimationFunction> def);
  void add(int h, const Transition<int>& o, int behavior) override;
  double lhs(int h, int f) const override;
  int count(int h) const override { return counts_[h]; }

 private:
  std::size_t index(int h, int cell, int unit, int fi, int g) const;
  std::shared_ptr<const EstimationFunction> def_;
  int horizon_;
  int cells_;
  int units_;
  int nf_;
  int ng_;
  std::vector<double> sums_;
  std::vector<int> counts_;
};

// Ridge least squares for targets ~ estimate * feature. Features are the
// columns of a d x n matrix, targets the columns of a k x n matrix. The
// membership distance uses the unregularized Gram matrix Sigma = Phi Phi^T.
struct RidgeFit {
  Matrix estimate;  // k x d
  Matrix sigma;     // d x d
  bool pseudo_inverse = false;

  // tr((P - estimate) Sigma (P - estimate)^T).
  double distance(const Matrix& param) const;
  bool contains(const Matrix& param, double beta) const { return distance(param) <= beta; }
};

// lambda > 0 solves (Sigma + lambda I) W^T = Phi Y^T. lambda == 0 with a
// singular Sigma falls back to the pseudo-inverse and sets the flag.
RidgeFit ridge_fit(const Matrix& sigma, const Matrix& cross, double lambda);
RidgeFit ridge_fit_columns(const Matrix& features, const Matrix& targets, double lambda);

// Sum of squared residuals sum_i ||P x_i - y_i||^2 from sufficient statistics.
double residual_sum(const Matrix& param, const Matrix& sigma, const Matrix& cross, double yy);

// Closed form of the linear mixture constraint: ||theta_f - theta_hat||^2_Sigma
// with regressors psi + phi_{V_{h+1,f^i}} and targets r + V_{h+1,f^i}(s').
class LinearMixtureConfidence final : public ConfidenceSet<int> {
 public:
  LinearMixtureConfidence(std::shared_ptr<const LinearMixtureDef> def, double lambda = 1e-8);
  void add(int h, const Transition<int>& o, int behavior) override;
  double lhs(int h, int f) const override;
  int count(int h) const override { return counts_[h]; }
  RidgeFit fit(int h) const;

 private:
  std::shared_ptr<const LinearMixtureDef> def_;
  double lambda_;
  std::vector<Matrix> sigma_;
  std::vector<Matrix> cross_;  // 1 x d: sum_i y_i x_i^T
  std::vector<int> counts_;
  mutable std::vector<std::vector<double>> cache_;
  mutable std::vector<bool> fresh_;
};

// Linear mixture fit on a raw history for one step.
RidgeFit linear_mixture_confidence(const LinearMixtureDef& def, int h,
                                   const std::vector<HistoryEntry>& history, double lambda);

}  // namespace opera
