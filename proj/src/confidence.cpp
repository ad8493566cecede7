#include "opera/confidence.hpp"

#include <algorithm>
#include <limits>
#include <numeric>

#include "opera/errors.hpp"

namespace opera {

double constraint_lhs(const EstimationFunction& def, int h, int f,
                      const std::vector<HistoryEntry>& history,
                      const std::vector<int>& candidates) {
  if (candidates.empty()) throw InputError("constraint_lhs: empty candidate class");
  const auto& V = def.discriminators();
  if (V.size() > 5'000'000) throw InputError("constraint_lhs: discriminator class too large");
  double best = -std::numeric_limits<double>::infinity();
  for (std::int64_t v = 0; v < V.size(); ++v) {
    auto total = [&](int g) {
      double sum = 0.0;
      for (const auto& e : history) sum += def.squared_norm(h, e.behavior, e.observation, f, g, v);
      return sum;
    };
    double inf = std::numeric_limits<double>::infinity();
    for (int g : candidates) inf = std::min(inf, total(g));
    best = std::max(best, total(f) - inf);
  }
  return best;
}

double constraint_lhs(const EstimationFunction& def, int h, int f,
                      const std::vector<HistoryEntry>& history) {
  std::vector<int> all(def.num_candidates());
  std::iota(all.begin(), all.end(), 0);
  return constraint_lhs(def, h, f, history, all);
}

EnumeratedConfidence::EnumeratedConfidence(std::shared_ptr<const EstimationFunction> def)
    : def_(std::move(def)),
      horizon_(def_->hypotheses().horizon()),
      cells_(def_->uses_discriminator() ? def_->discriminators().num_cells() : 1),
      units_(def_->uses_discriminator() ? def_->discriminators().num_units() : 1),
      nf_(def_->depends_on_next() ? def_->num_hypotheses() : 1),
      ng_(def_->num_candidates()),
      sums_(static_cast<std::size_t>(horizon_) * cells_ * units_ * nf_ * ng_, 0.0),
      counts_(horizon_, 0) {}

std::size_t EnumeratedConfidence::index(int h, int cell, int unit, int fi, int g) const {
  return (((static_cast<std::size_t>(h) * cells_ + cell) * units_ + unit) * nf_ + fi) * ng_ + g;
}

void EnumeratedConfidence::add(int h, const Transition<int>& o, int behavior) {
  const auto& V = def_->discriminators();
  const int cell = def_->uses_discriminator() ? V.cell_of(o.state, o.action) : 0;
  for (int u = 0; u < units_; ++u) {
    const std::int64_t v = def_->uses_discriminator() ? V.element_with(cell, u) : 0;
    for (int fi = 0; fi < nf_; ++fi) {
      double* row = &sums_[index(h, cell, u, fi, 0)];
      for (int g = 0; g < ng_; ++g) row[g] += def_->squared_norm(h, behavior, o, fi, g, v);
    }
  }
  ++counts_[h];
}

double EnumeratedConfidence::lhs(int h, int f) const {
  const int fi = nf_ == 1 ? 0 : f;
  double best = 0.0;  // g = f gives zero in every cell
  for (int g = 0; g < ng_; ++g) {
    if (g == f) continue;
    double total = 0.0;
    for (int c = 0; c < cells_; ++c) {
      double cell_best = -std::numeric_limits<double>::infinity();
      for (int u = 0; u < units_; ++u) {
        const double* row = &sums_[index(h, c, u, fi, 0)];
        cell_best = std::max(cell_best, row[f] - row[g]);
      }
      total += cell_best;
    }
    best = std::max(best, total);
  }
  return best;
}

double RidgeFit::distance(const Matrix& param) const {
  const Matrix delta = param - estimate;
  return (delta * sigma * delta.transpose()).trace();
}

RidgeFit ridge_fit(const Matrix& sigma, const Matrix& cross, double lambda) {
  if (lambda < 0.0) throw InputError("ridge_fit: negative regularization");
  if (sigma.rows() != sigma.cols() || cross.cols() != sigma.rows()) {
    throw InputError("ridge_fit: shape mismatch");
  }
  RidgeFit fit;
  fit.sigma = sigma;
  const Eigen::Index d = sigma.rows();
  if (lambda > 0.0) {
    const Matrix reg = sigma + lambda * Matrix::Identity(d, d);
    fit.estimate = reg.ldlt().solve(cross.transpose()).transpose();
    return fit;
  }
  Eigen::FullPivLU<Matrix> lu(sigma);
  if (lu.rank() == d) {
    fit.estimate = lu.solve(cross.transpose()).transpose();
  } else {
    fit.pseudo_inverse = true;
    Eigen::CompleteOrthogonalDecomposition<Matrix> cod(sigma);
    fit.estimate = cod.solve(cross.transpose()).transpose();
  }
  return fit;
}

RidgeFit ridge_fit_columns(const Matrix& features, const Matrix& targets, double lambda) {
  if (features.cols() != targets.cols()) throw InputError("ridge_fit: sample counts differ");
  return ridge_fit(features * features.transpose(), targets * features.transpose(), lambda);
}

double residual_sum(const Matrix& param, const Matrix& sigma, const Matrix& cross, double yy) {
  return (param * sigma * param.transpose()).trace() - 2.0 * (param * cross.transpose()).trace() +
         yy;
}

LinearMixtureConfidence::LinearMixtureConfidence(std::shared_ptr<const LinearMixtureDef> def,
                                                 double lambda)
    : def_(std::move(def)), lambda_(lambda) {
  const int H = def_->hypotheses().horizon();
  const int d = def_->features().dim;
  sigma_.assign(H, Matrix::Zero(d, d));
  cross_.assign(H, Matrix::Zero(1, d));
  counts_.assign(H, 0);
  cache_.assign(H, {});
  fresh_.assign(H, false);
}

void LinearMixtureConfidence::add(int h, const Transition<int>& o, int behavior) {
  const Vector& x = def_->regressor(h, behavior, o.state, o.action);
  const double y = o.reward + def_->hypotheses()[behavior].v[h + 1](o.next);
  sigma_[h] += x * x.transpose();
  cross_[h] += y * x.transpose();
  ++counts_[h];
  fresh_[h] = false;
}

RidgeFit LinearMixtureConfidence::fit(int h) const { return ridge_fit(sigma_[h], cross_[h], lambda_); }

double LinearMixtureConfidence::lhs(int h, int f) const {
  if (counts_[h] == 0) return 0.0;
  if (!fresh_[h]) {
    const RidgeFit r = fit(h);
    const int n = def_->num_hypotheses();
    cache_[h].assign(n, 0.0);
    for (int g = 0; g < n; ++g) cache_[h][g] = r.distance(def_->theta(h, g).transpose());
    fresh_[h] = true;
  }
  return cache_[h][f];
}

RidgeFit linear_mixture_confidence(const LinearMixtureDef& def, int h,
                                   const std::vector<HistoryEntry>& history, double lambda) {
  const int d = def.features().dim;
  Matrix features(d, static_cast<Eigen::Index>(history.size()));
  Matrix targets(1, static_cast<Eigen::Index>(history.size()));
  for (std::size_t i = 0; i < history.size(); ++i) {
    const auto& e = history[i];
    features.col(i) = def.regressor(h, e.behavior, e.observation.state, e.observation.action);
    targets(0, i) = e.observation.reward + def.hypotheses()[e.behavior].v[h + 1](e.observation.next);
  }
  return ridge_fit_columns(features, targets, lambda);
}

}  // namespace opera
