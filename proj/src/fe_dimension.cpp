#include "opera/fe_dimension.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "opera/errors.hpp"

namespace opera {

namespace {

class SequenceSearch {
 public:
  SequenceSearch(const Matrix& table, double big, bool big_strict, double sum_cap,
                 bool sum_strict, int cap, long long budget)
      : abs_(table.cwiseAbs()),
        sq_(table.cwiseAbs2()),
        big_(big),
        big_strict_(big_strict),
        sum_cap_(sum_cap),
        sum_strict_(sum_strict),
        cap_(cap),
        budget_(budget),
        partial_(table.rows(), 0.0),
        used_(table.cols(), false) {}

  void run() { dfs(); }
  const std::vector<int>& best() const { return best_; }
  const std::vector<int>& best_witnesses() const { return best_witnesses_; }
  bool truncated() const { return truncated_; }

 private:
  bool big_ok(double v) const { return big_strict_ ? v > big_ : v >= big_; }
  bool sum_ok(double v) const { return sum_strict_ ? v < sum_cap_ : v <= sum_cap_; }

  void dfs() {
    if (++nodes_ > budget_) {
      truncated_ = true;
      return;
    }
    if (sequence_.size() > best_.size()) {
      best_ = sequence_;
      best_witnesses_ = witnesses_;
    }
    std::vector<std::pair<int, int>> candidates;
    for (Eigen::Index f = 0; f < abs_.cols(); ++f) {
      if (used_[f]) continue;
      if (sequence_.empty()) {
        candidates.emplace_back(static_cast<int>(f), -1);
        continue;
      }
      for (Eigen::Index g = 0; g < abs_.rows(); ++g) {
        if (sum_ok(partial_[g]) && big_ok(abs_(g, f))) {
          candidates.emplace_back(static_cast<int>(f), static_cast<int>(g));
          break;
        }
      }
    }
    if (candidates.empty()) return;
    if (static_cast<int>(sequence_.size()) >= cap_) {
      truncated_ = true;
      return;
    }
    // Partial sums only grow, so the candidate set can only shrink.
    if (sequence_.size() + candidates.size() <= best_.size()) return;
    const std::vector<double> saved = partial_;
    for (const auto& [f, g] : candidates) {
      sequence_.push_back(f);
      witnesses_.push_back(g);
      used_[f] = true;
      for (Eigen::Index r = 0; r < sq_.rows(); ++r) partial_[r] += sq_(r, f);
      dfs();
      // Restored rather than subtracted so that ties at the threshold stay exact.
      partial_ = saved;
      used_[f] = false;
      sequence_.pop_back();
      witnesses_.pop_back();
      if (truncated_ && nodes_ > budget_) return;
      if (best_.size() == static_cast<std::size_t>(abs_.cols())) return;
    }
  }

  Matrix abs_;
  Matrix sq_;
  double big_;
  bool big_strict_;
  double sum_cap_;
  bool sum_strict_;
  int cap_;
  long long budget_;
  long long nodes_ = 0;
  bool truncated_ = false;
  std::vector<double> partial_;
  std::vector<bool> used_;
  std::vector<int> sequence_;
  std::vector<int> witnesses_;
  std::vector<int> best_;
  std::vector<int> best_witnesses_;
};

}  // namespace

FeResult fe_dimension(const Matrix& table, double eps, int cap, long long node_budget) {
  if (!(eps > 0.0)) throw InputError("fe_dimension: eps must be positive");
  if (cap < 1) throw InputError("fe_dimension: cap must be at least 1");
  if (!table.allFinite()) throw InputError("fe_dimension: table has non-finite entries");
  FeResult result;
  result.threshold = eps;
  if (table.cols() == 0) return result;
  result.dim = 1;
  result.sequence = {0};
  result.witnesses = {-1};

  std::set<double, std::greater<>> levels;
  for (Eigen::Index i = 0; i < table.size(); ++i) {
    const double v = std::abs(table.data()[i]);
    if (v > eps) levels.insert(v);
  }
  auto consider = [&](double big, bool big_strict, double sum_cap, bool sum_strict, double label) {
    SequenceSearch search(table, big, big_strict, sum_cap, sum_strict, cap, node_budget);
    search.run();
    if (search.truncated()) result.exact = false;
    if (static_cast<int>(search.best().size()) > result.dim) {
      result.dim = static_cast<int>(search.best().size());
      result.sequence = search.best();
      result.witnesses = search.best_witnesses();
      result.threshold = label;
    }
  };
  consider(eps, true, eps * eps, false, eps);
  for (double tau : levels) {
    if (result.dim == table.cols()) break;
    consider(tau, false, tau * tau, true, tau);
  }
  return result;
}

Matrix coupling_table(const CouplingFunction& coupling, int h, int n) {
  Matrix table(n, n);
  for (int g = 0; g < n; ++g) {
    for (int f = 0; f < n; ++f) table(g, f) = coupling(h, g, f);
  }
  return table;
}

FeResult fe_dimension(const CouplingFunction& coupling, int horizon, int n, double eps, int cap) {
  FeResult best;
  for (int h = 0; h < horizon; ++h) {
    FeResult r = fe_dimension(coupling_table(coupling, h, n), eps, cap);
    const bool exact = best.exact && r.exact;
    if (h == 0 || r.dim > best.dim) best = std::move(r);
    best.exact = exact;
  }
  return best;
}

FeResult eluder_dimension(const Matrix& values, double eps, int cap) {
  const Eigen::Index n = values.rows();
  const Eigen::Index pairs = n * (n - 1) / 2;
  Matrix table(std::max<Eigen::Index>(pairs, 1), values.cols());
  table.setZero();
  Eigen::Index row = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) table.row(row++) = values.row(i) - values.row(j);
  }
  return fe_dimension(table, eps, cap);
}

namespace {

double log_det_regularized(const Matrix& gram, double inv_eps2) {
  const Matrix m = Matrix::Identity(gram.rows(), gram.cols()) + inv_eps2 * gram;
  Eigen::LDLT<Matrix> ldlt(m);
  return ldlt.vectorD().array().log().sum();
}

double multiset_count(int m, int n) {
  // C(m + n - 1, n) in floating point.
  double c = 1.0;
  for (int i = 1; i <= n; ++i) c = c * (m - 1 + i) / i;
  return c;
}

void enumerate_multisets(const std::vector<Vector>& pts, int start, int remaining, Matrix& gram,
                         double inv_eps2, double& best) {
  if (remaining == 0) {
    best = std::max(best, log_det_regularized(gram, inv_eps2));
    return;
  }
  for (int i = start; i < static_cast<int>(pts.size()); ++i) {
    const Matrix outer = pts[i] * pts[i].transpose();
    gram += outer;
    enumerate_multisets(pts, i, remaining - 1, gram, inv_eps2, best);
    gram -= outer;
  }
}

}  // namespace

EffectiveDimension effective_dimension(const std::vector<Vector>& points, double eps,
                                       long long budget) {
  if (points.empty()) throw InputError("effective_dimension: empty point set");
  if (!(eps > 0.0)) throw InputError("effective_dimension: eps must be positive");
  const Eigen::Index d = points.front().size();
  std::vector<Vector> pts;
  double max_sq = 0.0;
  for (const auto& x : points) {
    if (x.size() != d) throw InputError("effective_dimension: points differ in dimension");
    max_sq = std::max(max_sq, x.squaredNorm());
    const bool seen = std::any_of(pts.begin(), pts.end(), [&](const Vector& y) {
      return (x - y).cwiseAbs().maxCoeff() <= 1e-14;
    });
    if (!seen) pts.push_back(x);
  }
  const double inv_eps2 = 1.0 / (eps * eps);
  const int m = static_cast<int>(pts.size());
  constexpr double kE = 2.718281828459045;

  EffectiveDimension out;
  out.lower = 0;
  Matrix greedy_gram = Matrix::Zero(d, d);
  for (int n = 1; n <= 1'000'000; ++n) {
    // Greedy multiset grows by one point per n.
    int pick = 0;
    double pick_val = -1.0;
    for (int i = 0; i < m; ++i) {
      const double v = log_det_regularized(greedy_gram + pts[i] * pts[i].transpose(), inv_eps2);
      if (v > pick_val) {
        pick_val = v;
        pick = i;
      }
    }
    greedy_gram += pts[pick] * pts[pick].transpose();

    double lo = pick_val;
    double hi;
    if (multiset_count(m, n) <= static_cast<double>(budget)) {
      Matrix gram = Matrix::Zero(d, d);
      double best = 0.0;
      enumerate_multisets(pts, 0, n, gram, inv_eps2, best);
      lo = hi = best;
    } else {
      const double k = static_cast<double>(std::min<Eigen::Index>(d, n));
      hi = k * std::log1p(n * max_sq * inv_eps2 / k);
      hi = std::max(hi, lo);
    }
    if (out.lower == 0 && n > kE * lo) out.lower = n;
    if (n > kE * hi) {
      out.upper = n;
      break;
    }
  }
  if (out.upper == 0) throw InputError("effective_dimension: no n found below the search limit");
  out.exact = out.lower == out.upper;
  out.value = out.upper;
  return out;
}

DimensionComparison verify_fe_le_be(const HypothesisClass& cls, const TabularMdp& env, double eps,
                                    int cap) {
  DimensionComparison out;
  out.report.name = "fe_le_be";
  auto shared = std::make_shared<const HypothesisClass>(cls);
  const auto coupling = make_bellman_coupling(shared, env);
  const int n = cls.size();
  bool exact = true;
  for (int h = 0; h < env.horizon(); ++h) {
    const Matrix fe_table = coupling_table(coupling, h, n);
    // Distributional eluder dimension over distinct roll-in distributions.
    std::vector<Vector> dists;
    for (int f = 0; f < n; ++f) {
      const Vector x = coupling.x(h, f);
      const bool seen = std::any_of(dists.begin(), dists.end(), [&](const Vector& y) {
        return (x - y).cwiseAbs().maxCoeff() <= 1e-14;
      });
      if (!seen) dists.push_back(x);
    }
    Matrix be_table(n, static_cast<Eigen::Index>(dists.size()));
    for (int g = 0; g < n; ++g) {
      for (std::size_t j = 0; j < dists.size(); ++j) be_table(g, j) = coupling.w(h, g).dot(dists[j]);
    }
    const auto fe = fe_dimension(fe_table, eps, cap);
    const auto be = fe_dimension(be_table, eps, cap);
    exact = exact && fe.exact && be.exact;
    out.left = std::max(out.left, fe.dim);
    out.right = std::max(out.right, be.dim);
  }
  out.report.passed = out.left <= out.right;
  out.report.probes = env.horizon();
  std::ostringstream msg;
  msg << "FE " << out.left << " vs BE " << out.right << (exact ? "" : " (search truncated)");
  out.report.detail = msg.str();
  out.report.max_violation = std::max(0, out.left - out.right);
  return out;
}

DimensionComparison verify_bilinear_le_effdim(const std::vector<Vector>& w,
                                              const std::vector<Vector>& x, double eps, int cap) {
  if (w.empty() || x.empty()) throw InputError("verify_bilinear_le_effdim: empty factors");
  DimensionComparison out;
  out.report.name = "bilinear_fe_le_effdim";
  Matrix table(static_cast<Eigen::Index>(w.size()), static_cast<Eigen::Index>(x.size()));
  double bound = 0.0;
  for (std::size_t a = 0; a < w.size(); ++a) {
    bound = std::max(bound, w[a].squaredNorm());
    for (std::size_t b = 0; b < x.size(); ++b) table(a, b) = w[a].dot(x[b]);
  }
  for (const auto& v : x) bound = std::max(bound, v.squaredNorm());
  const auto fe = fe_dimension(table, eps, cap);
  out.left = fe.dim;
  if (bound == 0.0) {
    out.right = 1;
  } else {
    const auto eff = effective_dimension(x, eps / std::sqrt(bound));
    out.right = eff.value;
  }
  out.report.passed = out.left <= out.right;
  out.report.max_violation = std::max(0, out.left - out.right);
  std::ostringstream msg;
  msg << "FE " << out.left << " vs effective dimension " << out.right;
  out.report.detail = msg.str();
  return out;
}

}  // namespace opera
