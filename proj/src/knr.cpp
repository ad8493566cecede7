#include "opera/knr.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "opera/errors.hpp"

namespace opera {

namespace {

Matrix diag2(double a, double b) {
  Matrix m(2, 2);
  m << a, 0.0, 0.0, b;
  return m;
}

void validate_spec(const KnrSpec& spec) {
  if (spec.state_dim < 1 || spec.feature_dim < 1 || spec.num_actions < 1 || spec.horizon < 1) {
    throw InputError("make_knr: dimensions must be positive");
  }
  if (spec.sigma < 0.0) throw InputError("make_knr: negative noise scale");
  if (spec.planning_budget <= 0) throw InputError("make_knr: planning budget must be positive");
  if (spec.value_rollouts <= 0) throw InputError("make_knr: value rollouts must be positive");
  const int ds = spec.state_dim;
  const int dp = spec.feature_dim;
  if (spec.feature_weights.rows() != dp || spec.feature_weights.cols() != ds) {
    throw InputError("make_knr: feature weights must be d_phi x d_s");
  }
  if (static_cast<int>(spec.action_bias.size()) != spec.num_actions) {
    throw InputError("make_knr: one feature bias per action");
  }
  for (const auto& b : spec.action_bias) {
    if (b.size() != dp) throw InputError("make_knr: feature bias has the wrong size");
  }
  if (spec.initial_state.size() != ds) throw InputError("make_knr: initial state has the wrong size");
  if (spec.linear_reward) {
    if (spec.reward_weights.size() != ds) throw InputError("make_knr: reward weights have the wrong size");
  } else {
    if (spec.goal.size() != ds) throw InputError("make_knr: goal has the wrong size");
    if (spec.goal_width <= 0.0) throw InputError("make_knr: goal width must be positive");
  }
  if (static_cast<int>(spec.u_star.size()) != spec.horizon ||
      static_cast<int>(spec.u_grid.size()) != spec.horizon) {
    throw InputError("make_knr: need one true matrix and one candidate list per step");
  }
  for (int h = 0; h < spec.horizon; ++h) {
    if (spec.u_star[h].rows() != ds || spec.u_star[h].cols() != dp) {
      throw InputError("make_knr: U* must be d_s x d_phi");
    }
    if (spec.u_grid[h].empty()) throw InputError("make_knr: empty candidate list");
    bool found = false;
    for (const auto& u : spec.u_grid[h]) {
      if (u.rows() != ds || u.cols() != dp) throw InputError("make_knr: candidate U has the wrong shape");
      if ((u - spec.u_star[h]).cwiseAbs().maxCoeff() == 0.0) found = true;
    }
    if (!found) throw ConstructionError("make_knr: U* missing from the candidates at step " + std::to_string(h));
  }
}

}  // namespace

KnrSpec canonical_knr_spec() {
  KnrSpec spec;
  spec.state_dim = 2;
  spec.feature_dim = 2;
  spec.num_actions = 2;
  spec.horizon = 3;
  spec.sigma = 0.1;
  spec.feature_weights = Matrix::Identity(2, 2);
  spec.action_bias = {Vector::Zero(2), Vector::Zero(2)};
  spec.action_bias[0] << 0.8, 0.0;
  spec.action_bias[1] << 0.0, 0.8;
  spec.initial_state = Vector::Zero(2);
  spec.goal = Vector(2);
  spec.goal << 0.9, 0.1;
  spec.goal_width = 0.5;
  const Matrix eye = Matrix::Identity(2, 2);
  // Wrong first-step model that believes action 1 lands next to the goal.
  Matrix lure(2, 2);
  lure << 0.0, 1.35, 1.0, 0.0;
  Matrix swap(2, 2);
  swap << 0.0, 1.0, 1.0, 0.0;
  Matrix drift(2, 2);
  drift << 1.3, 0.0, 0.0, 0.3;
  spec.u_star = {eye, eye, eye};
  // The last transition never affects the return, so only U* is listed there.
  spec.u_grid = {{eye, lure, diag2(1.4, 0.6)}, {eye, swap, drift}, {eye}};
  spec.planning_budget = 256;
  spec.value_rollouts = 10000;
  return spec;
}

KnrSpec random_knr_spec(int state_dim, int feature_dim, int horizon, double sigma, Rng& rng) {
  if (state_dim < 1 || feature_dim < 1 || horizon < 1) throw InputError("random_knr_spec: bad dimensions");
  KnrSpec spec;
  spec.state_dim = state_dim;
  spec.feature_dim = feature_dim;
  spec.num_actions = 2;
  spec.horizon = horizon;
  spec.sigma = sigma;
  auto gaussian = [&](int r, int c, double scale) {
    Matrix m(r, c);
    for (int i = 0; i < r; ++i)
      for (int j = 0; j < c; ++j) m(i, j) = scale * rng.normal();
    return m;
  };
  spec.feature_weights = gaussian(feature_dim, state_dim, 1.0 / std::sqrt(state_dim));
  spec.action_bias = {gaussian(feature_dim, 1, 0.5).col(0), gaussian(feature_dim, 1, 0.5).col(0)};
  spec.initial_state = Vector::Zero(state_dim);
  spec.goal = gaussian(state_dim, 1, 0.5).col(0);
  spec.goal_width = 1.0;
  for (int h = 0; h < horizon; ++h) {
    const Matrix u = gaussian(state_dim, feature_dim, 0.5);
    spec.u_star.push_back(u);
    spec.u_grid.push_back({u, u + gaussian(state_dim, feature_dim, 0.3),
                           u + gaussian(state_dim, feature_dim, 0.3)});
  }
  spec.planning_budget = 64;
  spec.value_rollouts = 500;
  return spec;
}

KnrPlanner::KnrPlanner(const KnrInstance* instance, std::vector<Matrix> u)
    : instance_(instance), u_(std::move(u)) {}

double KnrPlanner::q(int h, const Vector& s, int a) const {
  const double r = instance_->reward(h, s, a);
  if (h == instance_->horizon() - 1) return r;
  const Vector mean = u_[h] * instance_->features(s, a);
  const double sigma = instance_->spec().sigma;
  const auto& noise = instance_->noise_draws();
  if (sigma == 0.0) return r + value(h + 1, mean);
  Vector next(mean.size());
  double total = 0.0;
  for (const auto& eps : noise) {
    next.noalias() = mean + sigma * eps;
    total += value(h + 1, next);
  }
  return r + total / static_cast<double>(noise.size());
}

double KnrPlanner::value(int h, const Vector& s) const {
  if (h >= instance_->horizon()) return 0.0;
  double best = q(h, s, 0);
  for (int a = 1; a < instance_->spec().num_actions; ++a) best = std::max(best, q(h, s, a));
  return best;
}

int KnrPlanner::action(int h, const Vector& s) const {
  Vector values(instance_->spec().num_actions);
  for (int a = 0; a < values.size(); ++a) values(a) = q(h, s, a);
  return argmax_first(values);
}

KnrInstance::KnrInstance(KnrSpec spec) : spec_(std::move(spec)) {
  validate_spec(spec_);
  const int H = spec_.horizon;
  const int ds = spec_.state_dim;

  // Shared antithetic draws for planning.
  Rng noise_rng(spec_.planning_seed);
  const int budget = spec_.planning_budget;
  for (int j = 0; j + 1 < budget; j += 2) {
    Vector eps(ds);
    for (int i = 0; i < ds; ++i) eps(i) = noise_rng.normal();
    noise_.push_back(eps);
    noise_.push_back(-eps);
  }
  if (budget % 2 == 1) noise_.push_back(Vector::Zero(ds));

  // Feature bound on a probe set.
  {
    Rng probe_rng(spec_.planning_seed ^ 0x9e3779b97f4a7c15ULL);
    const double bound = feature_bound();
    for (int k = 0; k <= 512; ++k) {
      Vector s = spec_.initial_state;
      if (k > 0) {
        for (int i = 0; i < ds; ++i) s(i) = 2.0 * probe_rng.normal();
      }
      for (int a = 0; a < spec_.num_actions; ++a) {
        const double norm = features(s, a).norm();
        if (norm > bound + 1e-12) {
          std::ostringstream msg;
          msg << "make_knr: feature norm " << norm << " exceeds bound " << bound;
          throw ConstructionError(msg.str());
        }
      }
    }
  }

  env_.horizon = H;
  env_.num_actions = spec_.num_actions;
  env_.state_dim = ds;
  env_.initial_state = spec_.initial_state;
  env_.reward = [this](int h, const Vector& s, int a) { return reward(h, s, a); };
  env_.sample_next = [this](int h, const Vector& s, int a, Rng& rng) {
    Vector next = spec_.u_star[h] * features(s, a);
    for (int i = 0; i < next.size(); ++i) next(i) += spec_.sigma * rng.normal();
    return next;
  };

  // Hypotheses: mixed radix over the per-step candidates, step 0 fastest.
  std::vector<int> digits(H, 0);
  while (true) {
    std::vector<Matrix> u(H);
    bool star = true;
    for (int h = 0; h < H; ++h) {
      u[h] = spec_.u_grid[h][digits[h]];
      if ((u[h] - spec_.u_star[h]).cwiseAbs().maxCoeff() != 0.0) star = false;
    }
    if (star) optimal_ = static_cast<int>(planners_.size());
    planners_.push_back(std::make_unique<KnrPlanner>(this, std::move(u)));
    int h = 0;
    while (h < H && ++digits[h] == static_cast<int>(spec_.u_grid[h].size())) digits[h++] = 0;
    if (h == H) break;
  }

  const int n = num_hypotheses();
  optimistic_.resize(n);
  policy_values_.resize(n);
  policy_errors_.resize(n);
  for (int f = 0; f < n; ++f) {
    optimistic_[f] = planners_[f]->value(0, spec_.initial_state);
    const int first = planners_[f]->action(0, spec_.initial_state);
    Rng rng(spec_.value_seed);
    double sum = 0.0;
    double sumsq = 0.0;
    for (int k = 0; k < spec_.value_rollouts; ++k) {
      Vector s = spec_.initial_state;
      double ret = 0.0;
      for (int h = 0; h < H; ++h) {
        const int a = h == 0 ? first : planners_[f]->action(h, s);
        auto [r, next] = env_.step(h, s, a, rng);
        ret += r;
        s = std::move(next);
      }
      sum += ret;
      sumsq += ret * ret;
    }
    const double m = spec_.value_rollouts;
    policy_values_[f] = sum / m;
    const double var = std::max(0.0, sumsq / m - policy_values_[f] * policy_values_[f]);
    policy_errors_[f] = std::sqrt(var / m);
  }
}

Vector KnrInstance::features(const Vector& s, int a) const {
  if (a < 0 || a >= spec_.num_actions) throw InputError("knr: action out of range");
  return spec_.feature_scale * (spec_.feature_weights * s + spec_.action_bias[a]).array().tanh().matrix();
}

double KnrInstance::reward(int, const Vector& s, int) const {
  const double scale = 1.0 / spec_.horizon;
  if (spec_.linear_reward) {
    return scale * std::clamp(spec_.reward_weights.dot(s) + spec_.reward_offset, 0.0, 1.0);
  }
  const double w = spec_.goal_width;
  return scale * std::exp(-(s - spec_.goal).squaredNorm() / (w * w));
}

double KnrInstance::feature_bound() const {
  if (spec_.feature_bound > 0.0) return spec_.feature_bound;
  return std::sqrt(static_cast<double>(spec_.feature_dim)) * std::abs(spec_.feature_scale);
}

double KnrInstance::clip_radius(int episodes, double delta) const {
  if (episodes < 1 || delta <= 0.0 || delta >= 1.0) throw InputError("clip_radius: bad episodes or delta");
  double norm_u = 0.0;
  for (const auto& grid : spec_.u_grid) {
    for (const auto& u : grid) {
      Eigen::JacobiSVD<Matrix> svd(u);
      norm_u = std::max(norm_u, svd.singularValues()(0));
    }
  }
  const double log_term =
      std::log(static_cast<double>(episodes) * spec_.horizon * spec_.state_dim / delta);
  return 2.0 * norm_u * feature_bound() +
         spec_.clip_constant * spec_.sigma * std::sqrt(std::max(0.0, log_term));
}

std::vector<std::pair<Vector, int>> KnrInstance::sample_state_actions(int g, int h, int count,
                                                                      std::uint64_t seed) const {
  std::vector<std::pair<Vector, int>> out;
  out.reserve(count);
  Rng rng(seed);
  const int first = planners_[g]->action(0, spec_.initial_state);
  for (int k = 0; k < count; ++k) {
    Vector s = spec_.initial_state;
    for (int j = 0; j < h; ++j) {
      const int a = j == 0 ? first : planners_[g]->action(j, s);
      s = env_.step(j, s, a, rng).second;
    }
    const int a = h == 0 ? first : planners_[g]->action(h, s);
    out.emplace_back(std::move(s), a);
  }
  return out;
}

OperaProblem<Vector> KnrInstance::problem() const {
  OperaProblem<Vector> p;
  p.horizon = spec_.horizon;
  p.num_actions = spec_.num_actions;
  p.num_hypotheses = num_hypotheses();
  p.initial_state = spec_.initial_state;
  p.step = [this](int h, const Vector& s, int a, Rng& rng) { return env_.step(h, s, a, rng); };
  std::vector<int> first(num_hypotheses());
  for (int f = 0; f < num_hypotheses(); ++f) first[f] = planners_[f]->action(0, spec_.initial_state);
  p.act = [this, first](int f, int h, const Vector& s) {
    if (h == 0 && s == spec_.initial_state) return first[f];
    return planners_[f]->action(h, s);
  };
  p.optimistic_values = optimistic_;
  p.policy_values = policy_values_;
  p.optimal_value = optimal_value();
  p.optimal_index = optimal_;
  return p;
}

std::vector<std::vector<Matrix>> KnrInstance::hypotheses() const {
  std::vector<std::vector<Matrix>> out;
  for (const auto& p : planners_) out.push_back(p->u());
  return out;
}

KnrDef::KnrDef(const KnrInstance& instance, double radius) : instance_(instance), radius_(radius) {
  if (radius <= 0.0) throw InputError("KnrDef: radius must be positive");
}

Vector KnrDef::eval_unclipped(int h, const Transition<Vector>& o, int g) const {
  return instance_.u(g, h) * instance_.features(o.state, o.action) - o.next;
}

Vector KnrDef::eval(int h, const Transition<Vector>& o, int g) const {
  Vector l = eval_unclipped(h, o, g);
  const double norm = l.norm();
  if (norm > radius_) {
    clips_.fetch_add(1);
    l *= radius_ / norm;
  }
  return l;
}

Vector KnrDef::expected(int h, const Vector& s, int a, int g) const {
  const int star = instance_.optimal_index();
  return (instance_.u(g, h) - instance_.u(star, h)) * instance_.features(s, a);
}

CheckReport check_knr_decomposability(const KnrInstance& instance, const KnrDef& def, int samples,
                                      std::uint64_t seed, double tol) {
  CheckReport report;
  report.name = "decomposability/knr";
  Rng rng(seed);
  const int H = instance.horizon();
  const int star = def.completion();
  const int ds = instance.spec().state_dim;
  for (int k = 0; k < samples; ++k) {
    const int h = static_cast<int>(rng.below(H));
    const int f = static_cast<int>(rng.below(instance.num_hypotheses()));
    const int a = static_cast<int>(rng.below(instance.spec().num_actions));
    Vector s(ds);
    for (int i = 0; i < ds; ++i) s(i) = rng.normal();
    // Gaussian mean of s' is U* phi, so E[l] is l evaluated at that mean.
    const Vector mean_next = instance.u(star, h) * instance.features(s, a);
    Vector next(ds);
    for (int i = 0; i < ds; ++i) next(i) = mean_next(i) + instance.spec().sigma * rng.normal();
    const Transition<Vector> o{s, a, 0.0, next};
    const Vector residual =
        def.eval_unclipped(h, o, f) - def.expected(h, s, a, f) - def.eval_unclipped(h, o, star);
    report.max_violation = std::max(report.max_violation, residual.cwiseAbs().maxCoeff());
    ++report.probes;
  }
  report.passed = report.max_violation <= tol;
  std::ostringstream msg;
  msg << "max residual " << report.max_violation << " over " << report.probes << " probes";
  report.detail = msg.str();
  return report;
}

KnrCoupling::KnrCoupling(const KnrInstance& instance, int rollouts, std::uint64_t seed)
    : instance_(instance), rollouts_(rollouts) {
  if (rollouts < 2) throw InputError("KnrCoupling: need at least two rollouts");
  const int n = instance.num_hypotheses();
  const int H = instance.horizon();
  const int dp = instance.spec().feature_dim;
  moments_.assign(n, std::vector<Matrix>(H, Matrix::Zero(dp, dp)));
  features_.assign(n, std::vector<std::vector<Vector>>(H));
  const auto problem = instance.problem();
  for (int g = 0; g < n; ++g) {
    Rng rng(seed);
    for (int k = 0; k < rollouts; ++k) {
      Vector s = instance.spec().initial_state;
      for (int h = 0; h < H; ++h) {
        const int a = problem.act(g, h, s);
        const Vector phi = instance.features(s, a);
        moments_[g][h] += phi * phi.transpose();
        features_[g][h].push_back(phi);
        s = instance.env().step(h, s, a, rng).second;
      }
    }
    for (auto& m : moments_[g]) m /= static_cast<double>(rollouts);
  }
}

double KnrCoupling::value(int h, int f, int g) const {
  const int star = instance_.optimal_index();
  const Matrix delta = instance_.u(f, h) - instance_.u(star, h);
  return std::sqrt(std::max(0.0, (delta * moments_[g][h] * delta.transpose()).trace()));
}

double KnrCoupling::standard_error(int h, int f, int g) const {
  const int star = instance_.optimal_index();
  const Matrix delta = instance_.u(f, h) - instance_.u(star, h);
  double sum = 0.0;
  double sumsq = 0.0;
  for (const auto& phi : features_[g][h]) {
    const double z = (delta * phi).squaredNorm();
    sum += z;
    sumsq += z * z;
  }
  const double m = rollouts_;
  const double mean = sum / m;
  const double var = std::max(0.0, sumsq / m - mean * mean);
  return std::sqrt(std::sqrt(var / m));
}

double KnrCoupling::kappa() const {
  return instance_.spec().sigma / (2.0 * instance_.horizon());
}

MonteCarloEstimate knr_average_bellman_error(const KnrInstance& instance, int f, int h, int rollouts,
                                             std::uint64_t seed) {
  if (rollouts < 2) throw InputError("knr_average_bellman_error: need at least two rollouts");
  const auto problem = instance.problem();
  const auto& planner = instance.planner(f);
  Rng rng(seed);
  double sum = 0.0;
  double sumsq = 0.0;
  // Step 0 always starts from s_1, so its planned Q is computed once.
  std::vector<double> first_q;
  if (h == 0) {
    for (int a = 0; a < instance.spec().num_actions; ++a) {
      first_q.push_back(planner.q(0, instance.spec().initial_state, a));
    }
  }
  for (int k = 0; k < rollouts; ++k) {
    Vector s = instance.spec().initial_state;
    for (int j = 0; j < h; ++j) s = instance.env().step(j, s, problem.act(f, j, s), rng).second;
    const int a = problem.act(f, h, s);
    auto [r, next] = instance.env().step(h, s, a, rng);
    const double planned = h == 0 ? first_q[a] : planner.q(h, s, a);
    const double err = planned - r - planner.value(h + 1, next);
    sum += err;
    sumsq += err * err;
  }
  MonteCarloEstimate est;
  est.mean = sum / rollouts;
  const double var = std::max(0.0, sumsq / rollouts - est.mean * est.mean);
  est.standard_error = std::sqrt(var / rollouts);
  return est;
}

CheckReport check_knr_dominating_average(const KnrInstance& instance, const KnrCoupling& coupling,
                                         double tol) {
  CheckReport report;
  report.name = "dominating_average/knr";
  const int n = instance.num_hypotheses();
  const int star = instance.optimal_index();
  for (int h = 0; h < instance.horizon(); ++h) {
    for (int f = 0; f < n; ++f) {
      const Matrix delta = instance.u(f, h) - instance.u(star, h);
      for (int g = 0; g < n; ++g) {
        // Average of ||E l||^2 over the roll-in of pi_g, from the same samples.
        const double lhs = (delta * coupling.second_moment(g, h) * delta.transpose()).trace();
        const double G = coupling.value(h, f, g);
        const double violation = G * G - lhs;
        if (violation > report.max_violation) report.max_violation = violation;
        ++report.probes;
      }
    }
  }
  report.passed = report.max_violation <= tol;
  std::ostringstream msg;
  msg << "max violation " << report.max_violation << " over " << report.probes << " probes";
  report.detail = msg.str();
  return report;
}

CheckReport check_knr_bellman_dominance(const KnrInstance& instance, const KnrCoupling& coupling,
                                        int rollouts, std::uint64_t seed, double kappa_scale) {
  CheckReport report;
  report.name = "bellman_dominance/knr";
  const double kappa = coupling.kappa() * kappa_scale;
  for (int h = 0; h < instance.horizon(); ++h) {
    for (int f = 0; f < instance.num_hypotheses(); ++f) {
      const auto abe = knr_average_bellman_error(instance, f, h, rollouts, seed + 31 * h + f);
      const double G = coupling.value(h, f, f);
      const double slack = 3.0 * (kappa * abe.standard_error + coupling.standard_error(h, f, f));
      const double violation = kappa * std::abs(abe.mean) - G - slack;
      if (violation > report.max_violation || report.probes == 0) {
        if (violation > report.max_violation) {
          std::ostringstream msg;
          msg << "worst at h=" << h << " f=" << f << ": kappa*|ABE| " << kappa * std::abs(abe.mean)
              << " vs G " << G << " + slack " << slack;
          report.detail = msg.str();
        }
        report.max_violation = std::max(report.max_violation, violation);
      }
      ++report.probes;
    }
  }
  report.passed = report.max_violation <= 0.0;
  if (report.detail.empty()) {
    std::ostringstream msg;
    msg << "no violation over " << report.probes << " probes";
    report.detail = msg.str();
  }
  return report;
}

KnrConfidence::KnrConfidence(const KnrInstance& instance, KnrConstraintForm form, double lambda,
                             double clip_radius)
    : instance_(instance), form_(form), lambda_(lambda), clip_radius_(clip_radius) {
  if (lambda < 0.0) throw InputError("KnrConfidence: negative regularization");
  const int H = instance.horizon();
  const int ds = instance.spec().state_dim;
  const int dp = instance.spec().feature_dim;
  sigma_.assign(H, Matrix::Zero(dp, dp));
  cross_.assign(H, Matrix::Zero(ds, dp));
  yy_.assign(H, 0.0);
  counts_.assign(H, 0);
  cache_.assign(H, {});
  fresh_.assign(H, false);
}

void KnrConfidence::add(int h, const Transition<Vector>& o, int) {
  const Vector phi = instance_.features(o.state, o.action);
  sigma_[h] += phi * phi.transpose();
  cross_[h] += o.next * phi.transpose();
  yy_[h] += o.next.squaredNorm();
  if (clip_radius_ > 0.0) {
    for (int g = 0; g < instance_.num_hypotheses(); ++g) {
      if ((instance_.u(g, h) * phi - o.next).norm() > clip_radius_) {
        ++clips_;
        break;
      }
    }
  }
  ++counts_[h];
  fresh_[h] = false;
}

RidgeFit KnrConfidence::fit(int h) const { return ridge_fit(sigma_[h], cross_[h], lambda_); }

double KnrConfidence::raw_residual(int h, const Matrix& u) const {
  return residual_sum(u, sigma_[h], cross_[h], yy_[h]);
}

double KnrConfidence::lhs(int h, int f) const {
  if (!fresh_[h]) {
    const int n = instance_.num_hypotheses();
    cache_[h].assign(n, 0.0);
    if (counts_[h] > 0) {
      if (form_ == KnrConstraintForm::kMatrix) {
        const RidgeFit fit = this->fit(h);
        for (int g = 0; g < n; ++g) cache_[h][g] = fit.distance(instance_.u(g, h));
      } else {
        std::vector<double> raw(n);
        for (int g = 0; g < n; ++g) raw[g] = raw_residual(h, instance_.u(g, h));
        const double best = *std::min_element(raw.begin(), raw.end());
        for (int g = 0; g < n; ++g) cache_[h][g] = raw[g] - best;
      }
    }
    fresh_[h] = true;
  }
  return cache_[h][f];
}

RidgeFit knr_confidence(const KnrInstance& instance, int h,
                        const std::vector<Transition<Vector>>& history, double lambda) {
  if (h < 0 || h >= instance.horizon()) throw InputError("knr_confidence: step out of range");
  const int ds = instance.spec().state_dim;
  const int dp = instance.spec().feature_dim;
  Matrix features(dp, static_cast<Eigen::Index>(history.size()));
  Matrix targets(ds, static_cast<Eigen::Index>(history.size()));
  for (std::size_t i = 0; i < history.size(); ++i) {
    features.col(i) = instance.features(history[i].state, history[i].action);
    targets.col(i) = history[i].next;
  }
  return ridge_fit_columns(features, targets, lambda);
}

}  // namespace opera
