#include "opera/opera.hpp"

#include <sstream>

namespace opera {

void OperaConfig::validate() const {
  if (episodes < 1) throw InputError("episodes must be at least 1");
  if (!(delta > 0.0 && delta < 1.0)) throw InputError("delta must lie in (0, 1)");
  if (beta && *beta < 0.0) throw InputError("beta must be nonnegative");
  if (!(c > 0.0)) throw InputError("the beta constant c must be positive");
}

double RunLog::cumulative_regret(int t) const {
  if (t < 1 || t > static_cast<int>(episodes.size())) throw InputError("episode out of range");
  return episodes[t - 1].cum_regret;
}

std::optional<int> RunLog::sample_complexity(double eps) const {
  for (const auto& e : episodes) {
    if (e.cum_regret / e.episode <= eps) return e.episode;
  }
  return std::nullopt;
}

double log_loss_cover(double log_f, double log_g, double log_v) {
  return 2.0 * log_f + log_g + log_v;
}

double beta_default(int episodes, int horizon, double log_cover, double delta, double c) {
  return c * (std::log(static_cast<double>(episodes)) + std::log(static_cast<double>(horizon)) +
              log_cover + std::log(1.0 / delta));
}

double beta_knr(int episodes, int horizon, double sigma, int d_phi, int d_s, double delta,
                double c) {
  const double l = std::log(static_cast<double>(episodes) * horizon / delta);
  return c * sigma * sigma * d_phi * d_s * l * l;
}

int select_hypothesis(const std::vector<double>& optimistic_values,
                      const std::vector<std::vector<double>>& lhs, double beta) {
  int best = -1;
  for (std::size_t f = 0; f < optimistic_values.size(); ++f) {
    bool feasible = true;
    for (const auto& per_step : lhs) {
      if (per_step[f] > beta) {
        feasible = false;
        break;
      }
    }
    if (feasible && (best < 0 || optimistic_values[f] > optimistic_values[best])) {
      best = static_cast<int>(f);
    }
  }
  if (best < 0) {
    std::ostringstream msg;
    msg << "no hypothesis satisfies the confidence constraints at beta = " << beta
        << "; smallest LHS per step:";
    for (std::size_t h = 0; h < lhs.size(); ++h) {
      double m = std::numeric_limits<double>::infinity();
      for (double v : lhs[h]) m = std::min(m, v);
      msg << " h" << h << "=" << m;
    }
    throw InfeasibleSet(msg.str());
  }
  return best;
}

}  // namespace opera
