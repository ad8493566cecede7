#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "opera/estimation.hpp"
#include "opera/hypothesis.hpp"
#include "opera/mdp.hpp"

namespace opera {

// Coupling G_h(f, g) of an ABC class with its dominance constant.
struct CouplingFunction {
  std::string name;
  double kappa = 1.0;
  OperatingMode mode = OperatingMode::kQType;
  double cap = 1.0;
  std::function<double(int h, int f, int g)> value;
  // Optional bilinear factors with value(h, f, g) = <w(h, f), x(h, g)>.
  std::function<Vector(int h, int f)> w;
  std::function<Vector(int h, int g)> x;

  bool bilinear() const { return static_cast<bool>(w) && static_cast<bool>(x); }
  double operator()(int h, int f, int g) const { return value(h, f, g); }
};

// Marginals of s_h under the greedy policy of each hypothesis: [f][h].
std::vector<std::vector<Vector>> greedy_roll_ins(const HypothesisClass& cls,
                                                 const TabularMdp& env);

// E_{s_h, a_h ~ pi_f}[Q_{h,f} - r_h - V_{h+1,f}(s_{h+1})], exact.
double average_bellman_error(const TabularMdp& env, const Hypothesis& f, int h);

// G(f, g) = E_{s ~ pi_g, a = pi_g(s)}[Q_f - r - P V_f]; bilinear in the
// Bellman residual table of f and the state-action occupancy of g.
CouplingFunction make_bellman_coupling(std::shared_ptr<const HypothesisClass> cls,
                                       const TabularMdp& env);

// G(f, g) = (theta_{h,f} - theta*_h)^T E_{s,a ~ pi_g}[psi + phi_{V_{h+1,g}}].
CouplingFunction make_linear_mixture_coupling(std::shared_ptr<const LinearMixtureDef> def,
                                              const TabularMdp& env);

// G(f, g) = <W_h(f), X_h(g)> with W_h(f)(s) = B * TV(f_h, P_h) at (s, pi_f(s))
// and X_h(g) the state marginal of pi_g. V-type.
CouplingFunction make_witness_coupling(std::shared_ptr<const HypothesisClass> models,
                                       const TabularMdp& env, double discriminator_bound,
                                       double kappa);

// Dominating average: max_v E_{s ~ pi_g, a ~ pi_op} ||E_{s'} l_{h,g}(o, f, f, v)||^2 >= G(f,g)^2.
CheckReport check_dominating_average(const EstimationFunction& def, const CouplingFunction& coupling,
                                     const TabularMdp& env, double tol);

// Bellman dominance: kappa |average Bellman error of f at h| <= |G(f, f)|.
CheckReport check_bellman_dominance(const CouplingFunction& coupling, const HypothesisClass& cls,
                                    const TabularMdp& env, double tol);

// |<W(f), X(g)> - G(f, g)| over all (h, f, g).
CheckReport check_bilinear_factorization(const CouplingFunction& coupling, int horizon,
                                         int num_hypotheses, double tol);

// sum_h average Bellman error = V_{1,f}(s_1) - V_1^{pi_f}(s_1) for every f.
CheckReport check_policy_loss_decomposition(const HypothesisClass& cls, const TabularMdp& env,
                                            double tol);

// Largest kappa in (0, 1] for which Bellman dominance holds on the class.
double tightest_kappa(const CouplingFunction& coupling, const HypothesisClass& cls,
                      const TabularMdp& env);

}  // namespace opera
