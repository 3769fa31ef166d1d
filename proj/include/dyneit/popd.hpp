#pragma once

#include <Eigen/Core>
#include <functional>
#include <limits>
#include <vector>

#include "dyneit/derivative.hpp"
#include "dyneit/tv.hpp"

namespace dyneit {

/// Step lengths, testing parameters, and problem factors of the online
/// primal-dual iteration. Only the unaccelerated parameterization is used:
/// phi = 1, eta = tau, psi = tau/sigma.
struct StepParams {
  double tau = 0.0;
  double sigma = 1.0;
  double kappa = 0.15;
  double eta = 0.0;
  double phi = 1.0;
  double psi = 0.0;
  double gamma = 0.0;         // strong convexity of F (indicator: 0)
  double rho = 0.0;           // strong convexity of G* (indicator: 0)
  double lambda_tilde = 0.0;  // three-point growth factor entering Gamma
  double alpha = 0.5;         // TV weight

  static StepParams unaccelerated(double tau, double sigma, double alpha, double kappa = 0.15);

  /// Enforces positivity and the coupling eta = phi*tau = psi*sigma.
  void validate() const;
};

/// Primal-dual pair u = (x, y).
struct PrimalDual {
  Eigen::VectorXd x;
  DualField y;
};

/// Problem operations consumed by the iteration; the gradient may be exact or
/// served from a lagged linearization.
struct PdOps {
  std::function<DualField(const Eigen::VectorXd&)> K;
  std::function<Eigen::VectorXd(const DualField&)> K_adjoint;
  std::function<Eigen::VectorXd(const Eigen::VectorXd&)> prox_F;
  std::function<DualField(const DualField&)> prox_Gstar;
  /// grad_tilde E_{k}(x_pred) for the frame being stepped into.
  std::function<Eigen::VectorXd(const Eigen::VectorXd&, long)> grad;
};

/// Online iteration state at frame k.
struct OnlineState {
  long frame = 0;
  Eigen::VectorXd x;
  DualField y;
  Eigen::VectorXd x_prev;  // x^{k-1}; empty before the first step
  Eigen::VectorXd x_pred;  // most recent prediction (diagnostics)
  DualField y_pred;
};

/// Predicted pair (x_breve, y_breve) = P_k(x^k, y^k).
using Predictor = std::function<std::pair<Eigen::VectorXd, DualField>(const OnlineState&)>;

/// One iteration: prediction, then primal and dual proximal steps
///   x+ = prox_F(x_breve - tau grad_tilde(x_breve) - tau K^T y_breve)
///   y+ = prox_G*(y_breve + sigma K (2 x+ - x_breve)).
/// Throws NumericError naming the frame when an iterate turns non-finite.
OnlineState popdn_step(const OnlineState& state, long next_frame, const Predictor& predict,
                       const PdOps& ops, const StepParams& params);

/// Paper step rule tau = 0.85 / |J J^*| with the spectral norm from power
/// iteration at 1e-8 relative tolerance.
double compute_tau(const Jacobian& jac);

/// Spectral norm of J J^T (shared by compute_tau and estimate_L_grad).
double spectral_norm_jjt(const Eigen::MatrixXd& j);

/// Step-length validation: the global metric-positivity condition
/// 1 > L*tau + tau*sigma*|K|^2 and the kappa-budget local variant that splits
/// the unit budget as L*tau <= 1-kappa and tau*sigma*|K|^2 < kappa.
struct StepCheck {
  bool global_ok = false;
  double global_slack = 0.0;
  bool local_ok = false;
  double local_slack = 0.0;
  bool ok() const { return global_ok && local_ok; }
};
StepCheck check_step_condition(const StepParams& params, double l_bound, double k_norm);

/// Quadratic forms of the iteration metric M = [1/tau, -K^T; -K, 1/sigma] and
/// its Gamma/Omega shifts, evaluated matrix-free through the K operator.
class PdMetric {
 public:
  PdMetric(const PdOps& ops, const StepParams& params) : ops_(&ops), params_(params) {}

  double norm2_M(const PrimalDual& u) const;
  double norm2_M_plus_Gamma(const PrimalDual& u) const;
  /// lambda_loss is the three-point loss factor occupying Omega's primal block.
  double norm2_M_minus_Omega(const PrimalDual& u, double lambda_loss) const;
  const StepParams& params() const { return params_; }

 private:
  const PdOps* ops_;
  StepParams params_;
};

/// Prediction error of one frame transition,
///   0.5 |u_pred - ubar_next|^2_{eta M} - 0.5 |u_prev - ubar_prev|^2_{eta (M+Gamma)}.
double prediction_error(const PrimalDual& u_prev, const PrimalDual& u_pred,
                        const PrimalDual& ubar_prev, const PrimalDual& ubar_next,
                        const PdMetric& metric);

/// E_k evaluator plus the indicator data needed by the Lagrangian gap.
struct GapProblem {
  std::function<double(const Eigen::VectorXd&, long)> energy;
  double lower = 0.0;
  double upper = 0.0;
  double alpha = 0.0;
  double feasibility_tol = 1e-9;
};

/// Lagrangian duality gap between u and a comparison point; +infinity when an
/// indicator constraint is violated beyond tolerance.
double lagrangian_gap(const PrimalDual& u, const PrimalDual& ubar, long frame, const PdOps& ops,
                      const GapProblem& problem);

/// Cumulative gap-bound check of the main regret estimate: for every partial
/// sum, sum_k [gap_k + step_term_k] <= init_term + sum_k eps_dagger_k + tol.
struct GapBoundCheck {
  bool pass = true;
  double worst_margin = -std::numeric_limits<double>::infinity();
  long worst_frame = -1;
};
GapBoundCheck verify_gap_bound(const std::vector<double>& gaps,
                               const std::vector<double>& step_terms,
                               const std::vector<double>& eps_dagger, double init_term,
                               double tol = 1e-8);

}  // namespace dyneit
