#pragma once

#include <functional>
#include <optional>

#include "dyneit/derivative.hpp"

namespace dyneit {

/// Empirical operator-norm estimates of S' and S'' over sampled points and
/// directions in a ball around x_center.
struct SmoothnessEstimate {
  double s_prime_max = 0.0;
  double s_second_max = 0.0;
  int samples = 0;
  double delta = 0.0;
};

/// Directional actions of the measurement map needed by the estimator.
struct SmoothnessProbe {
  std::function<Eigen::VectorXd(const Eigen::VectorXd& x, const Eigen::VectorXd& h)> first;
  std::function<Eigen::VectorXd(const Eigen::VectorXd& x, const Eigen::VectorXd& h1,
                                const Eigen::VectorXd& h2)>
      second;
};

/// CEM-backed probe: stacked scaled current derivatives over all patterns.
SmoothnessProbe make_cem_probe(const Mesh& mesh, const ElementGeometry& geom,
                               const std::vector<ExcitationPattern>& patterns,
                               double precision_scale, double lower = 1e-5, double upper = 1e5);

/// Running max of |S'(x)h| / |h| and |S''(x)(h1,h2)| / (|h1||h2|) over sampled
/// x in B(x_center, delta). The direction set contains the canonical nodal
/// directions followed by random unit vectors, so estimates are monotone
/// nondecreasing in the sample count for a fixed seed.
SmoothnessEstimate estimate_smoothness(const SmoothnessProbe& probe,
                                       const Eigen::VectorXd& x_center, double delta,
                                       int n_samples, unsigned seed);

/// Scalar objective with gradient, as sampled by the three-point checker.
struct EnergyProvider {
  std::function<double(const Eigen::VectorXd&)> value;
  std::function<Eigen::VectorXd(const Eigen::VectorXd&)> grad;
};

/// Sampled verification of the three-point smoothness inequality
///   <grad E(z), x - x_bar> >= E(x) - E(x_bar) + eps |x - x_bar|^2 - D |x - z|^2
/// with eps = lambda_tilde / 2, plus (given a critical point) the
/// monotonicity-like form
///   <grad E(z) - grad E(x_hat), x - x_hat> >= lambda_hat |x - x_hat|^2 - D |x - z|^2.
struct ThreePointReport {
  int samples = 0;
  int violations = 0;
  double worst_margin = 0.0;  // min over samples of LHS - RHS (negative = violated)
  int monotonicity_violations = 0;
  double monotonicity_worst_margin = 0.0;
};
ThreePointReport check_three_point(const EnergyProvider& provider, const Eigen::VectorXd& x_bar,
                                   double delta, double lambda_tilde, double d_factor,
                                   int n_samples, unsigned seed,
                                   const std::optional<Eigen::VectorXd>& critical_point = {},
                                   double lambda_hat = 0.0);

/// L_grad estimate 0.5 |J J^*| from the appendix step-length reasoning.
double estimate_L_grad(const Jacobian& jac);

}  // namespace dyneit
