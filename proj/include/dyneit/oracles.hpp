#pragma once

#include "dyneit/mesh.hpp"

#include <Eigen/Core>

namespace dyneit {

/// Brute-force prox oracles: dense grid minimization with nested refinement,
/// independent of the closed-form projections they check.
double brute_force_box_prox(double v, double lower, double upper);
Vec2 brute_force_ball_prox(const Vec2& v, double alpha);

struct GradientCheckResult {
  double max_rel_error = 0.0;
  double seconds = 0.0;
  int nodes = 0;
};
/// Adjoint Jacobian against central finite differences of the forward map on
/// a small disk mesh.
GradientCheckResult gradient_fd_check(int mesh_target = 331, double step_rel = 1e-6);

struct ProxCheckResult {
  double worst_box = 0.0;
  double worst_ball = 0.0;
  int samples = 0;
};
/// Closed-form proxes vs the brute-force oracles on random inputs.
ProxCheckResult prox_brute_force_check(int samples = 1000, unsigned seed = 7);

struct FlowCheckResult {
  double displacement = 0.0;
  double recovered_deviation = 0.0;  // |mean recovered motion - true shift| / shift
};
/// Gaussian bump translated by three mesh-edge lengths; flow estimated with
/// the default regularization weights.
FlowCheckResult flow_recovery_check(int mesh_target = 817);

}  // namespace dyneit
