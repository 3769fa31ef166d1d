#pragma once

#include <Eigen/Core>
#include <string>
#include <vector>

#include "dyneit/fem.hpp"

namespace dyneit {

/// Dense derivative of the stacked measurement map at a linearization point;
/// rows follow the forward_map ordering, columns are conductivity nodes.
struct Jacobian {
  Eigen::MatrixXd matrix;
  Eigen::VectorXd linearization_point;
};

/// Directional derivative of the CEM solution for one pattern: w' solves
/// B_x(w', w) = -int h grad(u_x) . grad(v) over the already-factorized system.
CemSolution directional_derivative(const CemSystem& system, const CemSolution& base,
                                   const ExcitationPattern& pattern, const Eigen::VectorXd& h);

/// Second directional derivative: w'' solves
/// B_x(w'', w) = -(int h1 grad(v'_{h2}).grad(v) + int h2 grad(v'_{h1}).grad(v)).
CemSolution second_directional(const CemSystem& system, const CemSolution& base,
                               const ExcitationPattern& pattern, const Eigen::VectorXd& h1,
                               const Eigen::VectorXd& h2);

/// Scaled measurement Jacobian assembled via adjoint solves, one per measured
/// electrode functional (shared across patterns), so the solve count is
/// O(N1), not O(nodes).
Jacobian jacobian(const CemSystem& system, const std::vector<ExcitationPattern>& patterns,
                  double precision_scale);

/// Convenience overload assembling and factorizing internally.
Jacobian jacobian(const Mesh& mesh, const ElementGeometry& geom, const ConductivityField& x,
                  const std::vector<ExcitationPattern>& patterns, double precision_scale);

/// Gradient of E(x) = 0.5 |S(x) - b|^2: returns J^T residual.
Eigen::VectorXd grad_E(const Jacobian& jac, const Eigen::VectorXd& residual);

/// Central finite-difference Jacobian of forward_map; test oracle.
/// step_rel defaults to the cube-root-of-epsilon heuristic scaled by |x|_inf.
Eigen::MatrixXd fd_jacobian(const Mesh& mesh, const ElementGeometry& geom,
                            const ConductivityField& x,
                            const std::vector<ExcitationPattern>& patterns,
                            double precision_scale, double step_rel = 0.0);

/// Binary dump: 8-byte magic "DEITJAC1", int32 rows, int32 cols, then
/// row-major float64 entries.
void save_jacobian(const Jacobian& jac, const std::string& path);
Jacobian load_jacobian(const std::string& path);

}  // namespace dyneit
