#pragma once

#include <Eigen/Core>

#include "dyneit/mesh.hpp"

namespace dyneit {

/// Per-element 2-vectors in the range of the discrete gradient K; doubles as
/// the dual variable of the primal-dual iteration.
using DualField = Eigen::Matrix<double, 2, Eigen::Dynamic>;

/// Discrete gradient, by default with element areas folded in:
/// (Kx)_e = area_e * (grad x)|_e, so that alpha * sum_e |(Kx)_e| equals the
/// isotropic total variation alpha * int |grad x|. The area_weighted = false
/// variant is the plain per-element gradient (Kx)_e = (grad x)|_e, whose
/// operator norm scales like 1/h.
class TvOperator {
 public:
  TvOperator(const Mesh& mesh, const ElementGeometry& geom, bool area_weighted = true);

  DualField apply(const Eigen::VectorXd& x) const;
  Eigen::VectorXd apply_adjoint(const DualField& y) const;

  /// alpha * sum_e |(Kx)_e|, the TV value.
  double tv_value(const Eigen::VectorXd& x, double alpha) const;

  /// Power-method estimate of the operator norm |K| to 1e-6 relative.
  /// Throws NumericError after 1e4 iterations without convergence.
  double estimate_norm() const;

  int rows() const { return 2 * static_cast<int>(elements_.size()); }
  int cols() const { return n_nodes_; }

 private:
  struct ElementRow {
    std::array<int, 3> nodes;
    std::array<Vec2, 3> weights;  // area-scaled hat gradients
  };
  std::vector<ElementRow> elements_;
  int n_nodes_ = 0;
};

/// Componentwise clamp to [lower, upper]; the prox of the box indicator for
/// every step length.
Eigen::VectorXd prox_box(const Eigen::VectorXd& x, double lower, double upper);

/// Per-element projection onto the 2-ball of radius alpha; the prox of the
/// Fenchel conjugate of alpha*|.|_{2,1} for every step length.
DualField prox_dual_ball(const DualField& y, double alpha);

}  // namespace dyneit
