#include "dyneit/tv.hpp"

#include <cmath>

namespace dyneit {

TvOperator::TvOperator(const Mesh& mesh, const ElementGeometry& geom, bool area_weighted)
    : n_nodes_(mesh.node_count()) {
  elements_.resize(mesh.element_count());
  for (int t = 0; t < mesh.element_count(); ++t) {
    elements_[t].nodes = mesh.triangles[t];
    const double weight = area_weighted ? geom.area[t] : 1.0;
    for (int i = 0; i < 3; ++i)
      elements_[t].weights[i] = weight * geom.hat_gradients[t][i];
  }
}

DualField TvOperator::apply(const Eigen::VectorXd& x) const {
  if (x.size() != n_nodes_) throw ShapeError("TvOperator::apply: field size mismatch");
  DualField y(2, elements_.size());
  for (size_t e = 0; e < elements_.size(); ++e) {
    Vec2 g = Vec2::Zero();
    for (int i = 0; i < 3; ++i) g += x[elements_[e].nodes[i]] * elements_[e].weights[i];
    y.col(e) = g;
  }
  return y;
}

Eigen::VectorXd TvOperator::apply_adjoint(const DualField& y) const {
  if (y.cols() != static_cast<long>(elements_.size()))
    throw ShapeError("TvOperator::apply_adjoint: dual field size mismatch");
  Eigen::VectorXd out = Eigen::VectorXd::Zero(n_nodes_);
  for (size_t e = 0; e < elements_.size(); ++e)
    for (int i = 0; i < 3; ++i)
      out[elements_[e].nodes[i]] += elements_[e].weights[i].dot(y.col(e));
  return out;
}

double TvOperator::tv_value(const Eigen::VectorXd& x, double alpha) const {
  return alpha * apply(x).colwise().norm().sum();
}

double TvOperator::estimate_norm() const {
  // Power iteration on K^T K.
  Eigen::VectorXd v = Eigen::VectorXd::Ones(n_nodes_);
  v[0] = 2.0;  // break symmetry of constant fields (kernel of K)
  v.normalize();
  double prev = 0.0;
  for (int it = 0; it < 10000; ++it) {
    Eigen::VectorXd w = apply_adjoint(apply(v));
    const double norm = w.norm();
    if (norm == 0.0) return 0.0;
    v = w / norm;
    const double estimate = std::sqrt(norm);
    if (it > 0 && std::abs(estimate - prev) <= 1e-6 * estimate) return estimate;
    prev = estimate;
  }
  throw NumericError("power iteration for |K| did not converge in 1e4 iterations");
}

Eigen::VectorXd prox_box(const Eigen::VectorXd& x, double lower, double upper) {
  if (!(lower < upper)) throw ParameterError("prox_box requires lower < upper");
  return x.cwiseMax(lower).cwiseMin(upper);
}

DualField prox_dual_ball(const DualField& y, double alpha) {
  if (!(alpha > 0.0)) throw ParameterError("prox_dual_ball requires alpha > 0");
  DualField out = y;
  for (long e = 0; e < out.cols(); ++e) {
    const double norm = out.col(e).norm();
    if (norm > alpha) out.col(e) *= alpha / norm;
  }
  return out;
}

}  // namespace dyneit
