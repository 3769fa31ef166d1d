#include "dyneit/predictors.hpp"

#include <Eigen/SparseCholesky>
#include <cmath>

namespace dyneit {

PredictorKind predictor_kind_from_string(const std::string& name) {
  if (name == "none") return PredictorKind::NoPrediction;
  if (name == "primal") return PredictorKind::PrimalOnly;
  if (name == "greedy") return PredictorKind::Greedy;
  if (name == "affine") return PredictorKind::Affine;
  throw ParameterError("unknown predictor '" + name + "' (none|primal|greedy|affine)");
}

std::string to_string(PredictorKind kind) {
  switch (kind) {
    case PredictorKind::NoPrediction: return "none";
    case PredictorKind::PrimalOnly: return "primal";
    case PredictorKind::Greedy: return "greedy";
    case PredictorKind::Affine: return "affine";
  }
  return "none";
}

void PredictorConfig::validate() const {
  if (!(beta1 > 0.0) || !(beta2 > 0.0))
    throw ParameterError("flow regularization weights must be positive");
  if (flow_cadence < 1) throw ParameterError("flow cadence must be at least 1");
}

FlowField estimate_flow(const Eigen::VectorXd& x_curr, const Eigen::VectorXd& x_prev,
                        double beta1, double beta2, const Mesh& mesh,
                        const ElementGeometry& geom) {
  const int n = mesh.node_count();
  if (x_curr.size() != n || x_prev.size() != n)
    throw ShapeError("flow estimation requires both fields on the mesh");

  // Unknown layout: v1 at [0, n), v2 at [n, 2n).
  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(mesh.element_count() * 40);
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(2 * n);
  const Eigen::VectorXd dx = x_curr - x_prev;

  for (int t = 0; t < mesh.element_count(); ++t) {
    const auto& tri = mesh.triangles[t];
    Vec2 g = Vec2::Zero();
    for (int i = 0; i < 3; ++i) g += x_prev[tri[i]] * geom.hat_gradients[t][i];

    // P1 mass matrix: A/12 * (1 + delta_ij).
    const double a12 = geom.area[t] / 12.0;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) {
        const double mass = a12 * (i == j ? 2.0 : 1.0);
        const double stiff = geom.area[t] * geom.hat_gradients[t][i].dot(geom.hat_gradients[t][j]);
        // Data term (g . v) against (g . v), Tikhonov terms on both components.
        trips.emplace_back(tri[i], tri[j], mass * (g.x() * g.x() + beta2) + beta1 * stiff);
        trips.emplace_back(n + tri[i], n + tri[j], mass * (g.y() * g.y() + beta2) + beta1 * stiff);
        trips.emplace_back(tri[i], n + tri[j], mass * g.x() * g.y());
        trips.emplace_back(n + tri[i], tri[j], mass * g.y() * g.x());
        rhs[tri[i]] += mass * dx[tri[j]] * g.x();
        rhs[n + tri[i]] += mass * dx[tri[j]] * g.y();
      }
  }

  Eigen::SparseMatrix<double> system(2 * n, 2 * n);
  system.setFromTriplets(trips.begin(), trips.end());
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver(system);
  if (solver.info() != Eigen::Success)
    throw NumericError("flow system factorization failed");
  Eigen::VectorXd v = solver.solve(rhs);
  const double rhs_norm = rhs.norm();
  if (rhs_norm > 0.0 && (system * v - rhs).norm() > 1e-10 * rhs_norm) {
    v += solver.solve(rhs - system * v);
    if ((system * v - rhs).norm() > 1e-10 * rhs_norm)
      throw NumericError("flow normal equations residual exceeds 1e-10");
  }

  FlowField flow;
  flow.displacement.resize(2, n);
  flow.displacement.row(0) = v.head(n).transpose();
  flow.displacement.row(1) = v.tail(n).transpose();
  return flow;
}

Eigen::VectorXd warp_primal(const Eigen::VectorXd& x, const FlowField& h, const Mesh& mesh,
                            const PointLocator& locator, double lower, double upper) {
  const int n = mesh.node_count();
  if (x.size() != n || h.displacement.cols() != n)
    throw ShapeError("warp_primal requires nodal field and flow on the mesh");
  Eigen::VectorXd out(n);
  for (int i = 0; i < n; ++i) {
    if (h.displacement(0, i) == 0.0 && h.displacement(1, i) == 0.0) {
      out[i] = std::clamp(x[i], lower, upper);
      continue;
    }
    const Vec2 target = mesh.nodes[i] + Vec2(h.displacement(0, i), h.displacement(1, i));
    if (auto hit = locator.locate(target)) {
      const auto& tri = mesh.triangles[hit->element];
      out[i] = hit->weights[0] * x[tri[0]] + hit->weights[1] * x[tri[1]] +
               hit->weights[2] * x[tri[2]];
    } else {
      out[i] = x[i];
    }
    out[i] = std::clamp(out[i], lower, upper);
  }
  return out;
}

DualField dual_identity(const DualField& y) { return y; }

DualField dual_greedy(const DualField& y, const DualField& grad_old, const DualField& grad_pred,
                      double alpha) {
  if (y.cols() != grad_old.cols() || y.cols() != grad_pred.cols())
    throw ShapeError("dual_greedy requires element-aligned fields");
  DualField out(2, y.cols());
  for (long e = 0; e < y.cols(); ++e) {
    const Vec2 g_pred = grad_pred.col(e);
    const double denom = g_pred.squaredNorm();
    if (denom > 1e-14 * 1e-14) {
      const double preserved = grad_old.col(e).dot(y.col(e));
      out.col(e) = (preserved / denom) * g_pred;
    } else {
      out.col(e) = y.col(e);
    }
  }
  return prox_dual_ball(out, alpha);
}

DualField dual_affine(const DualField& y, const DualField& grad_pred, const FlowField& h,
                      const Mesh& mesh, double alpha, double gain, double threshold) {
  if (y.cols() != grad_pred.cols() || y.cols() != mesh.element_count())
    throw ShapeError("dual_affine requires element-aligned fields");
  DualField out(2, y.cols());
  for (long e = 0; e < y.cols(); ++e) {
    const auto& tri = mesh.triangles[e];
    double h_mean = 0.0;
    for (int i = 0; i < 3; ++i) h_mean += h.displacement.col(tri[i]).norm();
    h_mean /= 3.0;
    const double c = (h_mean == 0.0)
                         ? 0.0
                         : gain * std::pow(std::max(0.0, 1.0 - threshold / h_mean), 2);
    out.col(e) = y.col(e) + c * grad_pred.col(e);
  }
  return prox_dual_ball(out, alpha);
}

FlowPredictor::FlowPredictor(const Mesh& mesh, const ElementGeometry& geom, const TvOperator& tv,
                             PredictorConfig config, double lower, double upper, double alpha)
    : mesh_(mesh),
      geom_(geom),
      tv_(tv),
      locator_(mesh),
      config_(config),
      lower_(lower),
      upper_(upper),
      alpha_(alpha) {
  config_.validate();
}

namespace {

// Raw piecewise-constant spatial gradient per element; the dual predictors
// follow the pointwise grad_xi x convention, not the area-weighted K image.
DualField element_gradients(const Mesh& mesh, const ElementGeometry& geom,
                            const Eigen::VectorXd& x) {
  DualField g(2, mesh.element_count());
  for (int t = 0; t < mesh.element_count(); ++t) {
    Vec2 grad = Vec2::Zero();
    for (int i = 0; i < 3; ++i) grad += x[mesh.triangles[t][i]] * geom.hat_gradients[t][i];
    g.col(t) = grad;
  }
  return g;
}

}  // namespace

std::pair<Eigen::VectorXd, DualField> FlowPredictor::operator()(const OnlineState& state) {
  if (config_.kind == PredictorKind::NoPrediction) return {state.x, dual_identity(state.y)};

  // Flow from the two most recent iterates, re-estimated on the cadence grid
  // and reused bitwise in between.
  const bool have_history = state.x_prev.size() == state.x.size();
  if (have_history && (!flow_ || state.frame % config_.flow_cadence == 0)) {
    flow_ = estimate_flow(state.x, state.x_prev, config_.beta1, config_.beta2, mesh_, geom_);
    flow_->estimated_at = state.frame;
  }
  if (!flow_) {
    FlowField zero;
    zero.displacement = Eigen::Matrix2Xd::Zero(2, mesh_.node_count());
    zero.estimated_at = state.frame;
    flow_ = zero;
  }

  Eigen::VectorXd x_pred = warp_primal(state.x, *flow_, mesh_, locator_, lower_, upper_);
  switch (config_.kind) {
    case PredictorKind::PrimalOnly:
      return {std::move(x_pred), dual_identity(state.y)};
    case PredictorKind::Greedy: {
      DualField y_pred = dual_greedy(state.y, element_gradients(mesh_, geom_, state.x),
                                     element_gradients(mesh_, geom_, x_pred), alpha_);
      return {std::move(x_pred), std::move(y_pred)};
    }
    case PredictorKind::Affine: {
      DualField y_pred = dual_affine(state.y, element_gradients(mesh_, geom_, x_pred), *flow_,
                                     mesh_, alpha_, config_.affine_gain, config_.affine_threshold);
      return {std::move(x_pred), std::move(y_pred)};
    }
    default:
      return {state.x, state.y};
  }
}

}  // namespace dyneit
