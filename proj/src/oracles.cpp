#include "dyneit/oracles.hpp"

#include <chrono>
#include <cmath>
#include <random>

#include "dyneit/derivative.hpp"
#include "dyneit/predictors.hpp"
#include "dyneit/tv.hpp"

namespace dyneit {

double brute_force_box_prox(double v, double lower, double upper) {
  double lo = lower, hi = upper;
  double best = lo, best_val = std::numeric_limits<double>::infinity();
  for (int level = 0; level < 12; ++level) {
    const int points = 101;
    for (int i = 0; i < points; ++i) {
      const double t = lo + (hi - lo) * i / (points - 1);
      const double val = 0.5 * (t - v) * (t - v);
      if (val < best_val) {
        best_val = val;
        best = t;
      }
    }
    const double span = (hi - lo) / (points - 1);
    lo = std::max(lower, best - span);
    hi = std::min(upper, best + span);
    if (hi - lo < 1e-12) break;
  }
  return best;
}

Vec2 brute_force_ball_prox(const Vec2& v, double alpha) {
  double lo_x = -alpha, hi_x = alpha, lo_y = -alpha, hi_y = alpha;
  Vec2 best = Vec2::Zero();
  double best_val = std::numeric_limits<double>::infinity();
  for (int level = 0; level < 10; ++level) {
    const int points = 41;
    for (int i = 0; i < points; ++i)
      for (int j = 0; j < points; ++j) {
        Vec2 t(lo_x + (hi_x - lo_x) * i / (points - 1), lo_y + (hi_y - lo_y) * j / (points - 1));
        if (t.norm() > alpha) t *= alpha / t.norm();  // clamp grid corners onto the disk
        const double val = 0.5 * (t - v).squaredNorm();
        if (val < best_val) {
          best_val = val;
          best = t;
        }
      }
    const double span_x = (hi_x - lo_x) / (points - 1);
    const double span_y = (hi_y - lo_y) / (points - 1);
    lo_x = std::max(-alpha, best.x() - span_x);
    hi_x = std::min(alpha, best.x() + span_x);
    lo_y = std::max(-alpha, best.y() - span_y);
    hi_y = std::min(alpha, best.y() + span_y);
    if (std::max(hi_x - lo_x, hi_y - lo_y) < 1e-12) break;
  }
  return best;
}

GradientCheckResult gradient_fd_check(int mesh_target, double step_rel) {
  const auto start = std::chrono::steady_clock::now();
  Mesh mesh = build_disk_mesh(1.0, mesh_target, 16, 0.5);
  ElementGeometry geom = element_geometry(mesh);
  ConductivityField x;
  x.values = Eigen::VectorXd::Ones(mesh.node_count());
  auto patterns = standard_patterns(16);

  CemSystem system(mesh, geom);
  system.factorize(x);
  const Eigen::MatrixXd adjoint = jacobian(system, patterns, 200.0).matrix;
  const Eigen::MatrixXd fd = fd_jacobian(mesh, geom, x, patterns, 200.0, step_rel);

  GradientCheckResult result;
  result.nodes = mesh.node_count();
  result.max_rel_error = (adjoint - fd).cwiseAbs().maxCoeff() / adjoint.cwiseAbs().maxCoeff();
  result.seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return result;
}

ProxCheckResult prox_brute_force_check(int samples, unsigned seed) {
  std::mt19937 rng(seed);
  // Mix of near-bound, inside, and far-outside inputs; default bounds for
  // the box, alpha = 0.5 for the dual ball.
  std::uniform_real_distribution<double> box_input(-3.0, 3.0);
  std::uniform_real_distribution<double> ball_input(-2.0, 2.0);
  std::uniform_int_distribution<int> magnify(0, 3);
  const double lower = 1e-5, upper = 1e5, alpha = 0.5;

  ProxCheckResult result;
  result.samples = samples;
  for (int s = 0; s < samples; ++s) {
    const double scale = std::pow(10.0, 2 * magnify(rng));
    const double v = box_input(rng) * scale;
    Eigen::VectorXd vv = Eigen::VectorXd::Constant(1, v);
    const double closed = prox_box(vv, lower, upper)[0];
    const double brute = brute_force_box_prox(v, lower, upper);
    result.worst_box = std::max(result.worst_box, std::abs(closed - brute));

    const Vec2 y(ball_input(rng), ball_input(rng));
    DualField field(2, 1);
    field.col(0) = y;
    const Vec2 closed_ball = prox_dual_ball(field, alpha).col(0);
    const Vec2 brute_ball = brute_force_ball_prox(y, alpha);
    result.worst_ball = std::max(result.worst_ball, (closed_ball - brute_ball).norm());
  }
  return result;
}

FlowCheckResult flow_recovery_check(int mesh_target) {
  Mesh mesh = build_disk_mesh(1.0, mesh_target, 16, 0.5);
  ElementGeometry geom = element_geometry(mesh);
  // Mean boundary-ring edge length stands in for "mesh edge length".
  double edge = 0.0;
  for (const Edge& e : mesh.boundary_edges) edge += mesh.edge_length(e);
  edge /= static_cast<double>(mesh.boundary_edges.size());

  FlowCheckResult result;
  result.displacement = 3.0 * edge;
  auto bump = [&](Vec2 center) {
    Eigen::VectorXd x(mesh.node_count());
    for (int i = 0; i < mesh.node_count(); ++i)
      x[i] = 1.0 + std::exp(-(mesh.nodes[i] - center).squaredNorm() / (2.0 * 0.35 * 0.35));
    return x;
  };
  const Eigen::VectorXd prev = bump(Vec2(-0.5 * result.displacement, 0.0));
  const Eigen::VectorXd curr = bump(Vec2(0.5 * result.displacement, 0.0));
  const FlowField flow = estimate_flow(curr, prev, 1e-3, 1e-5, mesh, geom);

  Vec2 mean = Vec2::Zero();
  int count = 0;
  for (int i = 0; i < mesh.node_count(); ++i) {
    if (prev[i] - 1.0 > 0.2) {
      mean -= flow.displacement.col(i);  // warp samples backward: motion is -h
      ++count;
    }
  }
  mean /= count;
  result.recovered_deviation =
      (mean - Vec2(result.displacement, 0.0)).norm() / result.displacement;
  return result;
}

}  // namespace dyneit
