#include <Eigen/Dense>
#include <cmath>
#include <random>

#include "doctest.h"
#include "dyneit/predictors.hpp"

using namespace dyneit;

namespace {

struct Setup {
  Mesh mesh;
  ElementGeometry geom;
  TvOperator tv;
  PointLocator locator;
  explicit Setup(int target = 817)
      : mesh(build_disk_mesh(1.0, target, 16, 0.5)),
        geom(element_geometry(mesh)),
        tv(mesh, geom),
        locator(mesh) {}
};

Eigen::VectorXd gaussian_bump(const Mesh& mesh, Vec2 center, double sigma, double amplitude,
                              double background) {
  Eigen::VectorXd x(mesh.node_count());
  for (int i = 0; i < mesh.node_count(); ++i)
    x[i] = background +
           amplitude * std::exp(-(mesh.nodes[i] - center).squaredNorm() / (2.0 * sigma * sigma));
  return x;
}

// Independent quadrature evaluation of the flow objective (edge-midpoint rule,
// exact for the piecewise-quadratic integrands).
double flow_objective(const Mesh& mesh, const ElementGeometry& geom,
                      const Eigen::VectorXd& x_curr, const Eigen::VectorXd& x_prev,
                      const Eigen::Matrix2Xd& v, double beta1, double beta2) {
  double value = 0.0;
  for (int t = 0; t < mesh.element_count(); ++t) {
    const auto& tri = mesh.triangles[t];
    Vec2 g = Vec2::Zero();
    Vec2 grad_v1 = Vec2::Zero(), grad_v2 = Vec2::Zero();
    for (int i = 0; i < 3; ++i) {
      g += x_prev[tri[i]] * geom.hat_gradients[t][i];
      grad_v1 += v(0, tri[i]) * geom.hat_gradients[t][i];
      grad_v2 += v(1, tri[i]) * geom.hat_gradients[t][i];
    }
    double data = 0.0, ridge = 0.0;
    for (int i = 0; i < 3; ++i) {
      const int a = tri[i], b = tri[(i + 1) % 3];
      const double dx_mid = 0.5 * ((x_curr[a] - x_prev[a]) + (x_curr[b] - x_prev[b]));
      const Vec2 v_mid = 0.5 * (v.col(a) + v.col(b));
      const double r = dx_mid - g.dot(v_mid);
      data += r * r;
      ridge += v_mid.squaredNorm();
    }
    value += 0.5 * geom.area[t] / 3.0 * data;
    value += 0.5 * beta1 * geom.area[t] * (grad_v1.squaredNorm() + grad_v2.squaredNorm());
    value += 0.5 * beta2 * geom.area[t] / 3.0 * ridge;
  }
  return value;
}

}  // namespace

TEST_SUITE_BEGIN("predictors");

TEST_CASE("identical frames give zero flow") {
  Setup s(300);
  Eigen::VectorXd x = gaussian_bump(s.mesh, Vec2(0.2, 0.0), 0.3, 1.0, 1.0);
  FlowField flow = estimate_flow(x, x, 1e-3, 1e-5, s.mesh, s.geom);
  CHECK(flow.displacement.cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("ridge dominance: flow norm decreases monotonically in beta2") {
  Setup s(300);
  Eigen::VectorXd prev = gaussian_bump(s.mesh, Vec2(-0.1, 0.0), 0.3, 1.0, 1.0);
  Eigen::VectorXd curr = gaussian_bump(s.mesh, Vec2(-0.04, 0.0), 0.3, 1.0, 1.0);
  double last = std::numeric_limits<double>::infinity();
  for (double beta2 : {1e-5, 1e-2, 1.0, 1e2, 1e8}) {
    FlowField flow = estimate_flow(curr, prev, 1e-3, beta2, s.mesh, s.geom);
    const double norm = flow.displacement.norm();
    CHECK(norm < last + 1e-15);
    last = norm;
  }
  CHECK(last <= 1e-6);
}

TEST_CASE("flow solution minimizes the quadrature objective") {
  Setup s(300);
  Eigen::VectorXd prev = gaussian_bump(s.mesh, Vec2(-0.1, 0.05), 0.35, 1.0, 1.0);
  Eigen::VectorXd curr = gaussian_bump(s.mesh, Vec2(-0.03, 0.05), 0.35, 1.0, 1.0);
  FlowField flow = estimate_flow(curr, prev, 1e-3, 1e-5, s.mesh, s.geom);

  const double at_solution =
      flow_objective(s.mesh, s.geom, curr, prev, flow.displacement, 1e-3, 1e-5);
  std::mt19937 rng(7);
  std::normal_distribution<double> gauss;
  for (int trial = 0; trial < 5; ++trial) {
    Eigen::Matrix2Xd perturbed = flow.displacement;
    for (long c = 0; c < perturbed.cols(); ++c)
      perturbed.col(c) += 1e-3 * Vec2(gauss(rng), gauss(rng));
    CHECK(flow_objective(s.mesh, s.geom, curr, prev, perturbed, 1e-3, 1e-5) >=
          at_solution - 1e-14);
  }
}

TEST_CASE("translated bump: recovered displacement within 20 percent") {
  Setup s;  // desk-scale mesh, edge length ~ 1/16
  const double edge = 1.0 / 16.0;
  const double d = 3.0 * edge;
  Eigen::VectorXd prev = gaussian_bump(s.mesh, Vec2(-0.5 * d, 0.0), 0.35, 1.0, 1.0);
  Eigen::VectorXd curr = gaussian_bump(s.mesh, Vec2(0.5 * d, 0.0), 0.35, 1.0, 1.0);
  FlowField flow = estimate_flow(curr, prev, 1e-3, 1e-5, s.mesh, s.geom);

  // The warp convention samples backward: the estimated motion is -h. Average
  // over the bump support (amplitude above 20% of peak).
  Vec2 mean = Vec2::Zero();
  int count = 0;
  for (int i = 0; i < s.mesh.node_count(); ++i) {
    if (prev[i] - 1.0 > 0.2) {
      mean -= flow.displacement.col(i);
      ++count;
    }
  }
  mean /= count;
  CHECK((mean - Vec2(d, 0.0)).norm() <= 0.2 * d);
}

TEST_CASE("warp with zero flow is exact and constants are invariant") {
  Setup s(300);
  FlowField zero;
  zero.displacement = Eigen::Matrix2Xd::Zero(2, s.mesh.node_count());
  Eigen::VectorXd x = gaussian_bump(s.mesh, Vec2(0.1, -0.2), 0.25, 1.0, 1.0);
  Eigen::VectorXd warped = warp_primal(x, zero, s.mesh, s.locator, 1e-5, 1e5);
  CHECK(warped == x);

  FlowField some;
  some.displacement = Eigen::Matrix2Xd::Constant(2, s.mesh.node_count(), 0.07);
  Eigen::VectorXd constant = Eigen::VectorXd::Constant(s.mesh.node_count(), 2.0);
  Eigen::VectorXd warped_const = warp_primal(constant, some, s.mesh, s.locator, 1e-5, 1e5);
  CHECK((warped_const.array() - 2.0).abs().maxCoeff() <= 1e-12);
}

TEST_CASE("warp shifts a linear field exactly at interior nodes") {
  Setup s(300);
  const double d = 0.05;
  FlowField h;
  h.displacement = Eigen::Matrix2Xd::Zero(2, s.mesh.node_count());
  h.displacement.row(0).setConstant(d);
  Eigen::VectorXd x(s.mesh.node_count());
  for (int i = 0; i < s.mesh.node_count(); ++i) x[i] = s.mesh.nodes[i].x();
  Eigen::VectorXd warped = warp_primal(x, h, s.mesh, s.locator, -10.0, 10.0);
  for (int i = 0; i < s.mesh.node_count(); ++i) {
    if (s.mesh.nodes[i].norm() < 1.0 - 2.0 * d)
      CHECK(warped[i] == doctest::Approx(x[i] + d).epsilon(1e-10));
  }
}

TEST_CASE("greedy dual preserves the element inner product") {
  std::mt19937 rng(3);
  std::normal_distribution<double> gauss;
  const long m = 40;
  DualField y(2, m), g_old(2, m), g_pred(2, m);
  for (long e = 0; e < m; ++e) {
    y.col(e) = 0.05 * Vec2(gauss(rng), gauss(rng));  // small so projection stays off
    g_old.col(e) = Vec2(gauss(rng), gauss(rng));
    g_pred.col(e) = Vec2(gauss(rng), gauss(rng));
  }
  const double alpha = 0.5;
  DualField out = dual_greedy(y, g_old, g_pred, alpha);
  for (long e = 0; e < m; ++e) {
    if (out.col(e).norm() < alpha - 1e-12)  // no clipping
      CHECK(g_pred.col(e).dot(out.col(e)) ==
            doctest::Approx(g_old.col(e).dot(y.col(e))).epsilon(1e-12));
    CHECK(out.col(e).norm() <= alpha + 1e-12);
  }

  // Same gradient: the parallel component with the same inner product.
  DualField same = dual_greedy(y, g_old, g_old, alpha);
  for (long e = 0; e < m; ++e)
    CHECK(g_old.col(e).dot(same.col(e)) == doctest::Approx(g_old.col(e).dot(y.col(e))).epsilon(1e-12));

  // Orthogonal dual: zero prediction on elements with nonzero gradient.
  DualField ortho(2, 1), g1(2, 1), g2(2, 1);
  g1.col(0) = Vec2(1.0, 0.0);
  g2.col(0) = Vec2(0.0, 2.0);
  ortho.col(0) = Vec2(0.3, 0.0);  // orthogonal to g2's direction after transfer
  DualField res = dual_greedy(ortho, g2, g1, alpha);
  CHECK(res.col(0).norm() <= 1e-14);
}

TEST_CASE("affine dual gain follows the flow-gated formula") {
  Mesh mesh = build_disk_mesh(1.0, 64, 4, 0.4);
  ElementGeometry geom = element_geometry(mesh);
  const long m = mesh.element_count();
  DualField y = DualField::Zero(2, m), g = DualField::Zero(2, m);
  for (long e = 0; e < m; ++e) g.col(e) = Vec2(0.01, 0.0);

  FlowField h;
  const double alpha = 0.5;

  // |h| = 0 everywhere: c = 0, y unchanged.
  h.displacement = Eigen::Matrix2Xd::Zero(2, mesh.node_count());
  CHECK((dual_affine(y, g, h, mesh, alpha, 10.0, 1e-12) - y).cwiseAbs().maxCoeff() == 0.0);

  // |h| = 2e-12: c = 10 (1 - 0.5)^2 = 2.5.
  h.displacement = Eigen::Matrix2Xd::Zero(2, mesh.node_count());
  h.displacement.row(0).setConstant(2e-12);
  DualField mid = dual_affine(y, g, h, mesh, alpha, 10.0, 1e-12);
  for (long e = 0; e < m; ++e) CHECK(mid(0, e) == doctest::Approx(2.5 * 0.01).epsilon(1e-9));

  // |h| >> threshold: c -> 10.
  h.displacement.row(0).setConstant(1e-3);
  DualField big = dual_affine(y, g, h, mesh, alpha, 10.0, 1e-12);
  for (long e = 0; e < m; ++e) CHECK(big(0, e) == doctest::Approx(10.0 * 0.01).epsilon(1e-8));

  // Feasibility always holds after projection.
  DualField far = DualField::Constant(2, m, 10.0);
  CHECK(dual_affine(far, g, h, mesh, alpha, 10.0, 1e-12).colwise().norm().maxCoeff() <=
        alpha + 1e-12);
}

TEST_CASE("predictor dispatch honors kind and cadence") {
  Setup s(300);
  PredictorConfig config;
  config.kind = PredictorKind::NoPrediction;
  FlowPredictor none(s.mesh, s.geom, s.tv, config, 1e-5, 1e5, 0.5);

  OnlineState state;
  state.frame = 5;
  state.x = gaussian_bump(s.mesh, Vec2(0.0, 0.1), 0.3, 1.0, 1.0);
  state.x_prev = gaussian_bump(s.mesh, Vec2(-0.05, 0.1), 0.3, 1.0, 1.0);
  state.y = DualField::Zero(2, s.mesh.element_count());

  auto [x_np, y_np] = none(state);
  CHECK(x_np == state.x);
  CHECK(y_np == state.y);

  config.kind = PredictorKind::PrimalOnly;
  FlowPredictor primal(s.mesh, s.geom, s.tv, config, 1e-5, 1e5, 0.5);

  // Frame 5 is off-cadence: no history cache yet, so the flow is estimated
  // once, then frames 6,7 reuse it bitwise; frame 8 re-estimates.
  auto first = primal(state);
  REQUIRE(primal.cached_flow().has_value());
  Eigen::Matrix2Xd cached = primal.cached_flow()->displacement;

  state.frame = 6;
  state.x = gaussian_bump(s.mesh, Vec2(0.01, 0.1), 0.3, 1.0, 1.0);
  primal(state);
  CHECK(primal.cached_flow()->displacement == cached);
  state.frame = 7;
  primal(state);
  CHECK(primal.cached_flow()->displacement == cached);
  state.frame = 8;  // cadence frame with changed inputs: re-estimated
  primal(state);
  CHECK(primal.cached_flow()->displacement != cached);

  // PrimalOnly with zero flow equals NoPrediction.
  OnlineState still = state;
  still.frame = 4;  // cadence frame, x == x_prev forces zero flow
  still.x_prev = still.x;
  FlowPredictor primal2(s.mesh, s.geom, s.tv, config, 1e-5, 1e5, 0.5);
  auto [x_pp, y_pp] = primal2(still);
  CHECK((x_pp - still.x).cwiseAbs().maxCoeff() <= 1e-12);
  CHECK(y_pp == still.y);
}

TEST_CASE("all dual predictors keep the dual feasible") {
  Setup s(300);
  std::mt19937 rng(9);
  std::normal_distribution<double> gauss;
  const double alpha = 0.5;
  OnlineState state;
  state.frame = 4;
  state.x = gaussian_bump(s.mesh, Vec2(0.05, 0.0), 0.25, 1.5, 1.0);
  state.x_prev = gaussian_bump(s.mesh, Vec2(0.0, 0.0), 0.25, 1.5, 1.0);
  state.y.resize(2, s.mesh.element_count());
  for (long e = 0; e < state.y.cols(); ++e) {
    state.y.col(e) = alpha * Vec2(gauss(rng), gauss(rng));
  }
  state.y = prox_dual_ball(state.y, alpha);

  for (PredictorKind kind : {PredictorKind::Greedy, PredictorKind::Affine}) {
    PredictorConfig config;
    config.kind = kind;
    FlowPredictor predictor(s.mesh, s.geom, s.tv, config, 1e-5, 1e5, alpha);
    auto [x_pred, y_pred] = predictor(state);
    CHECK(y_pred.colwise().norm().maxCoeff() <= alpha + 1e-12);
    CHECK(x_pred.minCoeff() >= 1e-5);
    CHECK(x_pred.maxCoeff() <= 1e5);
  }
}

TEST_SUITE_END();
