#include "dyneit/convex_check.hpp"

#include <Eigen/Dense>
#include <cmath>

namespace dyneit {

ConvexInstance::ConvexInstance(unsigned seed, int mesh_nodes)
    : mesh_(build_disk_mesh(1.0, mesh_nodes, 4, 0.4)), geom_(element_geometry(mesh_)) {
  K_ = std::make_unique<TvOperator>(mesh_, geom_);

  std::mt19937 rng(seed);
  std::normal_distribution<double> gauss;
  const int n = mesh_.node_count();
  const int m = n + n / 4;
  A_.resize(m, n);
  for (int r = 0; r < m; ++r)
    for (int c = 0; c < n; ++c) A_(r, c) = gauss(rng);
  // Scale so |A^T A| = 0.3: with tau = sigma = 1 the metric positivity
  // condition 1 > L + |K|^2 holds comfortably (|K| is small on this mesh).
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(A_.transpose() * A_);
  A_ *= std::sqrt(0.3 / eig.eigenvalues().maxCoeff());
  lipschitz_ = 0.3;

  // Ground pattern: smooth bump on a positive background, strictly inside the
  // box so the saddle sits in the interior of F's domain.
  Eigen::VectorXd x_star(n);
  for (int i = 0; i < n; ++i)
    x_star[i] = 1.0 + std::exp(-(mesh_.nodes[i] - Vec2(0.25, 0.1)).squaredNorm() / 0.08);
  b_ = A_ * x_star;
  for (int i = 0; i < m; ++i) b_[i] += 1e-3 * gauss(rng);
}

PdOps ConvexInstance::ops() const {
  PdOps ops;
  ops.K = [this](const Eigen::VectorXd& x) { return K_->apply(x); };
  ops.K_adjoint = [this](const DualField& y) { return K_->apply_adjoint(y); };
  ops.prox_F = [this](const Eigen::VectorXd& x) { return prox_box(x, lower_, upper_); };
  ops.prox_Gstar = [this](const DualField& y) { return prox_dual_ball(y, alpha_); };
  ops.grad = [this](const Eigen::VectorXd& x, long) { return gradient(x); };
  return ops;
}

GapProblem ConvexInstance::gap_problem() const {
  GapProblem problem;
  problem.energy = [this](const Eigen::VectorXd& x, long) { return energy(x); };
  problem.lower = lower_;
  problem.upper = upper_;
  problem.alpha = alpha_;
  return problem;
}

SaddlePoint solve_saddle_dense(const ConvexInstance& instance) {
  const Eigen::MatrixXd& A = instance.A();
  const TvOperator& K = instance.K();
  const int n = A.cols();
  const long n_el = K.rows() / 2;

  // Closed-form inner minimizer over x (box inactive, checked at the end):
  // x(y) = (A^T A)^{-1} (A^T b - K^T y).
  Eigen::LDLT<Eigen::MatrixXd> ata(A.transpose() * A);
  const Eigen::VectorXd atb = A.transpose() * instance.b();
  auto x_of = [&](const DualField& y) -> Eigen::VectorXd {
    return ata.solve(atb - K.apply_adjoint(y));
  };

  // Lipschitz constant of the dual gradient K (A^T A)^{-1} K^T via a dense
  // eigensolve of the n x n middle factor acting on densified K.
  Eigen::MatrixXd k_dense(2 * n_el, n);
  for (int c = 0; c < n; ++c) {
    Eigen::VectorXd e = Eigen::VectorXd::Zero(n);
    e[c] = 1.0;
    DualField col = K.apply(e);
    for (long el = 0; el < n_el; ++el) {
      k_dense(2 * el, c) = col(0, el);
      k_dense(2 * el + 1, c) = col(1, el);
    }
  }
  Eigen::MatrixXd dual_hessian = k_dense * ata.solve(k_dense.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(dual_hessian);
  const double step = 1.0 / eig.eigenvalues().maxCoeff();

  // FISTA ascent on the concave dual with ball projection.
  DualField y = DualField::Zero(2, n_el), momentum = y;
  double t_prev = 1.0;
  SaddlePoint result;
  for (int it = 0; it < 200000; ++it) {
    DualField y_next = prox_dual_ball(momentum + step * K.apply(x_of(momentum)), instance.alpha());
    const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t_prev * t_prev));
    momentum = y_next + ((t_prev - 1.0) / t_next) * (y_next - y);
    const double change = (y_next - y).norm();
    y = y_next;
    t_prev = t_next;
    result.iterations = it + 1;
    if (change <= 1e-14 * std::max(1.0, y.norm())) break;
  }

  result.u.x = x_of(y);
  result.u.y = y;
  result.box_interior = result.u.x.minCoeff() > instance.lower() + 1e-6 &&
                        result.u.x.maxCoeff() < instance.upper() - 1e-6;

  // Duality-gap certificate: primal value at x(y) minus dual value at y.
  const double primal = instance.energy(result.u.x) + K.tv_value(result.u.x, instance.alpha());
  const double dual = instance.energy(result.u.x) +
                      (K.apply(result.u.x).array() * y.array()).sum();
  result.primal_value = primal;
  result.duality_gap = primal - dual;
  return result;
}

GapBoundReport run_gap_bound_verification(unsigned seed, int frames, double tau, double sigma) {
  ConvexInstance instance(seed, 64);
  const PdOps ops = instance.ops();
  const GapProblem problem = instance.gap_problem();

  StepParams params = StepParams::unaccelerated(tau, sigma, instance.alpha());
  const double k_norm = instance.K().estimate_norm();
  // gamma = rho = lambda_tilde = 0: F and G* are indicators and the convex
  // quadratic E satisfies the global three-point inequality with growth 0 and
  // loss L = |A^T A|.
  const StepCheck precheck = check_step_condition(params, instance.lipschitz(), k_norm);

  const SaddlePoint saddle = solve_saddle_dense(instance);
  const PdMetric metric(ops, params);

  OnlineState state;
  state.frame = 0;
  state.x = Eigen::VectorXd::Constant(instance.mesh().node_count(), 1.0);
  state.y = DualField::Zero(2, instance.mesh().element_count());

  Predictor identity = [](const OnlineState& s) { return std::make_pair(s.x, s.y); };

  GapBoundReport report;
  report.frames = frames;
  report.saddle_duality_gap = saddle.duality_gap;
  PrimalDual init_dev{state.x - saddle.u.x, state.y - saddle.u.y};
  report.init_term = 0.5 * params.eta * metric.norm2_M_plus_Gamma(init_dev);

  for (int k = 1; k <= frames; ++k) {
    const PrimalDual u_prev{state.x, state.y};
    state = popdn_step(state, k, identity, ops, params);
    const PrimalDual u{state.x, state.y};
    const PrimalDual u_pred{state.x_pred, state.y_pred};

    report.gaps.push_back(lagrangian_gap(u, saddle.u, k, ops, problem));
    PrimalDual step_dev{u.x - u_pred.x, u.y - u_pred.y};
    report.step_terms.push_back(0.5 * params.eta *
                                metric.norm2_M_minus_Omega(step_dev, instance.lipschitz()));
    report.eps_dagger.push_back(
        prediction_error(u_prev, u_pred, saddle.u, saddle.u, metric));
    PrimalDual dev{u.x - saddle.u.x, u.y - saddle.u.y};
    report.deviation_M.push_back(std::sqrt(std::max(0.0, metric.norm2_M(dev))));
    report.deviation_M_plus_Gamma.push_back(
        std::sqrt(std::max(0.0, metric.norm2_M_plus_Gamma(dev))));
  }
  for (double g : report.gaps) report.gap_sum += g;
  for (double s : report.step_terms) report.step_sum += s;
  for (double e : report.eps_dagger) report.eps_sum += e;
  report.check = verify_gap_bound(report.gaps, report.step_terms, report.eps_dagger,
                                  report.init_term);
  if (!precheck.global_ok) report.check.pass = false;
  return report;
}

}  // namespace dyneit
