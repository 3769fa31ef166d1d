#include <Eigen/Dense>
#include <chrono>
#include <random>

#include "doctest.h"
#include "dyneit/lagged.hpp"

using namespace dyneit;

namespace {

// Linear engine S(x) = A x; Taylor expansions are exact for it.
struct LinearStub {
  Eigen::MatrixXd a;
  LinearizationEngine engine() const {
    return {[this](const Eigen::VectorXd& x) { return Eigen::VectorXd(a * x); },
            [this](const Eigen::VectorXd&) { return a; }};
  }
};

LinearStub make_stub(int m, int n, unsigned seed) {
  std::mt19937 rng(seed);
  std::normal_distribution<double> gauss;
  LinearStub stub;
  stub.a.resize(m, n);
  for (int r = 0; r < m; ++r)
    for (int c = 0; c < n; ++c) stub.a(r, c) = gauss(rng);
  return stub;
}

// Small CEM engine for nonlinearity-sensitive checks.
struct CemStub {
  Mesh mesh = build_disk_mesh(1.0, 120, 8, 0.5);
  ElementGeometry geom = element_geometry(mesh);
  std::vector<ExcitationPattern> patterns = standard_patterns(8);
  double scale = 200.0;

  Eigen::VectorXd forward(const Eigen::VectorXd& v) const {
    ConductivityField x;
    x.values = v;
    return forward_map(mesh, geom, x, patterns, scale).values;
  }
  Eigen::MatrixXd jac(const Eigen::VectorXd& v) const {
    ConductivityField x;
    x.values = v;
    return jacobian(mesh, geom, x, patterns, scale).matrix;
  }
  LinearizationEngine engine() const {
    return {[this](const Eigen::VectorXd& v) { return forward(v); },
            [this](const Eigen::VectorXd& v) { return jac(v); }};
  }
  Eigen::VectorXd bump(double amplitude) const {
    Eigen::VectorXd h(mesh.node_count());
    for (int i = 0; i < mesh.node_count(); ++i)
      h[i] = amplitude * std::exp(-(mesh.nodes[i] - Vec2(0.2, 0.1)).squaredNorm() / 0.1);
    return h;
  }
};

}  // namespace

TEST_SUITE_BEGIN("lagged");

TEST_CASE("taylor estimate is exact at the linearization point and for linear maps") {
  LinearStub stub = make_stub(12, 8, 3);
  Eigen::VectorXd x0 = Eigen::VectorXd::Ones(8);
  LinearizationSnapshot snapshot;
  snapshot.x_lin = x0;
  snapshot.forward = stub.a * x0;
  snapshot.jac.matrix = stub.a;

  CHECK(approx_forward(snapshot, x0) == snapshot.forward);

  std::mt19937 rng(4);
  std::normal_distribution<double> gauss;
  Eigen::VectorXd x(8);
  for (int i = 0; i < 8; ++i) x[i] = gauss(rng);
  CHECK((approx_forward(snapshot, x) - stub.a * x).cwiseAbs().maxCoeff() <= 1e-13);
}

TEST_CASE("taylor error grows quadratically on the CEM") {
  CemStub cem;
  Eigen::VectorXd x0 = Eigen::VectorXd::Ones(cem.mesh.node_count());
  LinearizationSnapshot snapshot;
  snapshot.x_lin = x0;
  snapshot.forward = cem.forward(x0);
  snapshot.jac.matrix = cem.jac(x0);

  Eigen::VectorXd direction = cem.bump(1.0);
  std::vector<double> scales = {0.2, 0.1, 0.05, 0.025};
  std::vector<double> errors;
  for (double s : scales) {
    Eigen::VectorXd x = x0 + s * direction;
    errors.push_back((approx_forward(snapshot, x) - cem.forward(x)).norm());
  }
  // Halving the distance should quarter the error, within slack.
  for (size_t i = 0; i + 1 < errors.size(); ++i) {
    const double ratio = errors[i] / errors[i + 1];
    CHECK(ratio >= 3.0);
    CHECK(ratio <= 5.0);
  }
}

TEST_CASE("gradient variants agree at the linearization point") {
  CemStub cem;
  Eigen::VectorXd x0 = Eigen::VectorXd::Ones(cem.mesh.node_count());
  LinearizationSnapshot snapshot;
  snapshot.x_lin = x0;
  snapshot.forward = cem.forward(x0);
  snapshot.jac.matrix = cem.jac(x0);

  Eigen::VectorXd b = snapshot.forward;
  b.array() += 0.01;
  Eigen::VectorXd taylor = approx_grad(snapshot, x0, b, GradientVariant::Taylor);
  Eigen::VectorXd appendix = approx_grad(snapshot, x0, b, GradientVariant::Appendix);
  CHECK(taylor == appendix);
}

TEST_CASE("lagged gradient error scales with the lag distance") {
  CemStub cem;
  Eigen::VectorXd x0 = Eigen::VectorXd::Ones(cem.mesh.node_count());
  LinearizationSnapshot snapshot;
  snapshot.x_lin = x0;
  snapshot.forward = cem.forward(x0);
  snapshot.jac.matrix = cem.jac(x0);

  Eigen::VectorXd direction = cem.bump(0.3);
  Eigen::VectorXd b = cem.forward(x0 + 0.5 * direction);

  auto exact_grad = [&](const Eigen::VectorXd& v) {
    return Eigen::VectorXd(cem.jac(v).transpose() * (cem.forward(v) - b));
  };

  double prev_err = 0.0;
  for (double step : {0.05, 0.1, 0.2}) {
    Eigen::VectorXd x = x0 + step * direction;  // snapshot lags by `step`
    const double err =
        (approx_grad(snapshot, x, b, GradientVariant::Taylor) - exact_grad(x)).norm();
    CHECK(err > prev_err);  // monotone in the lag distance
    prev_err = err;
  }

  CHECK(lag_diagnostic(snapshot, x0) == 0.0);
  CHECK(lag_diagnostic(snapshot, x0 + 0.2 * direction) ==
        doctest::Approx((0.2 * direction).norm()).epsilon(1e-12));
}

TEST_CASE("sync protocol: snapshot lags the serve frame by at most 2L") {
  LinearStub stub = make_stub(10, 6, 9);
  LaggedConfig config;
  config.sync_lag = 5;
  config.recompute_tau = false;
  Eigen::VectorXd x0 = Eigen::VectorXd::Ones(6);
  LaggedGradientProvider provider(stub.engine(), config, x0, 0);

  // Independent protocol simulation: the snapshot source advances to the
  // point recorded L serves earlier, every L serves.
  std::mt19937 rng(12);
  std::normal_distribution<double> gauss;
  Eigen::VectorXd b = Eigen::VectorXd::Zero(10);
  long expected_source = 0, expected_pending = 0;
  int countdown = config.sync_lag;
  for (long frame = 1; frame <= 40; ++frame) {
    Eigen::VectorXd x(6);
    for (int i = 0; i < 6; ++i) x[i] = gauss(rng);
    provider.grad(x, b, frame);
    if (--countdown <= 0) {
      expected_source = expected_pending;
      expected_pending = frame;
      countdown = config.sync_lag;
    }
    CHECK(provider.snapshot()->source_frame == expected_source);
    CHECK(frame - provider.snapshot()->source_frame <= 2 * config.sync_lag);
  }
}

TEST_CASE("sync L=0 on a linear problem reproduces the exact gradient bitwise") {
  LinearStub stub = make_stub(14, 9, 21);
  LaggedConfig config;
  config.sync_lag = 0;
  config.recompute_tau = false;
  Eigen::VectorXd x0 = Eigen::VectorXd::Ones(9);
  LaggedGradientProvider provider(stub.engine(), config, x0, 0);

  std::mt19937 rng(2);
  std::normal_distribution<double> gauss;
  for (long frame = 1; frame <= 10; ++frame) {
    Eigen::VectorXd x(9), b(14);
    for (int i = 0; i < 9; ++i) x[i] = gauss(rng);
    for (int i = 0; i < 14; ++i) b[i] = gauss(rng);
    Eigen::VectorXd lagged = provider.grad(x, b, frame);
    Eigen::VectorXd exact = stub.a.transpose() * (stub.a * x - b);
    CHECK(lagged == exact);
  }
}

TEST_CASE("served forward values audit against a fresh solve at the linearization point") {
  CemStub cem;
  LaggedConfig config;
  config.sync_lag = 3;
  config.recompute_tau = false;
  Eigen::VectorXd x0 = Eigen::VectorXd::Ones(cem.mesh.node_count());
  LaggedGradientProvider provider(cem.engine(), config, x0, 0);
  Eigen::VectorXd b = Eigen::VectorXd::Zero(cem.forward(x0).size());
  for (long frame = 1; frame <= 7; ++frame)
    provider.grad(x0 + 0.01 * frame * cem.bump(1.0), b, frame);
  auto snapshot = provider.snapshot();
  CHECK((snapshot->forward - cem.forward(snapshot->x_lin)).norm() <=
        1e-10 * snapshot->forward.norm());
}

TEST_CASE("refresh failure keeps serving the stale snapshot with a warning") {
  int calls = 0;
  LinearStub stub = make_stub(8, 5, 5);
  LinearizationEngine flaky{
      [&](const Eigen::VectorXd& x) -> Eigen::VectorXd {
        if (++calls > 1) throw NumericError("injected failure");
        return stub.a * x;
      },
      [&](const Eigen::VectorXd&) { return stub.a; }};

  LaggedConfig config;
  config.sync_lag = 2;
  config.recompute_tau = false;
  Eigen::VectorXd x0 = Eigen::VectorXd::Ones(5);
  LaggedGradientProvider provider(flaky, config, x0, 0);
  auto first = provider.snapshot();

  Eigen::VectorXd b = Eigen::VectorXd::Zero(8);
  for (long frame = 1; frame <= 6; ++frame)
    CHECK_NOTHROW(provider.grad(Eigen::VectorXd::Constant(5, 1.0 + 0.1 * frame), b, frame));
  CHECK(provider.snapshot() == first);  // still the original snapshot
  CHECK(provider.warnings().size() > 0);
}

TEST_CASE("async mode publishes refreshed snapshots and shuts down cleanly") {
  LinearStub stub = make_stub(8, 5, 7);
  LaggedConfig config;
  config.mode = LaggedConfig::Mode::Async;
  config.recompute_tau = false;
  Eigen::VectorXd x0 = Eigen::VectorXd::Ones(5);
  LaggedGradientProvider provider(stub.engine(), config, x0, 0);

  Eigen::VectorXd b = Eigen::VectorXd::Zero(8);
  Eigen::VectorXd x = Eigen::VectorXd::Constant(5, 2.0);
  provider.grad(x, b, 1);
  const auto deadline = std::chrono::steady_clock::now() + std::chrono::seconds(5);
  while (std::chrono::steady_clock::now() < deadline) {
    if (provider.snapshot()->x_lin == x) break;
    std::this_thread::sleep_for(std::chrono::milliseconds(1));
  }
  CHECK(provider.snapshot()->x_lin == x);
}

TEST_SUITE_END();
