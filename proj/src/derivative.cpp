#include "dyneit/derivative.hpp"

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <limits>

namespace dyneit {

namespace {

// Element gradient of a nodal field restricted to element t.
Vec2 element_gradient(const Mesh& mesh, const ElementGeometry& geom, int t,
                      const Eigen::VectorXd& u) {
  Vec2 g = Vec2::Zero();
  for (int i = 0; i < 3; ++i) g += u[mesh.triangles[t][i]] * geom.hat_gradients[t][i];
  return g;
}

// Weak right-hand side r_j = -int h grad(u) . grad(phi_j), exact for
// piecewise-linear h through the element mean.
Eigen::VectorXd weak_rhs(const CemSystem& system, const Eigen::VectorXd& h,
                         const Eigen::VectorXd& u) {
  const Mesh& mesh = system.mesh();
  const ElementGeometry& geom = system.geometry();
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(mesh.node_count());
  for (int t = 0; t < mesh.element_count(); ++t) {
    const auto& tri = mesh.triangles[t];
    const double h_mean = (h[tri[0]] + h[tri[1]] + h[tri[2]]) / 3.0;
    if (h_mean == 0.0) continue;
    const Vec2 grad_u = element_gradient(mesh, geom, t, u);
    const double coeff = -h_mean * geom.area[t];
    for (int i = 0; i < 3; ++i) rhs[tri[i]] += coeff * grad_u.dot(geom.hat_gradients[t][i]);
  }
  return rhs;
}

Eigen::VectorXd extract_currents(const CemSystem& system, const Eigen::VectorXd& u) {
  const int n1 = system.mesh().electrode_count();
  Eigen::VectorXd currents(n1);
  for (int i = 0; i < n1; ++i) currents[i] = system.electrode_functional(i).dot(u);
  return currents;
}

}  // namespace

CemSolution directional_derivative(const CemSystem& system, const CemSolution& base,
                                   const ExcitationPattern&, const Eigen::VectorXd& h) {
  if (base.potential.size() != system.mesh().node_count())
    throw NumericError("directional derivative requires the base CEM solution");
  if (h.size() != system.mesh().node_count())
    throw ShapeError("direction field size does not match mesh node count");
  CemSolution derivative;
  derivative.potential = system.solve(weak_rhs(system, h, base.potential));
  // The excitation potentials do not depend on x, so only the boundary
  // integral of u' contributes to the current derivative.
  derivative.currents = extract_currents(system, derivative.potential);
  return derivative;
}

CemSolution second_directional(const CemSystem& system, const CemSolution& base,
                               const ExcitationPattern& pattern, const Eigen::VectorXd& h1,
                               const Eigen::VectorXd& h2) {
  const CemSolution d1 = directional_derivative(system, base, pattern, h1);
  const CemSolution d2 = directional_derivative(system, base, pattern, h2);
  const Eigen::VectorXd rhs =
      weak_rhs(system, h1, d2.potential) + weak_rhs(system, h2, d1.potential);
  CemSolution second;
  second.potential = system.solve(rhs);
  second.currents = extract_currents(system, second.potential);
  return second;
}

Jacobian jacobian(const CemSystem& system, const std::vector<ExcitationPattern>& patterns,
                  double precision_scale) {
  const Mesh& mesh = system.mesh();
  const ElementGeometry& geom = system.geometry();
  const int n1 = mesh.electrode_count();
  const int n_nodes = mesh.node_count();

  // Forward solutions per pattern and adjoint solutions per current
  // functional. For the canonical patterns these coincide, but we keep the
  // two roles separate.
  std::vector<Eigen::VectorXd> forward(patterns.size());
  for (size_t j = 0; j < patterns.size(); ++j)
    forward[j] = system.solve_pattern(patterns[j]).potential;
  std::vector<Eigen::VectorXd> adjoint(n1);
  for (int i = 0; i < n1; ++i) adjoint[i] = system.solve(system.electrode_functional(i));

  int rows = 0;
  for (const auto& p : patterns) rows += (p.excited >= 0) ? n1 - 1 : n1;

  Jacobian jac;
  jac.matrix.setZero(rows, n_nodes);
  int row = 0;
  for (size_t j = 0; j < patterns.size(); ++j) {
    std::vector<Vec2> grad_fwd(mesh.element_count());
    for (int t = 0; t < mesh.element_count(); ++t)
      grad_fwd[t] = element_gradient(mesh, geom, t, forward[j]);
    for (int i = 0; i < n1; ++i) {
      if (i == patterns[j].excited) continue;
      auto out = jac.matrix.row(row++);
      for (int t = 0; t < mesh.element_count(); ++t) {
        const Vec2 grad_adj = element_gradient(mesh, geom, t, adjoint[i]);
        const double val = -precision_scale * geom.area[t] / 3.0 * grad_fwd[t].dot(grad_adj);
        const auto& tri = mesh.triangles[t];
        out[tri[0]] += val;
        out[tri[1]] += val;
        out[tri[2]] += val;
      }
    }
  }
  return jac;
}

Jacobian jacobian(const Mesh& mesh, const ElementGeometry& geom, const ConductivityField& x,
                  const std::vector<ExcitationPattern>& patterns, double precision_scale) {
  CemSystem system(mesh, geom);
  system.factorize(x);
  Jacobian jac = jacobian(system, patterns, precision_scale);
  jac.linearization_point = x.values;
  return jac;
}

Eigen::VectorXd grad_E(const Jacobian& jac, const Eigen::VectorXd& residual) {
  if (residual.size() != jac.matrix.rows())
    throw ShapeError("residual length does not match Jacobian row count");
  return jac.matrix.transpose() * residual;
}

Eigen::MatrixXd fd_jacobian(const Mesh& mesh, const ElementGeometry& geom,
                            const ConductivityField& x,
                            const std::vector<ExcitationPattern>& patterns,
                            double precision_scale, double step_rel) {
  if (step_rel <= 0.0) step_rel = std::cbrt(std::numeric_limits<double>::epsilon());
  CemSystem system(mesh, geom);
  Eigen::MatrixXd jac;
  ConductivityField probe = x;
  for (int n = 0; n < mesh.node_count(); ++n) {
    const double step = step_rel * std::max(1.0, std::abs(x.values[n]));
    probe.values = x.values;
    probe.values[n] = x.values[n] + step;
    system.factorize(probe);
    const Eigen::VectorXd plus = forward_map(system, patterns, precision_scale).values;
    probe.values[n] = x.values[n] - step;
    system.factorize(probe);
    const Eigen::VectorXd minus = forward_map(system, patterns, precision_scale).values;
    if (jac.size() == 0) jac.setZero(plus.size(), mesh.node_count());
    jac.col(n) = (plus - minus) / (2.0 * step);
  }
  return jac;
}

namespace {
constexpr char kJacobianMagic[8] = {'D', 'E', 'I', 'T', 'J', 'A', 'C', '1'};
}

void save_jacobian(const Jacobian& jac, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write jacobian file " + path);
  out.write(kJacobianMagic, 8);
  const int32_t rows = static_cast<int32_t>(jac.matrix.rows());
  const int32_t cols = static_cast<int32_t>(jac.matrix.cols());
  out.write(reinterpret_cast<const char*>(&rows), 4);
  out.write(reinterpret_cast<const char*>(&cols), 4);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) {
      const double v = jac.matrix(r, c);
      out.write(reinterpret_cast<const char*>(&v), 8);
    }
  if (!out) throw Error("failed writing jacobian file " + path);
}

Jacobian load_jacobian(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open jacobian file " + path);
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, kJacobianMagic, 8) != 0)
    throw ParseError(path + ": bad jacobian magic");
  int32_t rows = 0, cols = 0;
  in.read(reinterpret_cast<char*>(&rows), 4);
  in.read(reinterpret_cast<char*>(&cols), 4);
  if (!in || rows < 0 || cols < 0) throw ParseError(path + ": bad jacobian header");
  Jacobian jac;
  jac.matrix.resize(rows, cols);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) {
      double v;
      in.read(reinterpret_cast<char*>(&v), 8);
      if (!in) throw ParseError(path + ": truncated jacobian data");
      jac.matrix(r, c) = v;
    }
  return jac;
}

}  // namespace dyneit
