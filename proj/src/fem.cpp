#include "dyneit/fem.hpp"

#include <cmath>

namespace dyneit {

void ConductivityField::validate() const {
  if (!(lower > 0.0) || !(lower < upper))
    throw ParameterError("conductivity bounds must satisfy 0 < lower < upper");
  if (values.size() == 0) throw ParameterError("empty conductivity field");
  const double lo = values.minCoeff(), hi = values.maxCoeff();
  if (lo < lower || hi > upper)
    throw ParameterError("conductivity leaves [" + std::to_string(lower) + ", " +
                         std::to_string(upper) + "]: range [" + std::to_string(lo) + ", " +
                         std::to_string(hi) + "]");
  if (!values.allFinite()) throw ParameterError("conductivity contains non-finite values");
}

std::vector<ExcitationPattern> standard_patterns(int n_electrodes) {
  std::vector<ExcitationPattern> patterns(n_electrodes);
  for (int j = 0; j < n_electrodes; ++j) {
    patterns[j].potentials = Eigen::VectorXd::Zero(n_electrodes);
    patterns[j].potentials[j] = 1.0;
    patterns[j].excited = j;
  }
  return patterns;
}

namespace {

// Triplets of the electrode Robin part sum_i zeta_i^{-1} int_{e_i} phi phi ds.
// Edge mass matrix on an edge of length l: [l/3, l/6; l/6, l/3].
Eigen::SparseMatrix<double> assemble_robin(const Mesh& mesh) {
  std::vector<Eigen::Triplet<double>> trips;
  for (int i = 0; i < mesh.electrode_count(); ++i) {
    const double inv_zeta = 1.0 / mesh.contact_impedances[i];
    for (const Edge& e : mesh.electrodes[i]) {
      const double l = mesh.edge_length(e);
      trips.emplace_back(e.a, e.a, inv_zeta * l / 3.0);
      trips.emplace_back(e.b, e.b, inv_zeta * l / 3.0);
      trips.emplace_back(e.a, e.b, inv_zeta * l / 6.0);
      trips.emplace_back(e.b, e.a, inv_zeta * l / 6.0);
    }
  }
  Eigen::SparseMatrix<double> robin(mesh.node_count(), mesh.node_count());
  robin.setFromTriplets(trips.begin(), trips.end());
  return robin;
}

Eigen::SparseMatrix<double> assemble_stiffness(const Mesh& mesh, const ElementGeometry& geom,
                                               const Eigen::VectorXd& x) {
  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(mesh.element_count() * 9);
  for (int t = 0; t < mesh.element_count(); ++t) {
    const auto& tri = mesh.triangles[t];
    // Piecewise-linear x integrates exactly through the element mean.
    const double coeff = (x[tri[0]] + x[tri[1]] + x[tri[2]]) / 3.0 * geom.area[t];
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j)
        trips.emplace_back(tri[i], tri[j], coeff * geom.hat_gradients[t][i].dot(geom.hat_gradients[t][j]));
  }
  Eigen::SparseMatrix<double> stiff(mesh.node_count(), mesh.node_count());
  stiff.setFromTriplets(trips.begin(), trips.end());
  return stiff;
}

}  // namespace

Eigen::SparseMatrix<double> assemble_system(const Mesh& mesh, const ElementGeometry& geom,
                                            const ConductivityField& x) {
  x.validate();
  if (x.values.size() != mesh.node_count())
    throw ShapeError("conductivity field size does not match mesh node count");
  Eigen::SparseMatrix<double> system = assemble_stiffness(mesh, geom, x.values);
  if (mesh.electrode_count() > 0) system += assemble_robin(mesh);
  return system;
}

CemSystem::CemSystem(const Mesh& mesh, const ElementGeometry& geom)
    : mesh_(mesh), geom_(geom) {
  robin_ = assemble_robin(mesh);
  electrode_fn_.resize(mesh.electrode_count());
  lengths_.resize(mesh.electrode_count());
  for (int i = 0; i < mesh.electrode_count(); ++i) {
    Eigen::VectorXd fn = Eigen::VectorXd::Zero(mesh.node_count());
    const double inv_zeta = 1.0 / mesh.contact_impedances[i];
    double len = 0.0;
    for (const Edge& e : mesh.electrodes[i]) {
      const double l = mesh.edge_length(e);
      fn[e.a] += inv_zeta * l / 2.0;
      fn[e.b] += inv_zeta * l / 2.0;
      len += l;
    }
    electrode_fn_[i] = std::move(fn);
    lengths_[i] = len;
  }
}

void CemSystem::factorize(const ConductivityField& x) {
  x.validate();
  if (x.values.size() != mesh_.node_count())
    throw ShapeError("conductivity field size does not match mesh node count");
  matrix_ = assemble_stiffness(mesh_, geom_, x.values);
  matrix_ += robin_;
  if (!pattern_analyzed_) {
    solver_.analyzePattern(matrix_);
    pattern_analyzed_ = true;
  }
  solver_.factorize(matrix_);
  if (solver_.info() != Eigen::Success)
    throw NumericError("CEM system factorization failed (matrix not positive definite?)");
  factorized_ = true;
}

Eigen::VectorXd CemSystem::solve(const Eigen::VectorXd& rhs) const {
  if (!factorized_) throw NumericError("CemSystem::solve called before factorize");
  Eigen::VectorXd u = solver_.solve(rhs);
  const double rhs_norm = rhs.norm();
  if (rhs_norm == 0.0) return u;
  double residual = (matrix_ * u - rhs).norm() / rhs_norm;
  // One step of iterative refinement covers rare ill-conditioned fields.
  if (residual > 1e-10) {
    u += solver_.solve(rhs - matrix_ * u);
    residual = (matrix_ * u - rhs).norm() / rhs_norm;
  }
  if (residual > 1e-10)
    throw NumericError("CEM solve residual " + std::to_string(residual) + " exceeds 1e-10");
  return u;
}

CemSolution CemSystem::solve_pattern(const ExcitationPattern& pattern) const {
  const int n1 = mesh_.electrode_count();
  if (pattern.potentials.size() != n1)
    throw ShapeError("excitation pattern size does not match electrode count");
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(mesh_.node_count());
  for (int i = 0; i < n1; ++i)
    if (pattern.potentials[i] != 0.0) rhs += pattern.potentials[i] * electrode_fn_[i];

  CemSolution sol;
  sol.potential = solve(rhs);
  sol.currents.resize(n1);
  for (int i = 0; i < n1; ++i)
    sol.currents[i] = electrode_fn_[i].dot(sol.potential) -
                      pattern.potentials[i] * lengths_[i] / mesh_.contact_impedances[i];
  return sol;
}

MeasurementFrame forward_map(const CemSystem& system,
                             const std::vector<ExcitationPattern>& patterns,
                             double precision_scale, long frame) {
  const int n1 = system.mesh().electrode_count();
  std::vector<double> entries;
  entries.reserve(patterns.size() * n1);
  for (const ExcitationPattern& pattern : patterns) {
    const CemSolution sol = system.solve_pattern(pattern);
    for (int i = 0; i < n1; ++i) {
      if (i == pattern.excited) continue;
      entries.push_back(precision_scale * sol.currents[i]);
    }
  }
  MeasurementFrame out;
  out.values = Eigen::Map<Eigen::VectorXd>(entries.data(), static_cast<long>(entries.size()));
  out.frame = frame;
  out.precision_scale = precision_scale;
  return out;
}

MeasurementFrame forward_map(const Mesh& mesh, const ElementGeometry& geom,
                             const ConductivityField& x,
                             const std::vector<ExcitationPattern>& patterns,
                             double precision_scale, long frame) {
  CemSystem system(mesh, geom);
  system.factorize(x);
  return forward_map(system, patterns, precision_scale, frame);
}

double reciprocity_check(const Mesh& mesh, const ConductivityField& x) {
  const ElementGeometry geom = element_geometry(mesh);
  CemSystem system(mesh, geom);
  system.factorize(x);
  const int n1 = mesh.electrode_count();
  Eigen::MatrixXd currents(n1, n1);
  for (const ExcitationPattern& pattern : standard_patterns(n1)) {
    const CemSolution sol = system.solve_pattern(pattern);
    currents.col(pattern.excited) = sol.currents;
  }
  double max_abs = currents.cwiseAbs().maxCoeff();
  if (max_abs == 0.0) return 0.0;
  double worst = 0.0;
  for (int i = 0; i < n1; ++i)
    for (int j = i + 1; j < n1; ++j)
      worst = std::max(worst, std::abs(currents(i, j) - currents(j, i)));
  return worst / max_abs;
}

}  // namespace dyneit
