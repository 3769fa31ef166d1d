#include <Eigen/Dense>
#include <random>

#include "doctest.h"
#include "dyneit/fem.hpp"

using namespace dyneit;

namespace {

ConductivityField homogeneous(const Mesh& mesh, double value = 1.0) {
  ConductivityField x;
  x.values = Eigen::VectorXd::Constant(mesh.node_count(), value);
  return x;
}

// Unit square split along the diagonal, no electrodes.
Mesh unit_square() {
  Mesh mesh;
  mesh.nodes = {{0.0, 0.0}, {1.0, 0.0}, {1.0, 1.0}, {0.0, 1.0}};
  mesh.triangles = {{0, 1, 2}, {0, 2, 3}};
  mesh.boundary_edges = {{0, 1}, {1, 2}, {2, 3}, {0, 3}};
  return mesh;
}

ConductivityField random_admissible(const Mesh& mesh, std::mt19937& rng) {
  std::uniform_real_distribution<double> dist(0.3, 3.0);
  ConductivityField x = homogeneous(mesh);
  for (int i = 0; i < x.values.size(); ++i) x.values[i] = dist(rng);
  return x;
}

}  // namespace

TEST_SUITE_BEGIN("fem");

TEST_CASE("pure stiffness matrix has zero row sums and matches hand assembly") {
  Mesh mesh = unit_square();
  ElementGeometry geom = element_geometry(mesh);
  Eigen::MatrixXd a = assemble_system(mesh, geom, homogeneous(mesh));

  // Constants lie in the kernel of the stiffness part.
  Eigen::VectorXd row_sums = a * Eigen::VectorXd::Ones(4);
  CHECK(row_sums.cwiseAbs().maxCoeff() <= 1e-14);

  // Hand-assembled entries for the diagonal split of the unit square.
  Eigen::MatrixXd expected(4, 4);
  expected << 1.0, -0.5, 0.0, -0.5,
             -0.5,  1.0, -0.5, 0.0,
              0.0, -0.5,  1.0, -0.5,
             -0.5,  0.0, -0.5,  1.0;
  CHECK((a - expected).cwiseAbs().maxCoeff() <= 1e-14);
}

TEST_CASE("assembled matrix is symmetric for random admissible fields") {
  Mesh mesh = build_disk_mesh(1.0, 300, 8, 0.5);
  ElementGeometry geom = element_geometry(mesh);
  std::mt19937 rng(7);
  Eigen::MatrixXd a = assemble_system(mesh, geom, random_admissible(mesh, rng));
  const double scale = a.cwiseAbs().maxCoeff();
  CHECK((a - Eigen::MatrixXd(a.transpose())).cwiseAbs().maxCoeff() <= 1e-14 * scale);
}

TEST_CASE("conductivity below the lower bound is rejected") {
  Mesh mesh = build_disk_mesh(1.0, 100, 4, 0.5);
  ElementGeometry geom = element_geometry(mesh);
  ConductivityField x = homogeneous(mesh);
  x.values[3] = 1e-9;  // below default x_m = 1e-5
  CHECK_THROWS_AS(assemble_system(mesh, geom, x), ParameterError);
}

TEST_CASE("constant electrode potentials give constant interior and zero currents") {
  Mesh mesh = build_disk_mesh(1.0, 300, 8, 0.5);
  ElementGeometry geom = element_geometry(mesh);
  CemSystem system(mesh, geom);
  system.factorize(homogeneous(mesh));

  ExcitationPattern pattern;
  pattern.potentials = Eigen::VectorXd::Constant(8, 2.5);
  CemSolution sol = system.solve_pattern(pattern);
  CHECK((sol.potential.array() - 2.5).abs().maxCoeff() <= 1e-9);
  CHECK(sol.currents.cwiseAbs().maxCoeff() <= 1e-9);
}

TEST_CASE("currents are conserved for every pattern") {
  Mesh mesh = build_disk_mesh(1.0, 400, 16, 0.5);
  ElementGeometry geom = element_geometry(mesh);
  CemSystem system(mesh, geom);
  std::mt19937 rng(11);
  for (int trial = 0; trial < 5; ++trial) {
    system.factorize(random_admissible(mesh, rng));
    for (const ExcitationPattern& pattern : standard_patterns(16)) {
      CemSolution sol = system.solve_pattern(pattern);
      CHECK(std::abs(sol.currents.sum()) <= 1e-9 * sol.currents.cwiseAbs().maxCoeff());
    }
  }
}

TEST_CASE("forward map has the canonical frame length and scales linearly") {
  Mesh mesh = build_disk_mesh(1.0, 400, 16, 0.5);
  ElementGeometry geom = element_geometry(mesh);
  ConductivityField x = homogeneous(mesh);
  auto patterns = standard_patterns(16);

  MeasurementFrame unscaled = forward_map(mesh, geom, x, patterns, 1.0);
  CHECK(unscaled.values.size() == 240);

  MeasurementFrame scaled = forward_map(mesh, geom, x, patterns, 200.0);
  CHECK((scaled.values - 200.0 * unscaled.values).cwiseAbs().maxCoeff() <= 1e-12 * scaled.values.cwiseAbs().maxCoeff());

  // Determinism: identical inputs give bitwise-identical output.
  MeasurementFrame again = forward_map(mesh, geom, x, patterns, 200.0);
  CHECK(again.values == scaled.values);
}

TEST_CASE("reciprocity holds on homogeneous and random fields") {
  Mesh mesh = build_disk_mesh(1.0, 250, 8, 0.5);
  CHECK(reciprocity_check(mesh, homogeneous(mesh)) <= 1e-9);
  std::mt19937 rng(23);
  CHECK(reciprocity_check(mesh, random_admissible(mesh, rng)) <= 1e-9);
}

TEST_CASE("dense solve agrees with the sparse factorization") {
  Mesh mesh = build_disk_mesh(1.0, 120, 4, 0.5);
  ElementGeometry geom = element_geometry(mesh);
  std::mt19937 rng(3);
  ConductivityField x = random_admissible(mesh, rng);
  CemSystem system(mesh, geom);
  system.factorize(x);

  Eigen::MatrixXd dense = assemble_system(mesh, geom, x);
  auto pattern = standard_patterns(4)[1];
  CemSolution sparse_sol = system.solve_pattern(pattern);

  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(mesh.node_count());
  for (int i = 0; i < 4; ++i)
    if (pattern.potentials[i] != 0.0) rhs += pattern.potentials[i] * system.electrode_functional(i);
  Eigen::VectorXd u_dense = dense.ldlt().solve(rhs);
  CHECK((u_dense - sparse_sol.potential).norm() <= 1e-9 * u_dense.norm());
}

TEST_CASE("fine-mesh reference reproduces coarse currents within 2 percent") {
  Mesh coarse = build_disk_mesh(1.0, 1519, 16, 0.5);
  Mesh fine = build_disk_mesh(1.0, 5941, 16, 0.5);  // 2x refined ring density
  auto patterns = standard_patterns(16);

  auto solve_one = [&](const Mesh& mesh) {
    ElementGeometry geom = element_geometry(mesh);
    CemSystem system(mesh, geom);
    system.factorize(homogeneous(mesh));
    return system.solve_pattern(patterns[1]).currents;
  };
  Eigen::VectorXd coarse_currents = solve_one(coarse);
  Eigen::VectorXd fine_currents = solve_one(fine);
  for (int i = 0; i < 16; ++i)
    CHECK(std::abs(coarse_currents[i] - fine_currents[i]) <= 0.02 * std::abs(fine_currents[i]));
}

TEST_CASE("forward map is Lipschitz in the sup norm with an empirical constant") {
  Mesh mesh = build_disk_mesh(1.0, 250, 8, 0.5);
  ElementGeometry geom = element_geometry(mesh);
  auto patterns = standard_patterns(8);
  std::mt19937 rng(31);
  std::uniform_real_distribution<double> dist(0.5, 2.0);
  auto random_field = [&] {
    ConductivityField x = homogeneous(mesh);
    for (int i = 0; i < x.values.size(); ++i) x.values[i] = dist(rng);
    return x;
  };

  // Estimate the constant on one set of pairs, verify on a fresh set.
  double estimated = 0.0;
  std::vector<std::pair<ConductivityField, ConductivityField>> probe;
  for (int trial = 0; trial < 8; ++trial) probe.emplace_back(random_field(), random_field());
  for (const auto& [a, b] : probe) {
    const double ds = (forward_map(mesh, geom, a, patterns, 1.0).values -
                       forward_map(mesh, geom, b, patterns, 1.0).values).norm();
    const double dx = (a.values - b.values).cwiseAbs().maxCoeff();
    estimated = std::max(estimated, ds / dx);
  }
  CHECK(estimated > 0.0);
  CHECK(std::isfinite(estimated));
  for (int trial = 0; trial < 8; ++trial) {
    ConductivityField a = random_field(), b = random_field();
    const double ds = (forward_map(mesh, geom, a, patterns, 1.0).values -
                       forward_map(mesh, geom, b, patterns, 1.0).values).norm();
    const double dx = (a.values - b.values).cwiseAbs().maxCoeff();
    CHECK(ds <= 1.5 * estimated * dx);  // slack for the sampled estimate
  }
}

TEST_CASE("doubling a homogeneous conductivity moves all currents the same way") {
  Mesh mesh = build_disk_mesh(1.0, 300, 8, 0.5);
  ElementGeometry geom = element_geometry(mesh);
  auto patterns = standard_patterns(8);
  MeasurementFrame base = forward_map(mesh, geom, homogeneous(mesh, 1.0), patterns, 1.0);
  MeasurementFrame doubled = forward_map(mesh, geom, homogeneous(mesh, 2.0), patterns, 1.0);
  for (int i = 0; i < base.values.size(); ++i) {
    CHECK(base.values[i] * doubled.values[i] > 0.0);  // same sign
    CHECK(std::abs(doubled.values[i]) >= std::abs(base.values[i]) * 0.999);
  }
}

TEST_SUITE_END();
