#pragma once

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>
#include <vector>

#include "dyneit/mesh.hpp"

namespace dyneit {

/// Nodal piecewise-linear conductivity with box bounds [lower, upper].
struct ConductivityField {
  Eigen::VectorXd values;
  double lower = 1e-5;
  double upper = 1e5;

  /// Throws ParameterError when any coefficient leaves the box.
  void validate() const;
};

/// Electrode potential vector; `excited` marks the driven electrode whose
/// currents are excluded from measurements (-1 keeps all currents).
struct ExcitationPattern {
  Eigen::VectorXd potentials;
  int excited = -1;
};

/// Interior potential and electrode currents solving the CEM weakly.
struct CemSolution {
  Eigen::VectorXd potential;
  Eigen::VectorXd currents;
};

/// Scaled currents of one time frame, stacked pattern-major with the excited
/// electrode excluded.
struct MeasurementFrame {
  Eigen::VectorXd values;
  long frame = 0;
  double precision_scale = 1.0;
};

/// The N2 = N1 canonical patterns: electrode j at 1 V, all others grounded.
std::vector<ExcitationPattern> standard_patterns(int n_electrodes);

/// Potential-to-current CEM system for one conductivity. The sparse symbolic
/// factorization is computed once per mesh and reused across conductivities
/// and excitation patterns.
class CemSystem {
 public:
  CemSystem(const Mesh& mesh, const ElementGeometry& geom);

  /// Assembles stiffness + electrode Robin terms at x and refactorizes.
  void factorize(const ConductivityField& x);

  bool factorized() const { return factorized_; }
  const Eigen::SparseMatrix<double>& matrix() const { return matrix_; }
  const Mesh& mesh() const { return mesh_; }
  const ElementGeometry& geometry() const { return geom_; }

  /// Direct solve against the current factorization; relative residual is
  /// refined to below 1e-10 or a NumericError is thrown.
  Eigen::VectorXd solve(const Eigen::VectorXd& rhs) const;

  /// Solves the interior potential for one pattern and recovers electrode
  /// currents I_i = zeta_i^{-1} (int_{e_i} u ds - U_i |e_i|).
  CemSolution solve_pattern(const ExcitationPattern& pattern) const;

  /// zeta_i^{-1} * (boundary mass vector of electrode i); also the right-hand
  /// side of a unit excitation on electrode i and the current-extraction
  /// functional.
  const Eigen::VectorXd& electrode_functional(int i) const { return electrode_fn_[i]; }
  double electrode_length(int i) const { return lengths_[i]; }

 private:
  const Mesh& mesh_;
  const ElementGeometry& geom_;
  std::vector<Eigen::VectorXd> electrode_fn_;
  std::vector<double> lengths_;
  Eigen::SparseMatrix<double> robin_;
  Eigen::SparseMatrix<double> matrix_;
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver_;
  bool pattern_analyzed_ = false;
  bool factorized_ = false;
};

/// Stand-alone assembly of the interior-potential system (stiffness plus
/// electrode Robin terms). Positive definite for admissible x.
Eigen::SparseMatrix<double> assemble_system(const Mesh& mesh, const ElementGeometry& geom,
                                            const ConductivityField& x);

/// Scaled stacked measurements for all patterns, fixed (pattern-major,
/// electrode ascending, excited excluded) ordering.
MeasurementFrame forward_map(const CemSystem& system,
                             const std::vector<ExcitationPattern>& patterns,
                             double precision_scale, long frame = 0);

/// Convenience overload assembling and factorizing internally.
MeasurementFrame forward_map(const Mesh& mesh, const ElementGeometry& geom,
                             const ConductivityField& x,
                             const std::vector<ExcitationPattern>& patterns,
                             double precision_scale, long frame = 0);

/// Max relative asymmetry of the electrode-to-electrode current map over unit
/// single-electrode excitations. Symmetry of the bilinear form makes this a
/// solver diagnostic.
double reciprocity_check(const Mesh& mesh, const ConductivityField& x);

}  // namespace dyneit
