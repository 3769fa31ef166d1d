#pragma once

#include <memory>
#include <random>

#include "dyneit/popd.hpp"

namespace dyneit {

/// Convex verification instance: linear measurement map S(x) = A x on a small
/// disk mesh with box constraint and TV regularization. Scaled so the
/// unaccelerated iteration with tau = sigma = 1 satisfies metric positivity.
class ConvexInstance {
 public:
  explicit ConvexInstance(unsigned seed, int mesh_nodes = 64);

  const Mesh& mesh() const { return mesh_; }
  const TvOperator& K() const { return *K_; }
  const Eigen::MatrixXd& A() const { return A_; }
  const Eigen::VectorXd& b() const { return b_; }
  double lower() const { return lower_; }
  double upper() const { return upper_; }
  double alpha() const { return alpha_; }
  /// Lipschitz constant of grad E: |A^T A|.
  double lipschitz() const { return lipschitz_; }

  double energy(const Eigen::VectorXd& x) const { return 0.5 * (A_ * x - b_).squaredNorm(); }
  Eigen::VectorXd gradient(const Eigen::VectorXd& x) const {
    return A_.transpose() * (A_ * x - b_);
  }

  PdOps ops() const;
  GapProblem gap_problem() const;

 private:
  Mesh mesh_;
  ElementGeometry geom_;
  std::unique_ptr<TvOperator> K_;
  Eigen::MatrixXd A_;
  Eigen::VectorXd b_;
  double lower_ = 0.01, upper_ = 100.0, alpha_ = 0.01, lipschitz_ = 0.0;
};

/// Saddle point of min_x max_y E(x) + <Kx,y> - G*(y) + F(x) computed by an
/// accelerated projected dual ascent with the inner least-squares minimizer in
/// closed form; independent of the online iteration. The duality gap
/// certifies the result.
struct SaddlePoint {
  PrimalDual u;
  double duality_gap = 0.0;
  double primal_value = 0.0;
  bool box_interior = false;
  int iterations = 0;
};
SaddlePoint solve_saddle_dense(const ConvexInstance& instance);

/// Runs the online iteration on static convex data with identity predictor and
/// exact gradients, records the per-frame gap-bound ingredients, and checks
/// the cumulative inequality.
struct GapBoundReport {
  GapBoundCheck check;
  double init_term = 0.0;
  double gap_sum = 0.0;
  double step_sum = 0.0;
  double eps_sum = 0.0;
  double saddle_duality_gap = 0.0;
  int frames = 0;
  std::vector<double> gaps;
  std::vector<double> step_terms;
  std::vector<double> eps_dagger;
  // Metric seminorms of the deviation from the comparison point per frame.
  std::vector<double> deviation_M;
  std::vector<double> deviation_M_plus_Gamma;
};
GapBoundReport run_gap_bound_verification(unsigned seed, int frames, double tau = 1.0,
                                          double sigma = 1.0);

}  // namespace dyneit
