#pragma once

#include <Eigen/Sparse>
#include <optional>

#include "dyneit/popd.hpp"

namespace dyneit {

/// Nodal displacement field driving the primal warp predictor.
struct FlowField {
  Eigen::Matrix2Xd displacement;
  long estimated_at = -1;
};

enum class PredictorKind { NoPrediction, PrimalOnly, Greedy, Affine };

PredictorKind predictor_kind_from_string(const std::string& name);
std::string to_string(PredictorKind kind);

struct PredictorConfig {
  PredictorKind kind = PredictorKind::NoPrediction;
  double beta1 = 1e-3;
  double beta2 = 1e-5;
  int flow_cadence = 4;
  double affine_gain = 10.0;
  double affine_threshold = 1e-12;

  void validate() const;
};

/// Displacement estimate from the incompressible-transport data term,
///   argmin_v 0.5 |(x_curr - x_prev) - grad(x_prev) . v|^2
///           + beta1/2 (|grad v1|^2 + |grad v2|^2) + beta2/2 |v|^2,
/// discretized in the nodal piecewise-linear basis and solved as one SPD
/// system (unit frame step, h = v).
FlowField estimate_flow(const Eigen::VectorXd& x_curr, const Eigen::VectorXd& x_prev,
                        double beta1, double beta2, const Mesh& mesh,
                        const ElementGeometry& geom);

/// Warp x through the displacement: per node evaluate x at xi + h(xi) by
/// barycentric interpolation; displaced points outside the mesh keep the
/// nodal value; result clamped to [lower, upper].
Eigen::VectorXd warp_primal(const Eigen::VectorXd& x, const FlowField& h, const Mesh& mesh,
                            const PointLocator& locator, double lower, double upper);

DualField dual_identity(const DualField& y);

/// Element-wise preservation of <grad x, y>: the minimum-norm vector parallel
/// to the predicted gradient with the same inner product, then projected onto
/// the alpha-ball. Elements with |grad x_pred| <= 1e-14 keep y.
DualField dual_greedy(const DualField& y, const DualField& grad_old, const DualField& grad_pred,
                      double alpha);

/// Affine dual update y + c_e grad_pred with the flow-gated gain
/// c_e = gain * max(0, 1 - threshold / |h|_e)^2 (zero where the element-mean
/// displacement vanishes), projected onto the alpha-ball.
DualField dual_affine(const DualField& y, const DualField& grad_pred, const FlowField& h,
                      const Mesh& mesh, double alpha, double gain, double threshold);

/// Stateful predictor dispatching on the configured kind: flow-based primal
/// warp with cadence-gated flow re-estimation, plus the chosen dual update.
class FlowPredictor {
 public:
  FlowPredictor(const Mesh& mesh, const ElementGeometry& geom, const TvOperator& tv,
                PredictorConfig config, double lower, double upper, double alpha);

  std::pair<Eigen::VectorXd, DualField> operator()(const OnlineState& state);

  const std::optional<FlowField>& cached_flow() const { return flow_; }
  const PredictorConfig& config() const { return config_; }

 private:
  const Mesh& mesh_;
  const ElementGeometry& geom_;
  const TvOperator& tv_;
  PointLocator locator_;
  PredictorConfig config_;
  double lower_, upper_, alpha_;
  std::optional<FlowField> flow_;
};

}  // namespace dyneit
