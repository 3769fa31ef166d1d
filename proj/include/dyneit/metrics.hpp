#pragma once

#include <Eigen/Core>
#include <string>
#include <vector>

#include "dyneit/common.hpp"

namespace dyneit {

/// Per-frame reconstruction metrics; eps_dagger and gap are NaN when no
/// comparison sequence is available (ordinary experiment runs).
struct FrameMetrics {
  long frame = 0;
  double objective = 0.0;
  double relative_objective = 0.0;
  double relative_error = 0.0;
  double eps_dagger = std::numeric_limits<double>::quiet_NaN();
  double gap = std::numeric_limits<double>::quiet_NaN();
  double step_ms = 0.0;
  std::string predictor;
};

/// |x - x_true| / |x_true| over nodal coefficients.
double relative_error(const Eigen::VectorXd& x, const Eigen::VectorXd& x_true);

/// J_k(x^k) / J_k(x^0).
double relative_objective(double j_value, double j0_value);

/// Two-sided Student-t quantile (probability p, dof degrees of freedom).
double student_t_quantile(double p, int dof);

/// Windowed relative-error statistics with a Student-t confidence interval.
struct RunSummary {
  std::string predictor;
  long frames = 0;
  long window_begin = 1;
  long window_end = 500;
  bool window_clipped = false;
  double mean_re_all = 0.0;     // frames 1..N
  double mean_re_window = 0.0;  // frames window_begin..window_end
  double ci_lower = 0.0;
  double ci_upper = 0.0;
  double median_step_ms = 0.0;
  double total_runtime_sec = 0.0;
  double tau = 0.0;
  double lag_mean = 0.0;
  double lag_max = 0.0;
};

/// Mean and 95% CI of the relative errors over frames 1..window_end (clipped
/// to the run length with the window_clipped flag set). Throws on fewer than
/// two window samples.
RunSummary summarize(const std::vector<FrameMetrics>& metrics, long window_end = 500);

/// Peak detector for event-frame spikes: true when the maximum relative error
/// within [center - half_window, center + half_window] exceeds min_ratio
/// times the median over the baseline frames [center - 50, center - 10).
bool has_local_spike(const std::vector<FrameMetrics>& metrics, long center, long half_window,
                     double min_ratio);

}  // namespace dyneit
