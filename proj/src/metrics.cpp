#include "dyneit/metrics.hpp"

#include <boost/math/distributions/students_t.hpp>
#include <algorithm>
#include <cmath>

namespace dyneit {

double relative_error(const Eigen::VectorXd& x, const Eigen::VectorXd& x_true) {
  if (x.size() != x_true.size()) throw ShapeError("relative_error: size mismatch");
  const double denom = x_true.norm();
  if (denom == 0.0) throw ParameterError("relative_error: zero ground truth");
  return (x - x_true).norm() / denom;
}

double relative_objective(double j_value, double j0_value) {
  if (!(j0_value > 0.0)) throw ParameterError("relative_objective: J_k(x^0) must be positive");
  return j_value / j0_value;
}

double student_t_quantile(double p, int dof) {
  if (dof < 1) throw ParameterError("student_t_quantile needs at least one degree of freedom");
  return boost::math::quantile(boost::math::students_t(dof), p);
}

RunSummary summarize(const std::vector<FrameMetrics>& metrics, long window_end) {
  RunSummary summary;
  if (metrics.empty()) throw ParameterError("summarize: empty metrics");
  summary.frames = static_cast<long>(metrics.size());
  summary.predictor = metrics.back().predictor;

  const long last_frame = metrics.back().frame;
  if (window_end > last_frame) {
    summary.window_clipped = true;
    window_end = last_frame;
  }
  summary.window_end = window_end;

  double sum_all = 0.0;
  long count_all = 0;
  std::vector<double> window;
  std::vector<double> step_times;
  for (const FrameMetrics& m : metrics) {
    if (m.frame < 1) continue;
    sum_all += m.relative_error;
    ++count_all;
    if (m.frame <= window_end) window.push_back(m.relative_error);
    step_times.push_back(m.step_ms);
  }
  if (window.size() < 2) throw ParameterError("summarize: need at least two window samples");

  summary.mean_re_all = sum_all / count_all;
  const long n = static_cast<long>(window.size());
  double mean = 0.0;
  for (double v : window) mean += v;
  mean /= n;
  double var = 0.0;
  for (double v : window) var += (v - mean) * (v - mean);
  var /= (n - 1);
  const double half = student_t_quantile(0.975, static_cast<int>(n - 1)) *
                      std::sqrt(var / static_cast<double>(n));
  summary.mean_re_window = mean;
  summary.ci_lower = mean - half;
  summary.ci_upper = mean + half;

  if (!step_times.empty()) {
    std::nth_element(step_times.begin(), step_times.begin() + step_times.size() / 2,
                     step_times.end());
    summary.median_step_ms = step_times[step_times.size() / 2];
  }
  return summary;
}

bool has_local_spike(const std::vector<FrameMetrics>& metrics, long center, long half_window,
                     double min_ratio) {
  std::vector<double> baseline;
  double peak = 0.0;
  bool window_seen = false;
  for (const FrameMetrics& m : metrics) {
    if (m.frame >= center - 50 && m.frame < center - 10) baseline.push_back(m.relative_error);
    if (m.frame >= center - half_window && m.frame <= center + half_window) {
      peak = std::max(peak, m.relative_error);
      window_seen = true;
    }
  }
  if (baseline.size() < 5 || !window_seen)
    throw ParameterError("has_local_spike: not enough frames around the event");
  std::nth_element(baseline.begin(), baseline.begin() + baseline.size() / 2, baseline.end());
  const double median = baseline[baseline.size() / 2];
  return peak >= min_ratio * median;
}

}  // namespace dyneit
