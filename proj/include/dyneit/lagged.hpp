#pragma once

#include <atomic>
#include <condition_variable>
#include <memory>
#include <mutex>
#include <thread>

#include "dyneit/derivative.hpp"

namespace dyneit {

/// Frozen (x_check, S(x_check), J(x_check)) triple published by the refresh
/// worker; immutable once published.
struct LinearizationSnapshot {
  Eigen::VectorXd x_lin;
  Eigen::VectorXd forward;
  Jacobian jac;
  long source_frame = 0;
  /// Paper step rule evaluated at this linearization; 0 when not computed.
  double tau = 0.0;
};

/// First-order Taylor estimate S(x_check) + J (x - x_check).
Eigen::VectorXd approx_forward(const LinearizationSnapshot& snapshot, const Eigen::VectorXd& x);

/// Main-text Taylor-corrected gradient J^T (approx_forward(x) - b) or the
/// appendix form J^T (S(x_check) - b).
enum class GradientVariant { Taylor, Appendix };
Eigen::VectorXd approx_grad(const LinearizationSnapshot& snapshot, const Eigen::VectorXd& x,
                            const Eigen::VectorXd& b, GradientVariant variant);

/// |x - x_check|, the controllable factor of the lagged-gradient error.
double lag_diagnostic(const LinearizationSnapshot& snapshot, const Eigen::VectorXd& x);

/// Forward/Jacobian evaluation backend (real CEM or a linear test stub).
struct LinearizationEngine {
  std::function<Eigen::VectorXd(const Eigen::VectorXd&)> forward;
  std::function<Eigen::MatrixXd(const Eigen::VectorXd&)> jacobian;
};

struct LaggedConfig {
  enum class Mode { Sync, Async };
  Mode mode = Mode::Sync;
  /// Sync mode: a refresh completes after exactly this many serve calls.
  /// Zero re-linearizes at every call (no lag).
  int sync_lag = 0;
  GradientVariant variant = GradientVariant::Taylor;
  bool recompute_tau = true;
};

/// Serves cheap approximate forward values and gradients from the latest
/// snapshot while the next linearization is prepared, either synchronously
/// with a fixed serve-count lag (deterministic, for tests and reproducible
/// runs) or on a background thread. Readers always see one consistent
/// snapshot; publication swaps a shared pointer under a short lock.
class LaggedGradientProvider {
 public:
  LaggedGradientProvider(LinearizationEngine engine, LaggedConfig config,
                         const Eigen::VectorXd& x0, long frame0 = 0);
  ~LaggedGradientProvider();

  LaggedGradientProvider(const LaggedGradientProvider&) = delete;
  LaggedGradientProvider& operator=(const LaggedGradientProvider&) = delete;

  /// Gradient estimate at x for frame data b; advances the refresh protocol.
  Eigen::VectorXd grad(const Eigen::VectorXd& x, const Eigen::VectorXd& b, long frame);

  /// Taylor forward estimate at the current snapshot (no protocol advance).
  Eigen::VectorXd forward_estimate(const Eigen::VectorXd& x) const;

  std::shared_ptr<const LinearizationSnapshot> snapshot() const;

  /// Cumulative wall time spent in engine refreshes (sync mode); background
  /// time that step timing must exclude.
  double refresh_seconds() const { return refresh_seconds_; }

  /// Deferred warnings from failed refreshes (provider kept serving).
  std::vector<std::string> warnings() const;

 private:
  std::shared_ptr<const LinearizationSnapshot> build_snapshot(const Eigen::VectorXd& x,
                                                              long frame) const;
  void publish(std::shared_ptr<const LinearizationSnapshot> snapshot);
  void worker_loop();

  LinearizationEngine engine_;
  LaggedConfig config_;

  mutable std::mutex mutex_;
  std::shared_ptr<const LinearizationSnapshot> current_;
  std::vector<std::string> warnings_;

  // Sync-mode two-slot protocol state.
  Eigen::VectorXd pending_x_;
  long pending_frame_ = 0;
  int countdown_ = 0;
  double refresh_seconds_ = 0.0;

  // Async worker state.
  std::thread worker_;
  std::condition_variable cv_;
  Eigen::VectorXd latest_x_;
  long latest_frame_ = 0;
  bool request_ready_ = false;
  std::atomic<bool> stop_{false};
};

}  // namespace dyneit
