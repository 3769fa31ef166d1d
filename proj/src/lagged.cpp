#include "dyneit/lagged.hpp"

#include <chrono>

#include "dyneit/popd.hpp"

namespace dyneit {

Eigen::VectorXd approx_forward(const LinearizationSnapshot& snapshot, const Eigen::VectorXd& x) {
  if (x.size() != snapshot.x_lin.size())
    throw ShapeError("approx_forward: point size does not match linearization");
  return snapshot.forward + snapshot.jac.matrix * (x - snapshot.x_lin);
}

Eigen::VectorXd approx_grad(const LinearizationSnapshot& snapshot, const Eigen::VectorXd& x,
                            const Eigen::VectorXd& b, GradientVariant variant) {
  if (b.size() != snapshot.forward.size())
    throw ShapeError("approx_grad: data length does not match linearization");
  const Eigen::VectorXd residual =
      (variant == GradientVariant::Taylor) ? approx_forward(snapshot, x) - b
                                           : snapshot.forward - b;
  return snapshot.jac.matrix.transpose() * residual;
}

double lag_diagnostic(const LinearizationSnapshot& snapshot, const Eigen::VectorXd& x) {
  return (x - snapshot.x_lin).norm();
}

LaggedGradientProvider::LaggedGradientProvider(LinearizationEngine engine, LaggedConfig config,
                                               const Eigen::VectorXd& x0, long frame0)
    : engine_(std::move(engine)), config_(config) {
  current_ = build_snapshot(x0, frame0);
  pending_x_ = x0;
  pending_frame_ = frame0;
  countdown_ = config_.sync_lag;
  latest_x_ = x0;
  latest_frame_ = frame0;
  if (config_.mode == LaggedConfig::Mode::Async)
    worker_ = std::thread([this] { worker_loop(); });
}

LaggedGradientProvider::~LaggedGradientProvider() {
  stop_ = true;
  cv_.notify_all();
  if (worker_.joinable()) worker_.join();
}

std::shared_ptr<const LinearizationSnapshot> LaggedGradientProvider::build_snapshot(
    const Eigen::VectorXd& x, long frame) const {
  auto snapshot = std::make_shared<LinearizationSnapshot>();
  snapshot->x_lin = x;
  snapshot->forward = engine_.forward(x);
  snapshot->jac.matrix = engine_.jacobian(x);
  snapshot->jac.linearization_point = x;
  snapshot->source_frame = frame;
  if (config_.recompute_tau) snapshot->tau = compute_tau(snapshot->jac);
  return snapshot;
}

void LaggedGradientProvider::publish(std::shared_ptr<const LinearizationSnapshot> snapshot) {
  std::lock_guard<std::mutex> lock(mutex_);
  current_ = std::move(snapshot);
}

std::shared_ptr<const LinearizationSnapshot> LaggedGradientProvider::snapshot() const {
  std::lock_guard<std::mutex> lock(mutex_);
  return current_;
}

Eigen::VectorXd LaggedGradientProvider::forward_estimate(const Eigen::VectorXd& x) const {
  return approx_forward(*snapshot(), x);
}

Eigen::VectorXd LaggedGradientProvider::grad(const Eigen::VectorXd& x, const Eigen::VectorXd& b,
                                             long frame) {
  if (config_.mode == LaggedConfig::Mode::Sync) {
    const auto refresh = [&](const Eigen::VectorXd& point, long source) {
      const auto start = std::chrono::steady_clock::now();
      try {
        publish(build_snapshot(point, source));
      } catch (const std::exception& err) {
        std::lock_guard<std::mutex> lock(mutex_);
        warnings_.push_back("refresh failed at frame " + std::to_string(frame) + ": " +
                            err.what() + "; serving stale snapshot");
      }
      refresh_seconds_ += std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    };
    if (config_.sync_lag == 0) {
      refresh(x, frame);
    } else if (--countdown_ <= 0) {
      // The pending point recorded sync_lag serves ago becomes the new
      // linearization; the current point becomes pending.
      refresh(pending_x_, pending_frame_);
      pending_x_ = x;
      pending_frame_ = frame;
      countdown_ = config_.sync_lag;
    }
  } else {
    std::lock_guard<std::mutex> lock(mutex_);
    latest_x_ = x;
    latest_frame_ = frame;
    request_ready_ = true;
    cv_.notify_one();
  }
  return approx_grad(*snapshot(), x, b, config_.variant);
}

std::vector<std::string> LaggedGradientProvider::warnings() const {
  std::lock_guard<std::mutex> lock(mutex_);
  return warnings_;
}

void LaggedGradientProvider::worker_loop() {
  while (!stop_) {
    Eigen::VectorXd point;
    long frame = 0;
    {
      std::unique_lock<std::mutex> lock(mutex_);
      cv_.wait(lock, [this] { return request_ready_ || stop_; });
      if (stop_) return;
      point = latest_x_;
      frame = latest_frame_;
      request_ready_ = false;
    }
    try {
      publish(build_snapshot(point, frame));
    } catch (const std::exception& err) {
      std::lock_guard<std::mutex> lock(mutex_);
      warnings_.push_back("background refresh failed: " + std::string(err.what()) +
                          "; serving stale snapshot");
    }
  }
}

}  // namespace dyneit
