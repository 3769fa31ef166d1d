#pragma once

#include <filesystem>

#include "dyneit/lagged.hpp"
#include "dyneit/metrics.hpp"
#include "dyneit/predictors.hpp"
#include "dyneit/scenarios.hpp"

namespace dyneit {

/// Algorithm and harness configuration. Documented defaults: alpha = 0.5,
/// precision 200, sigma = 1, kappa = 0.15, beta1 = 1e-3, beta2 = 1e-5,
/// bounds 1e-5..1e5, flow cadence 4.
struct AlgoConfig {
  double alpha = 0.5;
  double sigma = 1.0;
  double kappa = 0.15;
  double precision_scale = 200.0;
  double lower = 1e-5;
  double upper = 1e5;
  double initial_conductivity = 1.0;
  /// 0 selects the step rule tau = 0.85/|JJ*| recomputed per linearization;
  /// a positive value pins tau (still validated against the step condition).
  double tau_override = 0.0;
  /// Discrete-gradient convention for the regularizer; false selects the
  /// plain per-element gradient whose operator norm scales like 1/h.
  bool tv_area_weighted = true;
  PredictorConfig predictor;
  /// Synchronous fixed-lag default of 50 serves per refresh mirrors the
  /// measured background compute-to-frame-time ratio of the asynchronous
  /// worker at desk scale.
  LaggedConfig lagged{LaggedConfig::Mode::Sync, 50};
  long window_end = 500;
  bool exact_metrics = true;
  bool write_rasters = false;
  int raster_every = 50;
  int raster_size = 128;
  double raster_lower = 0.0;
  double raster_upper = 1.2;
  bool write_flow = false;

  void validate() const;
};

std::string to_json_string(const AlgoConfig& config);
AlgoConfig algo_config_from_json(const std::string& text);
std::string to_json_string(const ScenarioConfig& config);
ScenarioConfig scenario_config_from_json(const std::string& text);

/// Simulated measurement stream plus ground truth rasterized to the
/// reconstruction mesh.
struct SimulatedData {
  Mesh sim_mesh;
  Mesh recon_mesh;
  ScenarioConfig scenario;
  double precision_scale = 200.0;
  std::vector<Eigen::VectorXd> frames;
  std::vector<Eigen::VectorXd> truths;
  std::vector<std::string> warnings;
};

/// Simulates every frame of the scenario on the simulation mesh (inverse
/// crime guarded: warns when sim and recon discretizations coincide).
SimulatedData simulate_scenario(const ScenarioConfig& scenario, const Mesh& sim_mesh,
                                const Mesh& recon_mesh, double precision_scale);

void save_data_dir(const SimulatedData& data, const std::filesystem::path& dir);
SimulatedData load_data_dir(const std::filesystem::path& dir);

struct RunResult {
  std::vector<FrameMetrics> metrics;
  RunSummary summary;
  std::vector<std::string> warnings;
  Eigen::VectorXd final_x;
  double tau = 0.0;
  /// |x^k - x_check| per frame: the controllable factor of the lagged
  /// gradient error.
  std::vector<double> lag_per_frame;
};

/// Online reconstruction over the full measurement stream. Validates the
/// step condition before frame 0 and refuses to run on failure. Step timing
/// excludes background refresh work and metric evaluation.
RunResult run_reconstruction(const SimulatedData& data, const AlgoConfig& config,
                             PredictorKind kind, const std::filesystem::path& out_dir = {});

/// simulate + reconstruct + artifacts in one call.
RunResult run_experiment(const ScenarioConfig& scenario, const Mesh& sim_mesh,
                         const Mesh& recon_mesh, const AlgoConfig& config, PredictorKind kind,
                         const std::filesystem::path& out_dir);

void write_metrics_csv(const std::vector<FrameMetrics>& metrics,
                       const std::filesystem::path& path);
void write_summary_json(const RunSummary& summary, const std::vector<std::string>& warnings,
                        const std::filesystem::path& path);
RunSummary load_summary_json(const std::filesystem::path& path);

/// Comparison table over finished runs, sorted by window mean; returns the
/// plain-text table and writes report.csv alongside when csv_path is set.
std::string report(const std::vector<std::filesystem::path>& run_dirs,
                   const std::filesystem::path& csv_path = {});

/// 8-bit PGM raster of a nodal field, sampled on a square pixel grid with
/// values mapped linearly from [lower, upper].
void write_pgm(const Eigen::VectorXd& x, const Mesh& mesh, const PointLocator& locator,
               int size, double lower, double upper, const std::filesystem::path& path);

/// Atomic text write (temp file + rename).
void atomic_write_text(const std::filesystem::path& path, const std::string& content);

}  // namespace dyneit
