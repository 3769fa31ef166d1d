#include <filesystem>
#include <fstream>
#include <random>

#include "doctest.h"
#include "dyneit/experiment.hpp"

using namespace dyneit;

namespace {

std::filesystem::path temp_dir(const char* name) {
  auto dir = std::filesystem::temp_directory_path() / name;
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

// Small two-mesh scenario that runs in well under a second.
struct SmallRun {
  Mesh sim = build_disk_mesh(1.0, 200, 8, 0.5);
  Mesh recon = build_disk_mesh(1.0, 120, 8, 0.5);
  ScenarioConfig scenario;
  AlgoConfig config;

  SmallRun() {
    scenario.kind = ScenarioKind::Baseline;
    scenario.frames = 12;
    scenario.inclusions = {InclusionSpec{.radius = 0.3, .start = {-0.3, 0.0}, .end = {0.3, 0.0}}};
    scenario.seed = 5;
    config.window_end = 11;
  }
};

}  // namespace

TEST_SUITE_BEGIN("harness");

TEST_CASE("relative error and relative objective basics") {
  Eigen::VectorXd t(3);
  t << 1.0, 2.0, -2.0;
  CHECK(relative_error(t, t) == 0.0);
  CHECK(relative_error(Eigen::VectorXd(2.0 * t), t) == doctest::Approx(1.0).epsilon(1e-15));

  std::mt19937 rng(3);
  std::normal_distribution<double> gauss;
  Eigen::VectorXd a(6), b(6);
  for (int i = 0; i < 6; ++i) {
    a[i] = gauss(rng);
    b[i] = gauss(rng);
  }
  CHECK(relative_error(a, b) == doctest::Approx((a - b).norm() / b.norm()).epsilon(1e-15));
  CHECK_THROWS_AS(relative_error(a, Eigen::VectorXd::Zero(6)), ParameterError);

  CHECK(relative_objective(3.0, 3.0) == 1.0);
  CHECK(relative_objective(1.5, 3.0) == 0.5);
  CHECK_THROWS_AS(relative_objective(1.0, 0.0), ParameterError);
}

TEST_CASE("summary statistics use the Student t quantile") {
  // Quantile-function oracle: t_{0.975, 499} ~ 1.9647.
  CHECK(student_t_quantile(0.975, 499) == doctest::Approx(1.9647).epsilon(2e-4));
  CHECK(student_t_quantile(0.975, 499) == doctest::Approx(-student_t_quantile(0.025, 499)));

  std::vector<FrameMetrics> metrics;
  for (long k = 0; k <= 500; ++k) {
    FrameMetrics m;
    m.frame = k;
    m.relative_error = 5.0;
    metrics.push_back(m);
  }
  RunSummary constant = summarize(metrics, 500);
  CHECK(constant.mean_re_window == 5.0);
  CHECK(constant.ci_lower == 5.0);
  CHECK(constant.ci_upper == 5.0);
  CHECK_FALSE(constant.window_clipped);

  metrics.resize(400);
  RunSummary clipped = summarize(metrics, 500);
  CHECK(clipped.window_clipped);
  CHECK(clipped.window_end == 399);
}

TEST_CASE("spike detector finds an injected jump and rejects flat traces") {
  std::vector<FrameMetrics> metrics;
  for (long k = 0; k < 600; ++k) {
    FrameMetrics m;
    m.frame = k;
    m.relative_error = 0.10;
    if (k >= 500 && k <= 503) m.relative_error = 0.14;
    metrics.push_back(m);
  }
  CHECK(has_local_spike(metrics, 500, 5, 1.05));
  CHECK_FALSE(has_local_spike(metrics, 300, 5, 1.05));
}

TEST_CASE("config JSON round trips") {
  AlgoConfig config;
  config.alpha = 0.7;
  config.tau_override = 1.25e-4;
  config.predictor.beta1 = 2e-3;
  config.lagged.sync_lag = 7;
  config.lagged.variant = GradientVariant::Appendix;
  AlgoConfig loaded = algo_config_from_json(to_json_string(config));
  CHECK(loaded.alpha == config.alpha);
  CHECK(loaded.tau_override == config.tau_override);
  CHECK(loaded.predictor.beta1 == config.predictor.beta1);
  CHECK(loaded.lagged.sync_lag == 7);
  CHECK(loaded.lagged.variant == GradientVariant::Appendix);

  ScenarioConfig scenario = find_preset("disappearing").scenario;
  ScenarioConfig round = scenario_config_from_json(to_json_string(scenario));
  CHECK(round.kind == scenario.kind);
  CHECK(round.frames == scenario.frames);
  CHECK(round.inclusions.size() == scenario.inclusions.size());
  CHECK(round.inclusions[1].hide_from == scenario.inclusions[1].hide_from);

  CHECK_THROWS_AS(algo_config_from_json("{not json"), ParseError);
}

TEST_CASE("data directory round trip") {
  SmallRun small;
  small.scenario.frames = 3;
  SimulatedData data = simulate_scenario(small.scenario, small.sim, small.recon, 200.0);
  const auto dir = temp_dir("dyneit_data_roundtrip");
  save_data_dir(data, dir);
  SimulatedData loaded = load_data_dir(dir);
  REQUIRE(loaded.frames.size() == data.frames.size());
  for (size_t k = 0; k < data.frames.size(); ++k) {
    CHECK(loaded.frames[k] == data.frames[k]);
    CHECK(loaded.truths[k] == data.truths[k]);
  }
  CHECK(loaded.scenario.seed == data.scenario.seed);
  CHECK(loaded.precision_scale == 200.0);
  std::filesystem::remove_all(dir);
}

TEST_CASE("reconstruction run produces consistent artifacts and is deterministic") {
  SmallRun small;
  SimulatedData data = simulate_scenario(small.scenario, small.sim, small.recon, 200.0);
  const auto dir = temp_dir("dyneit_run_artifacts");

  RunResult first = run_reconstruction(data, small.config, PredictorKind::PrimalOnly, dir);
  CHECK(first.metrics.size() == 12);
  CHECK(first.metrics[0].relative_objective == 1.0);  // J_rel(0) = 1 by construction
  CHECK(first.metrics[0].step_ms == 0.0);
  for (const FrameMetrics& m : first.metrics) {
    CHECK(std::isfinite(m.objective));
    CHECK(m.relative_error >= 0.0);
  }
  CHECK(std::filesystem::exists(dir / "metrics.csv"));
  CHECK(std::filesystem::exists(dir / "summary.json"));
  RunSummary loaded = load_summary_json(dir / "summary.json");
  CHECK(loaded.mean_re_window == doctest::Approx(first.summary.mean_re_window).epsilon(1e-15));
  CHECK(loaded.predictor == "primal");

  // Synchronous mode: bitwise repeatable, identical CSVs up to step timing.
  const auto dir2 = temp_dir("dyneit_run_artifacts_2");
  RunResult second = run_reconstruction(data, small.config, PredictorKind::PrimalOnly, dir2);
  REQUIRE(second.metrics.size() == first.metrics.size());
  for (size_t k = 0; k < first.metrics.size(); ++k) {
    CHECK(second.metrics[k].objective == first.metrics[k].objective);
    CHECK(second.metrics[k].relative_error == first.metrics[k].relative_error);
  }
  CHECK(second.final_x == first.final_x);
  auto strip_timing = [](const std::filesystem::path& p) {
    std::ifstream in(p);
    std::string line, out;
    while (std::getline(in, line)) out += line.substr(0, line.rfind(',')) + "\n";
    return out;
  };
  CHECK(strip_timing(dir / "metrics.csv") == strip_timing(dir2 / "metrics.csv"));
  std::filesystem::remove_all(dir);
  std::filesystem::remove_all(dir2);
}

TEST_CASE("oversized tau override is refused before frame 0") {
  SmallRun small;
  small.scenario.frames = 2;
  SimulatedData data = simulate_scenario(small.scenario, small.sim, small.recon, 200.0);
  small.config.tau_override = 1.0;  // L*tau >> 1 for this instance
  CHECK_THROWS_AS(run_reconstruction(data, small.config, PredictorKind::NoPrediction, {}),
                  ParameterError);
}

TEST_CASE("report lists runs sorted by window mean and preserves values") {
  SmallRun small;
  SimulatedData data = simulate_scenario(small.scenario, small.sim, small.recon, 200.0);
  const auto base = temp_dir("dyneit_report");
  std::vector<std::filesystem::path> dirs;
  for (PredictorKind kind : {PredictorKind::NoPrediction, PredictorKind::PrimalOnly,
                             PredictorKind::Greedy, PredictorKind::Affine}) {
    const auto dir = base / to_string(kind);
    run_reconstruction(data, small.config, kind, dir);
    dirs.push_back(dir);
  }
  const std::string table = report(dirs, base / "report.csv");
  CHECK(table.find("none") != std::string::npos);
  CHECK(table.find("affine") != std::string::npos);
  CHECK(std::filesystem::exists(base / "report.csv"));

  // CSV values match the summaries bit for bit after text round trip.
  std::ifstream csv(base / "report.csv");
  std::string header, row;
  std::getline(csv, header);
  int rows = 0;
  std::vector<double> means;
  while (std::getline(csv, row)) {
    ++rows;
    const auto first_comma = row.find(',');
    const auto second_comma = row.find(',', first_comma + 1);
    const auto third_comma = row.find(',', second_comma + 1);
    means.push_back(std::stod(row.substr(second_comma + 1, third_comma - second_comma - 1)));
    const std::string name = row.substr(0, first_comma);
    const double expected =
        load_summary_json(base / name / "summary.json").mean_re_window;
    CHECK(means.back() == expected);
  }
  CHECK(rows == 4);
  CHECK(std::is_sorted(means.begin(), means.end()));

  // Missing directories are listed, not fatal.
  const std::string with_missing = report({base / "nope"}, {});
  CHECK(with_missing.find("missing run") != std::string::npos);
  std::filesystem::remove_all(base);
}

TEST_CASE("PGM raster has the right header and payload size") {
  Mesh mesh = build_disk_mesh(1.0, 120, 4, 0.5);
  PointLocator locator(mesh);
  Eigen::VectorXd x = Eigen::VectorXd::Constant(mesh.node_count(), 0.6);
  const auto path = std::filesystem::temp_directory_path() / "dyneit_raster.pgm";
  write_pgm(x, mesh, locator, 32, 0.0, 1.2, path);
  std::ifstream in(path, std::ios::binary);
  std::string magic;
  int w, h, maxval;
  in >> magic >> w >> h >> maxval;
  CHECK(magic == "P5");
  CHECK(w == 32);
  CHECK(h == 32);
  CHECK(maxval == 255);
  in.get();
  std::string payload((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  CHECK(payload.size() == 32 * 32);
  // Interior pixels map 0.6 on [0, 1.2] to 128.
  CHECK(static_cast<unsigned char>(payload[32 * 16 + 16]) == 128);
  std::filesystem::remove(path);
}

TEST_SUITE_END();
