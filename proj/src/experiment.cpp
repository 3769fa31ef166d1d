#include "dyneit/experiment.hpp"

#include <json.hpp>

#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "dyneit/analysis.hpp"
#include "dyneit/convex_check.hpp"

namespace dyneit {

using nlohmann::json;

void AlgoConfig::validate() const {
  if (!(alpha > 0.0)) throw ParameterError("alpha must be positive");
  if (!(sigma > 0.0)) throw ParameterError("sigma must be positive");
  if (!(kappa > 0.0 && kappa < 1.0)) throw ParameterError("kappa must lie in (0,1)");
  if (!(precision_scale > 0.0)) throw ParameterError("precision scale must be positive");
  if (!(lower > 0.0 && lower < upper)) throw ParameterError("bounds must satisfy 0 < lower < upper");
  if (initial_conductivity < lower || initial_conductivity > upper)
    throw ParameterError("initial conductivity must lie within the bounds");
  predictor.validate();
}

namespace {

json to_json(const InclusionSpec& spec) {
  return json{{"radius", spec.radius},
              {"start", {spec.start.x(), spec.start.y()}},
              {"end", {spec.end.x(), spec.end.y()}},
              {"orbit_radius", spec.orbit_radius},
              {"phase", spec.phase},
              {"revolutions", spec.revolutions},
              {"hide_from", spec.hide_from},
              {"hide_until", spec.hide_until}};
}

InclusionSpec inclusion_from_json(const json& j) {
  InclusionSpec spec;
  spec.radius = j.value("radius", spec.radius);
  if (j.contains("start")) spec.start = Vec2(j["start"][0], j["start"][1]);
  if (j.contains("end")) spec.end = Vec2(j["end"][0], j["end"][1]);
  spec.orbit_radius = j.value("orbit_radius", spec.orbit_radius);
  spec.phase = j.value("phase", spec.phase);
  spec.revolutions = j.value("revolutions", spec.revolutions);
  spec.hide_from = j.value("hide_from", spec.hide_from);
  spec.hide_until = j.value("hide_until", spec.hide_until);
  return spec;
}

}  // namespace

std::string to_json_string(const ScenarioConfig& config) {
  json j{{"kind", to_string(config.kind)},
         {"frames", config.frames},
         {"background", config.background},
         {"inclusion", config.inclusion},
         {"noise_rel_std", config.noise_rel_std},
         {"seed", config.seed}};
  j["inclusions"] = json::array();
  for (const auto& spec : config.inclusions) j["inclusions"].push_back(to_json(spec));
  j["halt_windows"] = json::array();
  for (const auto& [a, b] : config.halt_windows) j["halt_windows"].push_back({a, b});
  return j.dump(2);
}

ScenarioConfig scenario_config_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& err) {
    throw ParseError(std::string("scenario JSON: ") + err.what());
  }
  ScenarioConfig config;
  config.kind = scenario_kind_from_string(j.value("kind", "baseline"));
  config.frames = j.value("frames", config.frames);
  config.background = j.value("background", config.background);
  config.inclusion = j.value("inclusion", config.inclusion);
  config.noise_rel_std = j.value("noise_rel_std", config.noise_rel_std);
  config.seed = j.value("seed", config.seed);
  if (j.contains("inclusions"))
    for (const auto& spec : j["inclusions"]) config.inclusions.push_back(inclusion_from_json(spec));
  if (j.contains("halt_windows"))
    for (const auto& w : j["halt_windows"]) config.halt_windows.emplace_back(w[0], w[1]);
  return config;
}

std::string to_json_string(const AlgoConfig& config) {
  json j{{"alpha", config.alpha},
         {"sigma", config.sigma},
         {"kappa", config.kappa},
         {"precision_scale", config.precision_scale},
         {"lower", config.lower},
         {"upper", config.upper},
         {"initial_conductivity", config.initial_conductivity},
         {"tau_override", config.tau_override},
         {"tv_area_weighted", config.tv_area_weighted},
         {"window_end", config.window_end},
         {"exact_metrics", config.exact_metrics},
         {"write_rasters", config.write_rasters},
         {"raster_every", config.raster_every},
         {"raster_size", config.raster_size},
         {"raster_lower", config.raster_lower},
         {"raster_upper", config.raster_upper},
         {"write_flow", config.write_flow}};
  j["flow"] = {{"beta1", config.predictor.beta1},
               {"beta2", config.predictor.beta2},
               {"cadence", config.predictor.flow_cadence},
               {"affine_gain", config.predictor.affine_gain},
               {"affine_threshold", config.predictor.affine_threshold}};
  j["lagged"] = {{"mode", config.lagged.mode == LaggedConfig::Mode::Sync ? "sync" : "async"},
                 {"sync_lag", config.lagged.sync_lag},
                 {"gradient_variant",
                  config.lagged.variant == GradientVariant::Taylor ? "taylor" : "appendix"}};
  return j.dump(2);
}

AlgoConfig algo_config_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& err) {
    throw ParseError(std::string("algo config JSON: ") + err.what());
  }
  AlgoConfig config;
  config.alpha = j.value("alpha", config.alpha);
  config.sigma = j.value("sigma", config.sigma);
  config.kappa = j.value("kappa", config.kappa);
  config.precision_scale = j.value("precision_scale", config.precision_scale);
  config.lower = j.value("lower", config.lower);
  config.upper = j.value("upper", config.upper);
  config.initial_conductivity = j.value("initial_conductivity", config.initial_conductivity);
  config.tau_override = j.value("tau_override", config.tau_override);
  config.tv_area_weighted = j.value("tv_area_weighted", config.tv_area_weighted);
  config.window_end = j.value("window_end", config.window_end);
  config.exact_metrics = j.value("exact_metrics", config.exact_metrics);
  config.write_rasters = j.value("write_rasters", config.write_rasters);
  config.raster_every = j.value("raster_every", config.raster_every);
  config.raster_size = j.value("raster_size", config.raster_size);
  config.raster_lower = j.value("raster_lower", config.raster_lower);
  config.raster_upper = j.value("raster_upper", config.raster_upper);
  config.write_flow = j.value("write_flow", config.write_flow);
  if (j.contains("flow")) {
    const auto& f = j["flow"];
    config.predictor.beta1 = f.value("beta1", config.predictor.beta1);
    config.predictor.beta2 = f.value("beta2", config.predictor.beta2);
    config.predictor.flow_cadence = f.value("cadence", config.predictor.flow_cadence);
    config.predictor.affine_gain = f.value("affine_gain", config.predictor.affine_gain);
    config.predictor.affine_threshold =
        f.value("affine_threshold", config.predictor.affine_threshold);
  }
  if (j.contains("lagged")) {
    const auto& l = j["lagged"];
    const std::string mode = l.value("mode", "sync");
    config.lagged.mode = (mode == "async") ? LaggedConfig::Mode::Async : LaggedConfig::Mode::Sync;
    config.lagged.sync_lag = l.value("sync_lag", config.lagged.sync_lag);
    const std::string variant = l.value("gradient_variant", "taylor");
    config.lagged.variant =
        (variant == "appendix") ? GradientVariant::Appendix : GradientVariant::Taylor;
  }
  return config;
}

void atomic_write_text(const std::filesystem::path& path, const std::string& content) {
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw Error("cannot write " + tmp.string());
    out << content;
    if (!out) throw Error("failed writing " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

SimulatedData simulate_scenario(const ScenarioConfig& scenario, const Mesh& sim_mesh,
                                const Mesh& recon_mesh, double precision_scale) {
  SimulatedData data;
  data.sim_mesh = sim_mesh;
  data.recon_mesh = recon_mesh;
  data.scenario = scenario;
  data.precision_scale = precision_scale;
  if (auto warning = inverse_crime_warning(sim_mesh, recon_mesh)) data.warnings.push_back(*warning);

  const ElementGeometry sim_geom = element_geometry(sim_mesh);
  const auto patterns = standard_patterns(sim_mesh.electrode_count());
  data.frames.reserve(scenario.frames);
  data.truths.reserve(scenario.frames);
  for (long k = 0; k < scenario.frames; ++k) {
    data.frames.push_back(
        simulate_frame(scenario, k, sim_mesh, sim_geom, patterns, precision_scale).values);
    data.truths.push_back(phantom_at(scenario, k, recon_mesh));
  }
  return data;
}

namespace {

std::string frames_csv(const std::vector<Eigen::VectorXd>& frames, const char* prefix) {
  std::ostringstream out;
  out << std::setprecision(17);
  if (!frames.empty()) {
    out << "frame";
    for (long i = 0; i < frames[0].size(); ++i) out << "," << prefix << i;
    out << "\n";
  }
  for (size_t k = 0; k < frames.size(); ++k) {
    out << k;
    for (long i = 0; i < frames[k].size(); ++i) out << "," << frames[k][i];
    out << "\n";
  }
  return out.str();
}

std::vector<Eigen::VectorXd> load_frames_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path.string());
  std::vector<Eigen::VectorXd> frames;
  std::string line;
  std::getline(in, line);  // header
  long line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<double> values;
    std::stringstream ss(line);
    std::string cell;
    bool first = true;
    while (std::getline(ss, cell, ',')) {
      if (first) {
        first = false;
        continue;
      }
      try {
        values.push_back(std::stod(cell));
      } catch (const std::exception&) {
        throw ParseError(path.string() + ":" + std::to_string(line_no) + ": bad number '" + cell + "'");
      }
    }
    frames.push_back(Eigen::Map<Eigen::VectorXd>(values.data(), static_cast<long>(values.size())));
  }
  return frames;
}

}  // namespace

void save_data_dir(const SimulatedData& data, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  save_mesh(data.sim_mesh, (dir / "sim_mesh.txt").string());
  save_mesh(data.recon_mesh, (dir / "recon_mesh.txt").string());
  atomic_write_text(dir / "scenario.json", to_json_string(data.scenario));
  json meta{{"precision_scale", data.precision_scale}, {"warnings", data.warnings}};
  atomic_write_text(dir / "data.json", meta.dump(2));
  atomic_write_text(dir / "frames.csv", frames_csv(data.frames, "m_"));
  atomic_write_text(dir / "truth.csv", frames_csv(data.truths, "x_"));
}

SimulatedData load_data_dir(const std::filesystem::path& dir) {
  SimulatedData data;
  data.sim_mesh = load_mesh((dir / "sim_mesh.txt").string());
  data.recon_mesh = load_mesh((dir / "recon_mesh.txt").string());
  std::ifstream scenario_in(dir / "scenario.json");
  if (!scenario_in) throw ParseError("missing scenario.json in " + dir.string());
  std::stringstream scenario_text;
  scenario_text << scenario_in.rdbuf();
  data.scenario = scenario_config_from_json(scenario_text.str());
  std::ifstream meta_in(dir / "data.json");
  if (meta_in) {
    std::stringstream meta_text;
    meta_text << meta_in.rdbuf();
    const json meta = json::parse(meta_text.str());
    data.precision_scale = meta.value("precision_scale", 200.0);
  }
  data.frames = load_frames_csv(dir / "frames.csv");
  data.truths = load_frames_csv(dir / "truth.csv");
  if (data.frames.size() != data.truths.size())
    throw ParseError("frames.csv and truth.csv disagree on the frame count");
  return data;
}

RunResult run_reconstruction(const SimulatedData& data, const AlgoConfig& config,
                             PredictorKind kind, const std::filesystem::path& out_dir) {
  config.validate();
  if (data.frames.empty()) throw ParameterError("no measurement frames");

  const Mesh& mesh = data.recon_mesh;
  const ElementGeometry geom = element_geometry(mesh);
  const TvOperator tv(mesh, geom, config.tv_area_weighted);
  const auto patterns = standard_patterns(mesh.electrode_count());
  // The lagged S_k = S_j reuse below relies on frame-constant excitation
  // patterns, which the canonical protocol guarantees.
  const long n_frames = static_cast<long>(data.frames.size());
  const double scale = data.precision_scale;

  // One shared factorization serves both engine calls of a refresh (the
  // snapshot evaluates forward and Jacobian at the same point).
  auto engine_system = std::make_shared<CemSystem>(mesh, geom);
  auto engine_point = std::make_shared<Eigen::VectorXd>();
  auto refactorize = [&, engine_system, engine_point](const Eigen::VectorXd& v) {
    if (engine_point->size() == v.size() && *engine_point == v) return;
    ConductivityField x{v, config.lower, config.upper};
    engine_system->factorize(x);
    *engine_point = v;
  };
  LinearizationEngine engine{
      [&, engine_system](const Eigen::VectorXd& v) {
        refactorize(v);
        return forward_map(*engine_system, patterns, scale).values;
      },
      [&, engine_system](const Eigen::VectorXd& v) {
        refactorize(v);
        return jacobian(*engine_system, patterns, scale).matrix;
      }};

  const Eigen::VectorXd x0 =
      Eigen::VectorXd::Constant(mesh.node_count(), config.initial_conductivity);
  LaggedConfig lagged_config = config.lagged;
  lagged_config.recompute_tau = true;
  LaggedGradientProvider provider(engine, lagged_config, x0, 0);

  // Step-length gate before frame 0: the rule tau = 0.85/|JJ*| plus the
  // positivity check with L = |JJ*| and the measured |K|.
  const bool fixed_tau = config.tau_override > 0.0;
  const double initial_tau = fixed_tau ? config.tau_override : provider.snapshot()->tau;
  const double l_bound = 0.85 / provider.snapshot()->tau;
  const double k_norm = tv.estimate_norm();
  StepParams params = StepParams::unaccelerated(initial_tau, config.sigma, config.alpha, config.kappa);
  const StepCheck gate = check_step_condition(params, l_bound, k_norm);
  if (!gate.global_ok)
    throw ParameterError("step condition failed before frame 0: slack " +
                         std::to_string(gate.global_slack));

  PredictorConfig predictor_config = config.predictor;
  predictor_config.kind = kind;
  FlowPredictor predictor(mesh, geom, tv, predictor_config, config.lower, config.upper,
                          config.alpha);

  PdOps ops;
  ops.K = [&](const Eigen::VectorXd& x) { return tv.apply(x); };
  ops.K_adjoint = [&](const DualField& y) { return tv.apply_adjoint(y); };
  ops.prox_F = [&](const Eigen::VectorXd& x) { return prox_box(x, config.lower, config.upper); };
  ops.prox_Gstar = [&](const DualField& y) { return prox_dual_ball(y, config.alpha); };
  // The provider may adopt a fresh linearization while serving; the step rule
  // recomputes tau from it and the loop adopts it within the same frame (the
  // gradient is evaluated before the proximal updates read params.tau).
  ops.grad = [&](const Eigen::VectorXd& x_pred, long frame) {
    Eigen::VectorXd g = provider.grad(x_pred, data.frames[frame], frame);
    const double snapshot_tau = provider.snapshot()->tau;
    if (!fixed_tau && snapshot_tau > 0.0 && snapshot_tau != params.tau)
      params = StepParams::unaccelerated(snapshot_tau, config.sigma, config.alpha, config.kappa);
    return g;
  };

  // Exact objective bookkeeping (outside the step timer).
  CemSystem metric_system(mesh, geom);
  const Eigen::VectorXd s0 = engine.forward(x0);
  const double tv0 = tv.tv_value(x0, config.alpha);
  auto objective_at_x0 = [&](long k) {
    return 0.5 * (s0 - data.frames[k]).squaredNorm() + tv0;
  };
  auto objective = [&](const Eigen::VectorXd& v, long k) {
    ConductivityField x{v, config.lower, config.upper};
    metric_system.factorize(x);
    const Eigen::VectorXd s = forward_map(metric_system, patterns, scale).values;
    return 0.5 * (s - data.frames[k]).squaredNorm() + tv.tv_value(v, config.alpha);
  };

  if (!out_dir.empty()) std::filesystem::create_directories(out_dir);
  std::optional<PointLocator> raster_locator;
  if (config.write_rasters && !out_dir.empty()) raster_locator.emplace(mesh);
  std::ostringstream flow_csv;
  if (config.write_flow) flow_csv << std::setprecision(17);

  RunResult result;
  OnlineState state;
  state.frame = 0;
  state.x = x0;
  state.y = DualField::Zero(2, mesh.element_count());

  const auto run_start = std::chrono::steady_clock::now();
  {
    FrameMetrics m;
    m.frame = 0;
    m.objective = config.exact_metrics ? objective(state.x, 0) : objective_at_x0(0);
    m.relative_objective = 1.0;
    m.relative_error = relative_error(state.x, data.truths[0]);
    m.predictor = to_string(kind);
    result.metrics.push_back(m);
  }

  for (long k = 1; k < n_frames; ++k) {
    const double refresh_before = provider.refresh_seconds();
    const auto t0 = std::chrono::steady_clock::now();
    state = popdn_step(state, k, std::ref(predictor), ops, params);
    const double elapsed =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const double refresh_delta = provider.refresh_seconds() - refresh_before;

    FrameMetrics m;
    m.frame = k;
    m.step_ms = 1e3 * (elapsed - refresh_delta);
    m.predictor = to_string(kind);
    if (config.exact_metrics) {
      m.objective = objective(state.x, k);
      m.relative_objective = relative_objective(m.objective, objective_at_x0(k));
    } else {
      const Eigen::VectorXd s = provider.forward_estimate(state.x);
      m.objective = 0.5 * (s - data.frames[k]).squaredNorm() + tv.tv_value(state.x, config.alpha);
      m.relative_objective = relative_objective(m.objective, objective_at_x0(k));
    }
    m.relative_error = relative_error(state.x, data.truths[k]);
    result.metrics.push_back(m);
    result.lag_per_frame.push_back(lag_diagnostic(*provider.snapshot(), state.x));

    if (raster_locator && (k % config.raster_every == 0 || k + 1 == n_frames)) {
      std::ostringstream name;
      name << "frame_" << std::setw(6) << std::setfill('0') << k << ".pgm";
      write_pgm(state.x, mesh, *raster_locator, config.raster_size, config.raster_lower,
                config.raster_upper, out_dir / name.str());
    }
    if (config.write_flow && predictor.cached_flow()) {
      const auto& h = predictor.cached_flow()->displacement;
      flow_csv << k;
      for (long i = 0; i < h.cols(); ++i) flow_csv << "," << h(0, i) << "," << h(1, i);
      flow_csv << "\n";
    }
  }
  const double total =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - run_start).count();

  result.summary = summarize(result.metrics, config.window_end);
  result.summary.predictor = to_string(kind);
  result.summary.total_runtime_sec = total;
  result.summary.tau = params.tau;
  result.warnings = data.warnings;
  for (const std::string& w : provider.warnings()) result.warnings.push_back(w);
  if (result.summary.window_clipped)
    result.warnings.push_back("summary window clipped to " +
                              std::to_string(result.summary.window_end) + " frames");
  result.final_x = state.x;
  result.tau = params.tau;
  if (!result.lag_per_frame.empty()) {
    double lag_sum = 0.0, lag_max = 0.0;
    for (double l : result.lag_per_frame) {
      lag_sum += l;
      lag_max = std::max(lag_max, l);
    }
    result.summary.lag_mean = lag_sum / result.lag_per_frame.size();
    result.summary.lag_max = lag_max;
  }

  if (!out_dir.empty()) {
    std::filesystem::create_directories(out_dir);
    write_metrics_csv(result.metrics, out_dir / "metrics.csv");
    write_summary_json(result.summary, result.warnings, out_dir / "summary.json");
    if (config.write_flow) atomic_write_text(out_dir / "flow.csv", flow_csv.str());
  }
  return result;
}

RunResult run_experiment(const ScenarioConfig& scenario, const Mesh& sim_mesh,
                         const Mesh& recon_mesh, const AlgoConfig& config, PredictorKind kind,
                         const std::filesystem::path& out_dir) {
  scenario.validate(config.lower, config.upper);
  SimulatedData data = simulate_scenario(scenario, sim_mesh, recon_mesh, config.precision_scale);
  return run_reconstruction(data, config, kind, out_dir);
}

void write_metrics_csv(const std::vector<FrameMetrics>& metrics,
                       const std::filesystem::path& path) {
  std::ostringstream out;
  out << std::setprecision(17);
  out << "frame,J_value,rel_error,eps_dagger,gap,wall_time_ms\n";
  for (const FrameMetrics& m : metrics)
    out << m.frame << "," << m.objective << "," << m.relative_error << "," << m.eps_dagger << ","
        << m.gap << "," << m.step_ms << "\n";
  atomic_write_text(path, out.str());
}

void write_summary_json(const RunSummary& summary, const std::vector<std::string>& warnings,
                        const std::filesystem::path& path) {
  json j{{"predictor", summary.predictor},
         {"frames", summary.frames},
         {"window_begin", summary.window_begin},
         {"window_end", summary.window_end},
         {"window_clipped", summary.window_clipped},
         {"mean_re_all", summary.mean_re_all},
         {"mean_re_window", summary.mean_re_window},
         {"mean_re_window_percent", 100.0 * summary.mean_re_window},
         {"ci_lower", summary.ci_lower},
         {"ci_upper", summary.ci_upper},
         {"median_step_ms", summary.median_step_ms},
         {"total_runtime_sec", summary.total_runtime_sec},
         {"tau", summary.tau},
         {"lag_mean", summary.lag_mean},
         {"lag_max", summary.lag_max},
         {"warnings", warnings}};
  atomic_write_text(path, j.dump(2));
}

RunSummary load_summary_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path.string());
  std::stringstream text;
  text << in.rdbuf();
  json j;
  try {
    j = json::parse(text.str());
  } catch (const json::parse_error& err) {
    throw ParseError(path.string() + ": " + err.what());
  }
  RunSummary summary;
  summary.predictor = j.value("predictor", "");
  summary.frames = j.value("frames", 0L);
  summary.window_begin = j.value("window_begin", 1L);
  summary.window_end = j.value("window_end", 500L);
  summary.window_clipped = j.value("window_clipped", false);
  summary.mean_re_all = j.value("mean_re_all", 0.0);
  summary.mean_re_window = j.value("mean_re_window", 0.0);
  summary.ci_lower = j.value("ci_lower", 0.0);
  summary.ci_upper = j.value("ci_upper", 0.0);
  summary.median_step_ms = j.value("median_step_ms", 0.0);
  summary.total_runtime_sec = j.value("total_runtime_sec", 0.0);
  summary.tau = j.value("tau", 0.0);
  summary.lag_mean = j.value("lag_mean", 0.0);
  summary.lag_max = j.value("lag_max", 0.0);
  return summary;
}

std::string report(const std::vector<std::filesystem::path>& run_dirs,
                   const std::filesystem::path& csv_path) {
  std::vector<RunSummary> summaries;
  std::vector<std::string> missing;
  for (const auto& dir : run_dirs) {
    const auto path = dir / "summary.json";
    if (!std::filesystem::exists(path)) {
      missing.push_back(dir.string());
      continue;
    }
    summaries.push_back(load_summary_json(path));
  }
  std::sort(summaries.begin(), summaries.end(),
            [](const RunSummary& a, const RunSummary& b) {
              return a.mean_re_window < b.mean_re_window;
            });

  std::ostringstream text;
  text << std::left << std::setw(10) << "predictor" << std::right << std::setw(14) << "mean RE all"
       << std::setw(16) << "mean RE window" << std::setw(26) << "95% CI" << "\n";
  std::ostringstream csv;
  csv << std::setprecision(17);
  csv << "predictor,mean_re_all,mean_re_window,ci_lower,ci_upper\n";
  for (const RunSummary& s : summaries) {
    std::ostringstream ci;
    ci << std::setprecision(5) << s.ci_lower << " - " << s.ci_upper;
    text << std::left << std::setw(10) << s.predictor << std::right << std::fixed
         << std::setprecision(5) << std::setw(14) << s.mean_re_all << std::setw(16)
         << s.mean_re_window << std::setw(26) << ci.str() << "\n";
    text.unsetf(std::ios::fixed);
    csv << s.predictor << "," << s.mean_re_all << "," << s.mean_re_window << "," << s.ci_lower
        << "," << s.ci_upper << "\n";
  }
  for (const std::string& m : missing) text << "missing run: " << m << "\n";
  if (!csv_path.empty()) atomic_write_text(csv_path, csv.str());
  return text.str();
}

void write_pgm(const Eigen::VectorXd& x, const Mesh& mesh, const PointLocator& locator,
               int size, double lower, double upper, const std::filesystem::path& path) {
  Vec2 lo = mesh.nodes.front(), hi = lo;
  for (const Vec2& p : mesh.nodes) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  std::ostringstream out;
  out << "P5\n" << size << " " << size << "\n255\n";
  for (int row = 0; row < size; ++row) {
    // Image rows run top-down; mesh y runs bottom-up.
    const double py = hi.y() - (row + 0.5) / size * (hi.y() - lo.y());
    for (int col = 0; col < size; ++col) {
      const double px = lo.x() + (col + 0.5) / size * (hi.x() - lo.x());
      unsigned char byte = 0;
      if (auto hit = locator.locate(Vec2(px, py))) {
        const auto& tri = mesh.triangles[hit->element];
        const double value = hit->weights[0] * x[tri[0]] + hit->weights[1] * x[tri[1]] +
                             hit->weights[2] * x[tri[2]];
        const double unit = std::clamp((value - lower) / (upper - lower), 0.0, 1.0);
        byte = static_cast<unsigned char>(std::lround(255.0 * unit));
      }
      out.put(static_cast<char>(byte));
    }
  }
  atomic_write_text(path, out.str());
}

}  // namespace dyneit
