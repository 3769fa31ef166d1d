#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "dyneit/analysis.hpp"
#include "dyneit/convex_check.hpp"
#include "dyneit/experiment.hpp"
#include "dyneit/oracles.hpp"

namespace fs = std::filesystem;
using namespace dyneit;

namespace {

std::string slurp(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path.string());
  std::stringstream text;
  text << in.rdbuf();
  return text.str();
}

Mesh mesh_from_arg(const std::string& arg) {
  if (fs::exists(arg)) return load_mesh(arg);
  return mesh_preset(arg);
}

int cmd_simulate(const std::string& scenario_arg, const std::string& mesh_arg,
                 const std::string& recon_arg, long seed, double scale, const fs::path& out) {
  ScenarioConfig scenario;
  Mesh sim_mesh, recon_mesh;
  if (fs::exists(scenario_arg)) {
    scenario = scenario_config_from_json(slurp(scenario_arg));
    sim_mesh = mesh_from_arg(mesh_arg.empty() ? "desk-sim" : mesh_arg);
    recon_mesh = mesh_from_arg(recon_arg.empty() ? "desk-recon" : recon_arg);
  } else {
    ScenarioPreset preset = find_preset(scenario_arg);
    scenario = preset.scenario;
    sim_mesh = mesh_arg.empty() ? build_disk_mesh(1.0, preset.sim_nodes, 16, 0.5)
                                : mesh_from_arg(mesh_arg);
    recon_mesh = recon_arg.empty() ? build_disk_mesh(1.0, preset.recon_nodes, 16, 0.5)
                                   : mesh_from_arg(recon_arg);
  }
  if (seed >= 0) scenario.seed = static_cast<std::uint64_t>(seed);

  std::cout << "simulating " << to_string(scenario.kind) << ": " << scenario.frames
            << " frames, sim mesh " << sim_mesh.node_count() << " nodes, recon mesh "
            << recon_mesh.node_count() << " nodes\n";
  SimulatedData data = simulate_scenario(scenario, sim_mesh, recon_mesh, scale);
  for (const std::string& w : data.warnings) std::cerr << "warning: " << w << "\n";
  save_data_dir(data, out);
  std::cout << "wrote " << (out / "frames.csv").string() << " (" << data.frames.size()
            << " frames x " << data.frames.front().size() << " measurements)\n";
  return 0;
}

int cmd_reconstruct(const fs::path& data_dir, const std::string& predictor,
                    const std::string& config_path, const fs::path& out) {
  SimulatedData data = load_data_dir(data_dir);
  AlgoConfig config;
  if (!config_path.empty()) config = algo_config_from_json(slurp(config_path));
  const PredictorKind kind = predictor_kind_from_string(predictor);

  RunResult result = run_reconstruction(data, config, kind, out);
  for (const std::string& w : result.warnings) std::cerr << "warning: " << w << "\n";
  std::cout << "predictor " << to_string(kind) << ": mean RE (window " << result.summary.window_end
            << ") = " << result.summary.mean_re_window << " [" << result.summary.ci_lower << ", "
            << result.summary.ci_upper << "], median step " << result.summary.median_step_ms
            << " ms, tau = " << result.tau << "\n";
  std::cout << "wrote " << (out / "metrics.csv").string() << "\n";
  return 0;
}

int cmd_verify(const std::string& what, const std::string& mesh_arg) {
  if (what == "gradients") {
    GradientCheckResult check = gradient_fd_check();
    std::cout << "adjoint vs central FD on " << check.nodes << " nodes: max rel error "
              << check.max_rel_error << " (" << check.seconds << " s)\n";
    const bool ok = check.max_rel_error <= 1e-5;
    std::cout << (ok ? "PASS" : "FAIL") << ": tolerance 1e-5\n";
    return ok ? 0 : 1;
  }
  if (what == "prox") {
    ProxCheckResult check = prox_brute_force_check();
    std::cout << "brute-force prox oracle over " << check.samples << " samples: box "
              << check.worst_box << ", dual ball " << check.worst_ball << "\n";
    const bool ok = check.worst_box <= 1e-8 && check.worst_ball <= 1e-8;
    std::cout << (ok ? "PASS" : "FAIL") << ": tolerance 1e-8\n";
    return ok ? 0 : 1;
  }
  if (what == "gap-bound") {
    GapBoundReport report = run_gap_bound_verification(1234, 200);
    std::cout << "convex instance, 200 frames: sum of gaps " << report.gap_sum
              << ", step terms " << report.step_sum << ", init " << report.init_term
              << ", prediction errors " << report.eps_sum << " (saddle duality gap "
              << report.saddle_duality_gap << ")\n";
    std::cout << (report.check.pass ? "PASS" : "FAIL")
              << ": cumulative bound with 1e-8 slack (worst margin " << report.check.worst_margin
              << " at frame " << report.check.worst_frame << ")\n";
    return report.check.pass ? 0 : 1;
  }
  if (what == "smoothness") {
    Mesh mesh = mesh_arg.empty() ? build_disk_mesh(1.0, 331, 16, 0.5) : mesh_from_arg(mesh_arg);
    ElementGeometry geom = element_geometry(mesh);
    auto patterns = standard_patterns(mesh.electrode_count());
    SmoothnessProbe probe = make_cem_probe(mesh, geom, patterns, 200.0);
    Eigen::VectorXd center = Eigen::VectorXd::Ones(mesh.node_count());
    SmoothnessEstimate est = estimate_smoothness(probe, center, 0.05, 24, 11);

    ConductivityField x;
    x.values = center;
    Jacobian jac = jacobian(mesh, geom, x, patterns, 200.0);
    std::cout << "{\n  \"nodes\": " << mesh.node_count() << ",\n  \"delta\": " << est.delta
              << ",\n  \"samples\": " << est.samples << ",\n  \"s_prime_max\": " << est.s_prime_max
              << ",\n  \"s_second_max\": " << est.s_second_max
              << ",\n  \"l_grad\": " << estimate_L_grad(jac) << "\n}\n";
    return 0;
  }
  if (what == "flow") {
    FlowCheckResult check = flow_recovery_check();
    std::cout << "translated bump, shift " << check.displacement
              << ": recovered displacement deviates by " << 100.0 * check.recovered_deviation
              << "%\n";
    const bool ok = check.recovered_deviation <= 0.20;
    std::cout << (ok ? "PASS" : "FAIL") << ": tolerance 20%\n";
    return ok ? 0 : 1;
  }
  throw ParameterError("unknown verify target '" + what +
                       "' (gradients|prox|gap-bound|smoothness|flow)");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"dyneit: online primal-dual reconstruction for dynamic EIT"};
  app.require_subcommand(1);

  std::string scenario_arg = "baseline-desk", mesh_arg, recon_arg, out_arg = "data";
  long seed = -1;
  double scale = 200.0;
  auto* simulate = app.add_subcommand("simulate", "generate a measurement stream");
  simulate->add_option("--scenario", scenario_arg, "preset name or scenario JSON file");
  simulate->add_option("--mesh", mesh_arg, "simulation mesh file or preset");
  simulate->add_option("--recon-mesh", recon_arg, "reconstruction mesh file or preset");
  simulate->add_option("--seed", seed, "RNG seed override");
  simulate->add_option("--scale", scale, "precision scale (Sigma^{-1/2} = scale * Id)");
  simulate->add_option("--out", out_arg, "output data directory");

  std::string data_arg = "data", predictor_arg = "affine", config_arg, run_out_arg = "run";
  auto* reconstruct = app.add_subcommand("reconstruct", "run the online reconstruction");
  reconstruct->add_option("--data", data_arg, "data directory from simulate");
  reconstruct->add_option("--predictor", predictor_arg, "none|primal|greedy|affine");
  reconstruct->add_option("--config", config_arg, "algorithm config JSON file");
  reconstruct->add_option("--out", run_out_arg, "output run directory");

  std::string verify_what, verify_mesh;
  auto* verify = app.add_subcommand("verify", "numerical verification checks");
  verify->add_option("target", verify_what, "gradients|prox|gap-bound|smoothness|flow")
      ->required();
  verify->add_option("--mesh", verify_mesh, "mesh file or preset where applicable");

  std::vector<std::string> report_dirs;
  std::string report_csv;
  auto* report_cmd = app.add_subcommand("report", "comparison table over finished runs");
  report_cmd->add_option("dirs", report_dirs, "run directories")->required();
  report_cmd->add_option("--csv", report_csv, "also write report.csv here");

  CLI11_PARSE(app, argc, argv);

  try {
    if (simulate->parsed())
      return cmd_simulate(scenario_arg, mesh_arg, recon_arg, seed, scale, out_arg);
    if (reconstruct->parsed())
      return cmd_reconstruct(data_arg, predictor_arg, config_arg, run_out_arg);
    if (verify->parsed()) return cmd_verify(verify_what, verify_mesh);
    if (report_cmd->parsed()) {
      std::vector<fs::path> dirs(report_dirs.begin(), report_dirs.end());
      std::cout << report(dirs, report_csv.empty() ? fs::path{} : fs::path(report_csv));
      return 0;
    }
  } catch (const NumericError& err) {
    std::cerr << "numeric error: " << err.what() << "\n";
    return 2;
  } catch (const Error& err) {
    std::cerr << "error: " << err.what() << "\n";
    return 1;
  }
  return 0;
}
