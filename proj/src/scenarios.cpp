#include "dyneit/scenarios.hpp"

#include <cmath>
#include <numbers>

namespace dyneit {

ScenarioKind scenario_kind_from_string(const std::string& name) {
  if (name == "baseline") return ScenarioKind::Baseline;
  if (name == "circular") return ScenarioKind::CircularMotion;
  if (name == "halting") return ScenarioKind::HaltingMotion;
  if (name == "disappearing") return ScenarioKind::DisappearingInclusions;
  throw ParameterError("unknown scenario '" + name + "' (baseline|circular|halting|disappearing)");
}

std::string to_string(ScenarioKind kind) {
  switch (kind) {
    case ScenarioKind::Baseline: return "baseline";
    case ScenarioKind::CircularMotion: return "circular";
    case ScenarioKind::HaltingMotion: return "halting";
    case ScenarioKind::DisappearingInclusions: return "disappearing";
  }
  return "baseline";
}

void ScenarioConfig::validate(double lower, double upper) const {
  if (frames < 1) throw ParameterError("scenario needs at least one frame");
  if (background < lower || background > upper || inclusion < lower || inclusion > upper)
    throw ParameterError("scenario conductivities must lie within the admissible box");
  if (inclusions.empty()) throw ParameterError("scenario needs at least one inclusion");
  if (noise_rel_std < 0.0) throw ParameterError("noise level must be nonnegative");
}

namespace {

// Frames actually spent moving up to (excluding) frame k.
long moving_frames_before(const ScenarioConfig& config, long k) {
  long halted = 0;
  for (const auto& [from, until] : config.halt_windows) {
    const long lo = std::max<long>(from, 0);
    const long hi = std::min(until, k);
    if (hi > lo) halted += hi - lo;
  }
  return k - halted;
}

}  // namespace

std::optional<Vec2> inclusion_center(const ScenarioConfig& config, const InclusionSpec& spec,
                                     long k) {
  if (k < 0 || k >= config.frames) throw ParameterError("frame index out of range");
  switch (config.kind) {
    case ScenarioKind::Baseline: {
      const double t = (config.frames > 1) ? static_cast<double>(k) / (config.frames - 1) : 0.0;
      return spec.start + t * (spec.end - spec.start);
    }
    case ScenarioKind::CircularMotion: {
      const double angle =
          spec.phase + 2.0 * std::numbers::pi * spec.revolutions * k / config.frames;
      return Vec2(spec.orbit_radius * std::cos(angle), spec.orbit_radius * std::sin(angle));
    }
    case ScenarioKind::HaltingMotion: {
      const double step = 2.0 * std::numbers::pi * spec.revolutions / config.frames;
      const double angle = spec.phase + step * moving_frames_before(config, k);
      return Vec2(spec.orbit_radius * std::cos(angle), spec.orbit_radius * std::sin(angle));
    }
    case ScenarioKind::DisappearingInclusions: {
      if (spec.hide_from >= 0 && k >= spec.hide_from && k < spec.hide_until) return std::nullopt;
      const double angle =
          spec.phase + 2.0 * std::numbers::pi * spec.revolutions * k / config.frames;
      return Vec2(spec.orbit_radius * std::cos(angle), spec.orbit_radius * std::sin(angle));
    }
  }
  return std::nullopt;
}

Eigen::VectorXd phantom_at(const ScenarioConfig& config, long k, const Mesh& mesh) {
  Eigen::VectorXd x = Eigen::VectorXd::Constant(mesh.node_count(), config.background);
  for (const InclusionSpec& spec : config.inclusions) {
    const auto center = inclusion_center(config, spec, k);
    if (!center) continue;
    for (int i = 0; i < mesh.node_count(); ++i)
      if ((mesh.nodes[i] - *center).norm() <= spec.radius) x[i] = config.inclusion;
  }
  return x;
}

namespace {

std::uint64_t splitmix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

double to_unit(std::uint64_t bits) {
  // (0, 1]: avoids log(0) in Box-Muller.
  return (static_cast<double>(bits >> 11) + 1.0) * 0x1.0p-53;
}

}  // namespace

double counter_gaussian(std::uint64_t seed, std::uint64_t frame, std::uint64_t entry) {
  const std::uint64_t key = splitmix64(splitmix64(splitmix64(seed) ^ frame) ^ entry);
  const double u1 = to_unit(key);
  const double u2 = to_unit(splitmix64(key));
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

MeasurementFrame simulate_frame(const ScenarioConfig& config, long k, const Mesh& sim_mesh,
                                const ElementGeometry& sim_geom,
                                const std::vector<ExcitationPattern>& patterns,
                                double precision_scale) {
  ConductivityField x;
  x.values = phantom_at(config, k, sim_mesh);
  x.lower = std::min(config.inclusion, config.background);
  x.upper = std::max(config.inclusion, config.background);

  CemSystem system(sim_mesh, sim_geom);
  system.factorize(x);

  const int n1 = sim_mesh.electrode_count();
  std::vector<double> entries;
  entries.reserve(patterns.size() * n1);
  std::uint64_t entry_index = 0;
  for (const ExcitationPattern& pattern : patterns) {
    const CemSolution sol = system.solve_pattern(pattern);
    for (int i = 0; i < n1; ++i) {
      if (i == pattern.excited) continue;
      double value = sol.currents[i];
      if (config.noise_rel_std > 0.0)
        value += config.noise_rel_std * std::abs(value) *
                 counter_gaussian(config.seed, static_cast<std::uint64_t>(k), entry_index);
      entries.push_back(precision_scale * value);
      ++entry_index;
    }
  }
  MeasurementFrame frame;
  frame.values = Eigen::Map<Eigen::VectorXd>(entries.data(), static_cast<long>(entries.size()));
  frame.frame = k;
  frame.precision_scale = precision_scale;
  return frame;
}

std::optional<std::string> inverse_crime_warning(const Mesh& sim_mesh, const Mesh& recon_mesh) {
  if (sim_mesh.node_count() != recon_mesh.node_count()) return std::nullopt;
  for (int i = 0; i < sim_mesh.node_count(); ++i)
    if (sim_mesh.nodes[i] != recon_mesh.nodes[i]) return std::nullopt;
  return "inverse crime: simulation and reconstruction share one discretization; "
         "results will be unrealistically good";
}

std::vector<ScenarioPreset> builtin_configs() {
  std::vector<ScenarioPreset> presets;

  ScenarioConfig baseline;
  baseline.kind = ScenarioKind::Baseline;
  baseline.frames = 400;
  baseline.inclusions = {InclusionSpec{.radius = 0.2, .start = {-0.6, 0.0}, .end = {0.6, 0.0}}};

  ScenarioConfig circular;
  circular.kind = ScenarioKind::CircularMotion;
  circular.frames = 2000;
  circular.inclusions = {InclusionSpec{.radius = 0.2, .orbit_radius = 0.5, .revolutions = 1.0}};

  ScenarioConfig halting;
  halting.kind = ScenarioKind::HaltingMotion;
  halting.frames = 2000;
  halting.inclusions = {InclusionSpec{.radius = 0.2, .orbit_radius = 0.5, .revolutions = 1.0}};
  halting.halt_windows = {{1000, 1250}, {1750, 2000}};

  ScenarioConfig disappearing;
  disappearing.kind = ScenarioKind::DisappearingInclusions;
  disappearing.frames = 2000;
  disappearing.inclusions = {
      InclusionSpec{.radius = 0.25, .orbit_radius = 0.5, .phase = 0.0, .revolutions = 0.5,
                    .hide_from = 500, .hide_until = 1500},
      InclusionSpec{.radius = 0.2, .orbit_radius = 0.5, .phase = std::numbers::pi,
                    .revolutions = 0.5, .hide_from = 1000, .hide_until = 1500}};

  for (auto [config, name] : {std::pair{baseline, std::string("baseline")},
                              {circular, "circular"},
                              {halting, "halting"},
                              {disappearing, "disappearing"}}) {
    presets.push_back({name, config, 5039, 2917});
    presets.push_back({name + "-desk", config, 1519, 817});
  }
  return presets;
}

ScenarioPreset find_preset(const std::string& name) {
  for (ScenarioPreset& preset : builtin_configs())
    if (preset.name == name) return preset;
  throw ParameterError("unknown scenario preset '" + name + "'");
}

Mesh mesh_preset(const std::string& name) {
  if (name == "tiny") return build_disk_mesh(1.0, 64, 4, 0.4);
  if (name == "desk-recon") return build_disk_mesh(1.0, 817, 16, 0.5);
  if (name == "desk-sim") return build_disk_mesh(1.0, 1519, 16, 0.5);
  if (name == "paper-recon") return build_disk_mesh(1.0, 2917, 16, 0.5);
  if (name == "paper-sim") return build_disk_mesh(1.0, 5039, 16, 0.5);
  throw ParameterError("unknown mesh preset '" + name +
                       "' (tiny|desk-recon|desk-sim|paper-recon|paper-sim)");
}

}  // namespace dyneit
