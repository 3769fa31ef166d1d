#pragma once

#include <cstdint>
#include <optional>
#include <utility>

#include "dyneit/fem.hpp"

namespace dyneit {

enum class ScenarioKind { Baseline, CircularMotion, HaltingMotion, DisappearingInclusions };

ScenarioKind scenario_kind_from_string(const std::string& name);
std::string to_string(ScenarioKind kind);

/// One circular inclusion and its trajectory. Baseline uses the start/end
/// segment; the circular kinds use orbit_radius/phase/revolutions; the
/// disappearing kind additionally hides the inclusion on [hide_from,
/// hide_until).
struct InclusionSpec {
  double radius = 0.2;
  Vec2 start{-0.6, 0.0};
  Vec2 end{0.6, 0.0};
  double orbit_radius = 0.5;
  double phase = 0.0;
  double revolutions = 1.0;
  long hide_from = -1;
  long hide_until = -1;
};

/// Dynamic phantom description; trajectories are deterministic in the frame
/// index. Frame counts, conductivities, and event frames define each
/// scenario; the trajectory geometry defaults are declared choices and fully
/// config-overridable.
struct ScenarioConfig {
  ScenarioKind kind = ScenarioKind::Baseline;
  long frames = 400;
  double background = 1.0;   // S
  double inclusion = 1e-4;   // S
  std::vector<InclusionSpec> inclusions;
  std::vector<std::pair<long, long>> halt_windows;  // HaltingMotion only
  double noise_rel_std = 1e-4;
  std::uint64_t seed = 0;

  void validate(double lower, double upper) const;
};

/// Inclusion center at frame k, or nullopt while hidden.
std::optional<Vec2> inclusion_center(const ScenarioConfig& config, const InclusionSpec& spec,
                                     long k);

/// Two-valued nodal conductivity on the given mesh: background everywhere,
/// inclusion value at nodes within an inclusion disk.
Eigen::VectorXd phantom_at(const ScenarioConfig& config, long k, const Mesh& mesh);

/// Counter-based Gaussian sampler (SplitMix64 keyed by seed/frame/entry with
/// Box-Muller), so noise is reproducible independently of evaluation order.
double counter_gaussian(std::uint64_t seed, std::uint64_t frame, std::uint64_t entry);

/// Solves the CEM at the frame's phantom on the simulation mesh, adds
/// per-entry Gaussian noise with std = noise_rel_std * |current|, and applies
/// precision scaling and excited-electrode exclusion.
MeasurementFrame simulate_frame(const ScenarioConfig& config, long k, const Mesh& sim_mesh,
                                const ElementGeometry& sim_geom,
                                const std::vector<ExcitationPattern>& patterns,
                                double precision_scale);

/// "inverse crime" warning when data would be simulated on the
/// reconstruction discretization; nullopt when the meshes differ.
std::optional<std::string> inverse_crime_warning(const Mesh& sim_mesh, const Mesh& recon_mesh);

/// Named scenario presets: the four canonical scenarios at full scale and
/// their desk-scaled variants.
struct ScenarioPreset {
  std::string name;
  ScenarioConfig scenario;
  int sim_nodes = 0;
  int recon_nodes = 0;
};
std::vector<ScenarioPreset> builtin_configs();
ScenarioPreset find_preset(const std::string& name);

/// Mesh presets by name: tiny, desk-recon (~800), desk-sim (~1500),
/// paper-recon (2917), paper-sim (5039).
Mesh mesh_preset(const std::string& name);

}  // namespace dyneit
