#pragma once

#include <Eigen/Core>
#include <array>
#include <optional>
#include <string>
#include <vector>

#include "dyneit/common.hpp"

namespace dyneit {

using Vec2 = Eigen::Vector2d;

/// Undirected node-index pair forming a boundary edge.
struct Edge {
  int a = 0;
  int b = 0;
  friend bool operator==(const Edge&, const Edge&) = default;
};

/// 2D triangular mesh of a disk with boundary electrodes.
///
/// Immutable after construction; safe to share across threads.
struct Mesh {
  std::vector<Vec2> nodes;
  std::vector<std::array<int, 3>> triangles;
  std::vector<Edge> boundary_edges;
  /// One disjoint boundary-edge subset per electrode.
  std::vector<std::vector<Edge>> electrodes;
  /// Contact impedances zeta_i, one per electrode, all positive.
  std::vector<double> contact_impedances;

  int node_count() const { return static_cast<int>(nodes.size()); }
  int element_count() const { return static_cast<int>(triangles.size()); }
  int electrode_count() const { return static_cast<int>(electrodes.size()); }

  /// Total arc length of electrode i (sum of its edge lengths).
  double electrode_length(int i) const;
  double edge_length(const Edge& e) const { return (nodes[e.b] - nodes[e.a]).norm(); }

  /// Checks all structural invariants; throws MeshError on violation.
  void validate() const;
};

/// Per-element area and constant hat-function gradients.
struct ElementGeometry {
  Eigen::VectorXd area;
  std::vector<std::array<Vec2, 3>> hat_gradients;
  double total_area = 0.0;
};

/// Deterministic concentric-ring triangulation of a disk with evenly spaced
/// electrode arcs on the boundary. Node count lands within 10% of
/// target_nodes; each electrode covers exactly electrode_coverage/n_electrodes
/// of the circumference (arc endpoints are mesh nodes). Contact impedances
/// default to 0.25, which keeps zeta^{-1}|e_i| <= 1 on the canonical
/// 16-electrode half-coverage layout.
Mesh build_disk_mesh(double radius, int target_nodes, int n_electrodes,
                     double electrode_coverage);

/// Computes areas and hat gradients; throws MeshError naming any degenerate
/// element.
ElementGeometry element_geometry(const Mesh& mesh);

struct PointLocation {
  int element = -1;
  Eigen::Vector3d weights = Eigen::Vector3d::Zero();
};

/// Grid-accelerated point-in-mesh queries. Points on shared edges resolve to
/// the lowest containing element index.
class PointLocator {
 public:
  explicit PointLocator(const Mesh& mesh);

  /// Returns the containing element and barycentric weights, or nullopt when
  /// the point lies outside the mesh.
  std::optional<PointLocation> locate(const Vec2& p) const;

 private:
  const Mesh& mesh_;
  Vec2 lo_, hi_;
  int nx_ = 1, ny_ = 1;
  double cell_w_ = 1.0, cell_h_ = 1.0;
  std::vector<std::vector<int>> cells_;
};

/// One-shot convenience wrapper around PointLocator.
std::optional<PointLocation> locate_point(const Mesh& mesh, const Vec2& p);

/// Text mesh format round trip; see README for the file layout.
Mesh load_mesh(const std::string& path);
void save_mesh(const Mesh& mesh, const std::string& path);

}  // namespace dyneit
