#include "dyneit/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <set>
#include <sstream>

namespace dyneit {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

// Signed area of triangle (a, b, c); positive when counter-clockwise.
double signed_area(const Vec2& a, const Vec2& b, const Vec2& c) {
  return 0.5 * ((b.x() - a.x()) * (c.y() - a.y()) - (c.x() - a.x()) * (b.y() - a.y()));
}

std::pair<int, int> key(const Edge& e) {
  return {std::min(e.a, e.b), std::max(e.a, e.b)};
}

int ring_node_count(int ring) { return ring == 0 ? 1 : 6 * ring; }
int ring_start(int ring) { return ring == 0 ? 0 : 1 + 3 * ring * (ring - 1); }

// Boundary edges (each incident to exactly one triangle), oriented as they
// appear in their triangle and sorted by node-index key. Both the mesher and
// the file loader use this, so round trips reproduce the same sequence.
std::vector<Edge> derive_boundary_edges(const std::vector<std::array<int, 3>>& triangles) {
  std::map<std::pair<int, int>, std::pair<int, Edge>> edge_use;
  for (const auto& tri : triangles)
    for (int k = 0; k < 3; ++k) {
      Edge e{tri[k], tri[(k + 1) % 3]};
      auto& slot = edge_use[key(e)];
      slot.first++;
      slot.second = e;
    }
  std::vector<Edge> out;
  for (const auto& [k, v] : edge_use)
    if (v.first == 1) out.push_back(v.second);
  return out;
}

}  // namespace

double Mesh::electrode_length(int i) const {
  double len = 0.0;
  for (const Edge& e : electrodes[i]) len += edge_length(e);
  return len;
}

void Mesh::validate() const {
  const int n = node_count();
  auto check_index = [&](int idx, const char* what) {
    if (idx < 0 || idx >= n) throw MeshError(std::string(what) + " references node " + std::to_string(idx) + " out of range");
  };

  if (n < 3 || triangles.empty()) throw MeshError("mesh needs at least 3 nodes and one triangle");

  for (size_t t = 0; t < triangles.size(); ++t) {
    const auto& tri = triangles[t];
    for (int v : tri) check_index(v, "triangle");
    double sa = signed_area(nodes[tri[0]], nodes[tri[1]], nodes[tri[2]]);
    if (sa <= 0.0)
      throw MeshError("triangle " + std::to_string(t) + " has non-positive signed area " + std::to_string(sa));
  }

  // Boundary edges derived from connectivity: edges with exactly one incident
  // triangle.
  std::map<std::pair<int, int>, int> edge_use;
  for (const auto& tri : triangles)
    for (int k = 0; k < 3; ++k) edge_use[key({tri[k], tri[(k + 1) % 3]})]++;
  std::set<std::pair<int, int>> derived;
  for (const auto& [e, count] : edge_use) {
    if (count > 2) throw MeshError("edge shared by more than two triangles");
    if (count == 1) derived.insert(e);
  }

  std::set<std::pair<int, int>> stored;
  for (const Edge& e : boundary_edges) {
    check_index(e.a, "boundary edge");
    check_index(e.b, "boundary edge");
    if (!stored.insert(key(e)).second) throw MeshError("duplicate boundary edge");
  }
  if (stored != derived) throw MeshError("stored boundary edges do not match triangle connectivity");

  // Single closed polygon: every boundary node has exactly two incident
  // boundary edges and the edge graph is one cycle.
  std::map<int, std::vector<int>> adj;
  for (const Edge& e : boundary_edges) {
    adj[e.a].push_back(e.b);
    adj[e.b].push_back(e.a);
  }
  for (const auto& [node, nb] : adj)
    if (nb.size() != 2)
      throw MeshError("boundary node " + std::to_string(node) + " has degree " + std::to_string(nb.size()));
  if (!adj.empty()) {
    int start = adj.begin()->first, prev = -1, cur = start;
    size_t visited = 0;
    do {
      int next = (adj[cur][0] == prev) ? adj[cur][1] : adj[cur][0];
      prev = cur;
      cur = next;
      ++visited;
      if (visited > adj.size()) break;
    } while (cur != start);
    if (visited != adj.size()) throw MeshError("boundary edges form more than one polygon");
  }

  // Electrodes: subsets of boundary edges, pairwise disjoint.
  if (electrodes.size() != contact_impedances.size())
    throw MeshError("electrode count does not match contact impedance count");
  std::set<std::pair<int, int>> used;
  for (size_t i = 0; i < electrodes.size(); ++i) {
    if (electrodes[i].empty()) throw MeshError("electrode " + std::to_string(i) + " has no edges");
    for (const Edge& e : electrodes[i]) {
      auto k = key(e);
      if (!derived.count(k))
        throw MeshError("electrode " + std::to_string(i) + " uses a non-boundary edge");
      if (!used.insert(k).second)
        throw MeshError("electrode edge sets overlap at edge (" + std::to_string(e.a) + "," + std::to_string(e.b) + ")");
    }
    if (contact_impedances[i] <= 0.0)
      throw MeshError("contact impedance of electrode " + std::to_string(i) + " must be positive");
  }
}

Mesh build_disk_mesh(double radius, int target_nodes, int n_electrodes,
                     double electrode_coverage) {
  if (radius <= 0.0) throw ParameterError("radius must be positive");
  if (n_electrodes < 1) throw ParameterError("need at least one electrode");
  if (electrode_coverage <= 0.0 || electrode_coverage >= 1.0)
    throw ParameterError("electrode coverage must lie in (0,1)");
  if (target_nodes < 3 * n_electrodes)
    throw ParameterError("target_nodes must be at least 3*n_electrodes");

  // nodes(R) = 3R^2 + 3R + 1; pick the ring count closest to the target.
  int rings = std::max(1, static_cast<int>(std::lround((-3.0 + std::sqrt(12.0 * target_nodes - 3.0)) / 6.0)));
  auto node_total = [](int r) { return 3 * r * r + 3 * r + 1; };
  if (std::abs(node_total(rings + 1) - target_nodes) < std::abs(node_total(rings) - target_nodes)) ++rings;

  // Outer-ring angles place nodes exactly on electrode arc endpoints so the
  // electrode geometry is independent of the mesh resolution. Each electrode
  // arc [2*pi*i/E - w, 2*pi*i/E + w] and each inter-electrode gap is split
  // into pieces close to the ideal uniform spacing of 6*rings outer nodes.
  const double half_width = std::numbers::pi * electrode_coverage / n_electrodes;
  const int ideal_outer = 6 * rings;
  std::vector<double> outer_angles;
  {
    // Alternate electrode/gap segments, starting at electrode 0's left end.
    std::vector<double> bounds;  // in a frame shifted by +half_width
    for (int e = 0; e < n_electrodes; ++e) {
      bounds.push_back(kTwoPi * e / n_electrodes);
      bounds.push_back(kTwoPi * e / n_electrodes + 2.0 * half_width);
    }
    bounds.push_back(kTwoPi);
    for (size_t s = 0; s + 1 < bounds.size(); ++s) {
      const double len = bounds[s + 1] - bounds[s];
      const int pieces = std::max(1, static_cast<int>(std::lround(len * ideal_outer / kTwoPi)));
      for (int j = 0; j < pieces; ++j)
        outer_angles.push_back(bounds[s] + len * j / pieces - half_width);
    }
    std::sort(outer_angles.begin(), outer_angles.end());
  }
  const int m_out = static_cast<int>(outer_angles.size());

  Mesh mesh;
  mesh.nodes.reserve(ring_start(rings) + m_out);
  mesh.nodes.emplace_back(0.0, 0.0);
  for (int i = 1; i < rings; ++i) {
    const double r = radius * static_cast<double>(i) / rings;
    const int m = ring_node_count(i);
    for (int j = 0; j < m; ++j) {
      const double ang = kTwoPi * j / m;
      mesh.nodes.emplace_back(r * std::cos(ang), r * std::sin(ang));
    }
  }
  const int base_outer = ring_start(rings);
  for (double ang : outer_angles)
    mesh.nodes.emplace_back(radius * std::cos(ang), radius * std::sin(ang));

  // Stitch consecutive rings with a two-pointer angular walk; ring node m of
  // an interior ring with n nodes sits at angle 2*pi*m/n, the outer ring uses
  // its explicit angle list.
  for (int i = 1; i <= rings; ++i) {
    const int n_in = ring_node_count(i - 1);
    const int n_out = (i == rings) ? m_out : ring_node_count(i);
    const int base_in = ring_start(i - 1), base_out = ring_start(i);
    auto angle_out = [&](int t) {
      if (i < rings) return kTwoPi * t / n_out;
      return (t < n_out) ? outer_angles[t] : outer_angles[t - n_out] + kTwoPi;
    };
    if (i == 1) {
      for (int j = 0; j < n_out; ++j)
        mesh.triangles.push_back({0, base_out + j, base_out + (j + 1) % n_out});
      continue;
    }
    int p = 0, q = 0;
    while (p < n_in || q < n_out) {
      const double next_in = kTwoPi * (p + 1) / n_in;
      const double next_out = angle_out(q + 1);
      const bool advance_outer = (p == n_in) || (q < n_out && next_out <= next_in);
      if (advance_outer) {
        mesh.triangles.push_back({base_in + p % n_in, base_out + q % n_out, base_out + (q + 1) % n_out});
        ++q;
      } else {
        mesh.triangles.push_back({base_in + p % n_in, base_out + q % n_out, base_in + (p + 1) % n_in});
        ++p;
      }
    }
  }

  mesh.boundary_edges = derive_boundary_edges(mesh.triangles);

  // Electrode membership by strict midpoint test; arc endpoints are nodes, so
  // no edge straddles an arc boundary.
  mesh.electrodes.resize(n_electrodes);
  for (int j = 0; j < m_out; ++j) {
    const int jn = (j + 1) % m_out;
    const double next = (jn == 0) ? outer_angles[0] + kTwoPi : outer_angles[jn];
    const double mid = 0.5 * (outer_angles[j] + next);
    for (int e = 0; e < n_electrodes; ++e) {
      const double center = kTwoPi * e / n_electrodes;
      if (std::abs(std::remainder(mid - center, kTwoPi)) < half_width) {
        mesh.electrodes[e].push_back({base_outer + j, base_outer + jn});
        break;
      }
    }
  }
  for (int e = 0; e < n_electrodes; ++e)
    if (mesh.electrodes[e].empty())
      throw ParameterError("electrode " + std::to_string(e) +
                           " received no boundary edges; increase target_nodes or coverage");

  mesh.contact_impedances.assign(n_electrodes, 0.25);
  mesh.validate();
  return mesh;
}

ElementGeometry element_geometry(const Mesh& mesh) {
  ElementGeometry geom;
  const int m = mesh.element_count();
  geom.area.resize(m);
  geom.hat_gradients.resize(m);
  for (int t = 0; t < m; ++t) {
    const auto& tri = mesh.triangles[t];
    const Vec2& p0 = mesh.nodes[tri[0]];
    const Vec2& p1 = mesh.nodes[tri[1]];
    const Vec2& p2 = mesh.nodes[tri[2]];
    const double area = signed_area(p0, p1, p2);
    if (!(std::abs(area) > 1e-300))
      throw MeshError("element " + std::to_string(t) + " is degenerate (zero area)");
    geom.area[t] = area;
    // grad phi_i = rot90(p_{i+2} - p_{i+1}) / (2 A), rot90(x,y) = (-y,x)
    const std::array<Vec2, 3> pts = {p0, p1, p2};
    for (int i = 0; i < 3; ++i) {
      const Vec2 d = pts[(i + 2) % 3] - pts[(i + 1) % 3];
      geom.hat_gradients[t][i] = Vec2(-d.y(), d.x()) / (2.0 * area);
    }
  }
  geom.total_area = geom.area.sum();
  return geom;
}

PointLocator::PointLocator(const Mesh& mesh) : mesh_(mesh) {
  lo_ = mesh.nodes.front();
  hi_ = mesh.nodes.front();
  for (const Vec2& p : mesh.nodes) {
    lo_ = lo_.cwiseMin(p);
    hi_ = hi_.cwiseMax(p);
  }
  const int m = mesh.element_count();
  const int res = std::max(1, static_cast<int>(std::sqrt(static_cast<double>(m) / 2.0)));
  nx_ = ny_ = res;
  cell_w_ = std::max((hi_.x() - lo_.x()) / nx_, 1e-30);
  cell_h_ = std::max((hi_.y() - lo_.y()) / ny_, 1e-30);
  cells_.assign(static_cast<size_t>(nx_) * ny_, {});

  const double pad = 1e-12 * (hi_ - lo_).norm();
  for (int t = 0; t < m; ++t) {
    const auto& tri = mesh.triangles[t];
    Vec2 tlo = mesh.nodes[tri[0]], thi = tlo;
    for (int k = 1; k < 3; ++k) {
      tlo = tlo.cwiseMin(mesh.nodes[tri[k]]);
      thi = thi.cwiseMax(mesh.nodes[tri[k]]);
    }
    const int ix0 = std::clamp(static_cast<int>((tlo.x() - pad - lo_.x()) / cell_w_), 0, nx_ - 1);
    const int ix1 = std::clamp(static_cast<int>((thi.x() + pad - lo_.x()) / cell_w_), 0, nx_ - 1);
    const int iy0 = std::clamp(static_cast<int>((tlo.y() - pad - lo_.y()) / cell_h_), 0, ny_ - 1);
    const int iy1 = std::clamp(static_cast<int>((thi.y() + pad - lo_.y()) / cell_h_), 0, ny_ - 1);
    for (int iy = iy0; iy <= iy1; ++iy)
      for (int ix = ix0; ix <= ix1; ++ix)
        cells_[static_cast<size_t>(iy) * nx_ + ix].push_back(t);
  }
  // Ascending order makes edge ties resolve to the lowest element index.
  for (auto& cell : cells_) std::sort(cell.begin(), cell.end());
}

std::optional<PointLocation> PointLocator::locate(const Vec2& p) const {
  if (p.x() < lo_.x() - 1e-12 || p.x() > hi_.x() + 1e-12 || p.y() < lo_.y() - 1e-12 ||
      p.y() > hi_.y() + 1e-12)
    return std::nullopt;
  const int ix = std::clamp(static_cast<int>((p.x() - lo_.x()) / cell_w_), 0, nx_ - 1);
  const int iy = std::clamp(static_cast<int>((p.y() - lo_.y()) / cell_h_), 0, ny_ - 1);
  constexpr double tol = 1e-12;
  for (int t : cells_[static_cast<size_t>(iy) * nx_ + ix]) {
    const auto& tri = mesh_.triangles[t];
    const Vec2& a = mesh_.nodes[tri[0]];
    const Vec2& b = mesh_.nodes[tri[1]];
    const Vec2& c = mesh_.nodes[tri[2]];
    const double area = signed_area(a, b, c);
    const double w1 = signed_area(a, p, c) / area;
    const double w2 = signed_area(a, b, p) / area;
    const double w0 = 1.0 - w1 - w2;
    if (w0 >= -tol && w1 >= -tol && w2 >= -tol) {
      Eigen::Vector3d w(w0, w1, w2);
      // Clip the tolerance slack so downstream interpolation stays convex.
      for (int k = 0; k < 3; ++k) w[k] = std::max(w[k], 0.0);
      w /= w.sum();
      return PointLocation{t, w};
    }
  }
  return std::nullopt;
}

std::optional<PointLocation> locate_point(const Mesh& mesh, const Vec2& p) {
  return PointLocator(mesh).locate(p);
}

namespace {

struct LineReader {
  std::istream& in;
  int line_no = 0;
  bool next(std::string& out) {
    while (std::getline(in, out)) {
      ++line_no;
      const auto hash = out.find('#');
      if (hash != std::string::npos) out.erase(hash);
      if (out.find_first_not_of(" \t\r\n") != std::string::npos) return true;
    }
    return false;
  }
};

}  // namespace

Mesh load_mesh(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open mesh file " + path);
  LineReader reader{in};

  Mesh mesh;
  std::string line, section;
  auto fail = [&](const std::string& msg) {
    throw ParseError(path + ":" + std::to_string(reader.line_no) + ": " + msg);
  };

  while (reader.next(line)) {
    std::istringstream ss(line);
    std::string first;
    ss >> first;
    if (first == "nodes" || first == "triangles" || first == "electrodes" || first == "zeta") {
      section = first;
      continue;
    }
    if (section.empty()) fail("content before any section header");
    std::istringstream row(line);
    if (section == "nodes") {
      int idx;
      double x, y;
      if (!(row >> idx >> x >> y)) fail("expected 'index x y'");
      if (idx != static_cast<int>(mesh.nodes.size())) fail("non-sequential node index");
      mesh.nodes.emplace_back(x, y);
    } else if (section == "triangles") {
      int idx, a, b, c;
      if (!(row >> idx >> a >> b >> c)) fail("expected 'index a b c'");
      if (idx != static_cast<int>(mesh.triangles.size())) fail("non-sequential triangle index");
      mesh.triangles.push_back({a, b, c});
    } else if (section == "electrodes") {
      int e, a, b;
      if (!(row >> e >> a >> b)) fail("expected 'electrode a b'");
      if (e < 0) fail("negative electrode index");
      if (e >= static_cast<int>(mesh.electrodes.size())) mesh.electrodes.resize(e + 1);
      mesh.electrodes[e].push_back({a, b});
    } else {
      int e;
      double z;
      if (!(row >> e >> z)) fail("expected 'electrode zeta'");
      if (e < 0) fail("negative electrode index");
      if (e >= static_cast<int>(mesh.contact_impedances.size()))
        mesh.contact_impedances.resize(e + 1, 0.0);
      mesh.contact_impedances[e] = z;
    }
  }
  if (mesh.nodes.empty() || mesh.triangles.empty())
    throw ParseError(path + ": truncated mesh file (missing nodes or triangles)");

  // Boundary edges are derived, not stored.
  mesh.boundary_edges = derive_boundary_edges(mesh.triangles);

  try {
    mesh.validate();
  } catch (const MeshError& err) {
    throw MeshError(path + ": " + err.what());
  }
  return mesh;
}

void save_mesh(const Mesh& mesh, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write mesh file " + path);
  out.precision(17);
  out << "# dyneit mesh\n";
  out << "nodes\n";
  for (int i = 0; i < mesh.node_count(); ++i)
    out << i << " " << mesh.nodes[i].x() << " " << mesh.nodes[i].y() << "\n";
  out << "triangles\n";
  for (int t = 0; t < mesh.element_count(); ++t)
    out << t << " " << mesh.triangles[t][0] << " " << mesh.triangles[t][1] << " "
        << mesh.triangles[t][2] << "\n";
  out << "electrodes\n";
  for (size_t e = 0; e < mesh.electrodes.size(); ++e)
    for (const Edge& edge : mesh.electrodes[e]) out << e << " " << edge.a << " " << edge.b << "\n";
  out << "zeta\n";
  for (size_t e = 0; e < mesh.contact_impedances.size(); ++e)
    out << e << " " << mesh.contact_impedances[e] << "\n";
  if (!out) throw Error("failed writing mesh file " + path);
}

}  // namespace dyneit
