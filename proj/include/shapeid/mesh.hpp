#pragma once

// Triangulations of the square [-1,1]^2 split by one closed interior interface.
//
// Subdomain 2 is the region enclosed by the interface, subdomain 1 the rest.
// Interface edges are stored oriented so that subdomain 2 lies on their left,
// i.e. the interface loop runs counter-clockwise around subdomain 2 and the
// right-hand normal of each edge points out of subdomain 2.

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "shapeid/geometry.hpp"

namespace shapeid {

class MeshError : public Error {
 public:
  using Error::Error;
};

/// A deformation collapsed or flipped a triangle.
class InvertedElementError : public MeshError {
 public:
  InvertedElementError(std::size_t triangle, double area)
      : MeshError("inverted element: triangle " + std::to_string(triangle) +
                  " has signed area " + std::to_string(area)),
        triangle_(triangle) {}
  std::size_t triangle() const { return triangle_; }

 private:
  std::size_t triangle_;
};

enum class BoundaryTag : std::uint8_t { bottom, right, top, left };

inline const char* to_string(BoundaryTag tag) {
  switch (tag) {
    case BoundaryTag::bottom: return "bottom";
    case BoundaryTag::right: return "right";
    case BoundaryTag::top: return "top";
    case BoundaryTag::left: return "left";
  }
  return "?";
}

struct BoundaryEdge {
  std::array<int, 2> nodes;
  BoundaryTag tag;
};

/// Interface edge a->b together with its two neighbouring triangles.
struct InterfaceEdge {
  std::array<int, 2> nodes;
  int outer_triangle;  // subdomain 1
  int inner_triangle;  // subdomain 2
};

using Triangle = std::array<int, 3>;

class TriangleMesh {
 public:
  TriangleMesh() = default;

  /// Builds a mesh from raw cells. Boundary edges are tagged from their
  /// position on the square; interface edges are the edges separating the two
  /// subdomains. Throws MeshError if any invariant fails.
  static TriangleMesh from_cells(std::vector<Vec2> nodes, std::vector<Triangle> triangles,
                                 std::vector<int> subdomain) {
    TriangleMesh mesh;
    mesh.nodes_ = std::move(nodes);
    mesh.triangles_ = std::move(triangles);
    mesh.subdomain_ = std::move(subdomain);
    mesh.build_topology();
    mesh.check_areas();
    return mesh;
  }

  /// Same topology, new coordinates. Throws InvertedElementError on a
  /// non-positive triangle.
  TriangleMesh with_nodes(std::vector<Vec2> nodes) const {
    if (nodes.size() != nodes_.size()) throw MeshError("with_nodes: node count mismatch");
    TriangleMesh mesh = *this;
    mesh.nodes_ = std::move(nodes);
    mesh.check_areas();
    return mesh;
  }

  std::size_t num_nodes() const { return nodes_.size(); }
  std::size_t num_triangles() const { return triangles_.size(); }

  const std::vector<Vec2>& nodes() const { return nodes_; }
  const Vec2& node(int i) const { return nodes_[static_cast<std::size_t>(i)]; }
  const std::vector<Triangle>& triangles() const { return triangles_; }
  const Triangle& triangle(std::size_t t) const { return triangles_[t]; }
  int subdomain(std::size_t t) const { return subdomain_[t]; }
  const std::vector<int>& subdomains() const { return subdomain_; }
  const std::vector<BoundaryEdge>& boundary_edges() const { return boundary_edges_; }
  const std::vector<InterfaceEdge>& interface_edges() const { return interface_edges_; }

  double area(std::size_t t) const {
    const auto& tri = triangles_[t];
    return signed_area(node(tri[0]), node(tri[1]), node(tri[2]));
  }

  double total_area() const {
    double sum = 0.0;
    for (std::size_t t = 0; t < triangles_.size(); ++t) sum += area(t);
    return sum;
  }

  bool on_outer_boundary(int node) const { return outer_boundary_[static_cast<std::size_t>(node)] != 0; }
  bool on_interface(int node) const { return interface_node_[static_cast<std::size_t>(node)] != 0; }

  /// Sorted, unique nodes lying on edges with the given tag (corners included).
  std::vector<int> boundary_nodes(BoundaryTag tag) const {
    std::vector<char> mark(nodes_.size(), 0);
    for (const auto& e : boundary_edges_)
      if (e.tag == tag) mark[e.nodes[0]] = mark[e.nodes[1]] = 1;
    std::vector<int> out;
    for (std::size_t i = 0; i < mark.size(); ++i)
      if (mark[i]) out.push_back(static_cast<int>(i));
    return out;
  }

  std::vector<int> outer_boundary_nodes() const {
    std::vector<int> out;
    for (std::size_t i = 0; i < nodes_.size(); ++i)
      if (outer_boundary_[i]) out.push_back(static_cast<int>(i));
    return out;
  }

 private:
  void check_areas() const {
    for (std::size_t t = 0; t < triangles_.size(); ++t) {
      const double a = area(t);
      if (!(a > 0.0)) throw InvertedElementError(t, a);
    }
  }

  void build_topology() {
    const auto n = nodes_.size();
    if (subdomain_.size() != triangles_.size()) throw MeshError("subdomain labels do not match triangle count");
    for (std::size_t t = 0; t < triangles_.size(); ++t) {
      for (int v : triangles_[t])
        if (v < 0 || static_cast<std::size_t>(v) >= n) throw MeshError("triangle references a missing node");
      if (subdomain_[t] != 1 && subdomain_[t] != 2) throw MeshError("subdomain label must be 1 or 2");
    }

    // directed edge (a,b) of a counter-clockwise triangle -> triangle index
    std::map<std::pair<int, int>, int> directed;
    for (std::size_t t = 0; t < triangles_.size(); ++t) {
      const auto& tri = triangles_[t];
      for (int k = 0; k < 3; ++k) {
        const auto key = std::make_pair(tri[k], tri[(k + 1) % 3]);
        if (!directed.emplace(key, static_cast<int>(t)).second)
          throw MeshError("non-conforming mesh: directed edge used twice");
      }
    }

    outer_boundary_.assign(n, 0);
    interface_node_.assign(n, 0);
    boundary_edges_.clear();
    interface_edges_.clear();
    constexpr double on_side = 1e-12;
    for (const auto& [key, t] : directed) {
      const auto [a, b] = key;
      const auto twin = directed.find({b, a});
      if (twin == directed.end()) {
        const Vec2 p = nodes_[a], q = nodes_[b];
        std::optional<BoundaryTag> tag;
        if (std::abs(p.y - 1.0) < on_side && std::abs(q.y - 1.0) < on_side) tag = BoundaryTag::top;
        else if (std::abs(p.y + 1.0) < on_side && std::abs(q.y + 1.0) < on_side) tag = BoundaryTag::bottom;
        else if (std::abs(p.x + 1.0) < on_side && std::abs(q.x + 1.0) < on_side) tag = BoundaryTag::left;
        else if (std::abs(p.x - 1.0) < on_side && std::abs(q.x - 1.0) < on_side) tag = BoundaryTag::right;
        if (!tag) throw MeshError("boundary edge does not lie on the square boundary");
        boundary_edges_.push_back({{a, b}, *tag});
        outer_boundary_[a] = outer_boundary_[b] = 1;
        continue;
      }
      const int s = subdomain_[t], s_twin = subdomain_[twin->second];
      // the inner (subdomain 2) triangle owns a->b, so subdomain 2 lies left of a->b
      if (s == 2 && s_twin == 1) {
        interface_edges_.push_back({{a, b}, twin->second, t});
        interface_node_[a] = interface_node_[b] = 1;
      }
    }

    for (auto tag : {BoundaryTag::bottom, BoundaryTag::right, BoundaryTag::top, BoundaryTag::left}) {
      bool found = false;
      for (const auto& e : boundary_edges_) found = found || e.tag == tag;
      if (!found) throw MeshError(std::string("no boundary edge tagged ") + to_string(tag));
    }
    if (interface_edges_.empty()) throw MeshError("mesh has no interface");
    for (std::size_t i = 0; i < n; ++i)
      if (outer_boundary_[i] && interface_node_[i]) throw MeshError("interface touches the outer boundary");

    // exactly one simple closed loop
    std::vector<int> next(n, -1);
    for (const auto& e : interface_edges_) {
      if (next[e.nodes[0]] != -1) throw MeshError("interface is not a simple loop");
      next[e.nodes[0]] = e.nodes[1];
    }
    const int start = interface_edges_.front().nodes[0];
    std::size_t length = 0;
    int v = start;
    do {
      v = next[v];
      if (v < 0) throw MeshError("interface loop is open");
      ++length;
    } while (v != start && length <= interface_edges_.size());
    if (v != start || length != interface_edges_.size())
      throw MeshError("interface consists of more than one loop");
  }

  std::vector<Vec2> nodes_;
  std::vector<Triangle> triangles_;
  std::vector<int> subdomain_;
  std::vector<BoundaryEdge> boundary_edges_;
  std::vector<InterfaceEdge> interface_edges_;
  std::vector<char> outer_boundary_;
  std::vector<char> interface_node_;
};

/// Closed polyline of interface nodes, counter-clockwise around subdomain 2.
struct InterfaceCurve {
  std::vector<int> nodes;           // mesh node indices in traversal order
  std::vector<Vec2> points;         // coordinates of those nodes
  std::vector<Vec2> normals;        // unit nodal normals (angle bisector of edge normals)
  std::vector<double> weights;      // half the sum of the two adjacent edge lengths
  std::vector<double> edge_lengths; // edge i joins node i and node i+1 (cyclic)
  std::vector<Vec2> edge_normals;   // right-hand unit normal of edge i
  std::vector<int> edge_of;         // index into TriangleMesh::interface_edges() for edge i, or -1

  std::size_t size() const { return points.size(); }
  std::size_t next(std::size_t i) const { return (i + 1) % points.size(); }
  std::size_t prev(std::size_t i) const { return (i + points.size() - 1) % points.size(); }

  double perimeter() const {
    double sum = 0.0;
    for (double l : edge_lengths) sum += l;
    return sum;
  }

  /// Arclength of each node measured from node 0.
  std::vector<double> arclength() const {
    std::vector<double> s(size(), 0.0);
    for (std::size_t i = 1; i < size(); ++i) s[i] = s[i - 1] + edge_lengths[i - 1];
    return s;
  }

  /// Builds the curve geometry for a closed polyline. Normals point to the
  /// right of the traversal direction, so reversing the order flips them.
  static InterfaceCurve from_polyline(std::vector<Vec2> points, std::vector<int> nodes = {}) {
    const std::size_t n = points.size();
    if (n < 3) throw MeshError("closed polyline needs at least three points");
    InterfaceCurve c;
    c.points = std::move(points);
    c.nodes = nodes.empty() ? std::vector<int>(n, -1) : std::move(nodes);
    c.edge_of.assign(n, -1);
    c.edge_lengths.resize(n);
    c.edge_normals.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      const Vec2 t = c.points[(i + 1) % n] - c.points[i];
      const double len = norm(t);
      if (!(len > 0.0)) throw MeshError("degenerate zero-length interface edge");
      c.edge_lengths[i] = len;
      c.edge_normals[i] = right_normal(t) / len;
    }
    c.normals.resize(n);
    c.weights.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t p = (i + n - 1) % n;
      c.normals[i] = normalized(c.edge_normals[p] + c.edge_normals[i]);
      c.weights[i] = 0.5 * (c.edge_lengths[p] + c.edge_lengths[i]);
    }
    return c;
  }
};

inline InterfaceCurve extract_interface(const TriangleMesh& mesh) {
  const auto& edges = mesh.interface_edges();
  std::vector<int> edge_from(mesh.num_nodes(), -1);
  for (std::size_t e = 0; e < edges.size(); ++e) edge_from[edges[e].nodes[0]] = static_cast<int>(e);

  // start from the smallest node index so the ordering is reproducible
  int start = edges.front().nodes[0];
  for (const auto& e : edges) start = std::min(start, e.nodes[0]);

  std::vector<int> order;
  std::vector<int> edge_ids;
  order.reserve(edges.size());
  int v = start;
  do {
    const int e = edge_from[v];
    if (e < 0) throw MeshError("interface loop is open");
    order.push_back(v);
    edge_ids.push_back(e);
    v = edges[e].nodes[1];
  } while (v != start && order.size() <= edges.size());
  if (order.size() != edges.size()) throw MeshError("more than one interface loop");

  std::vector<Vec2> pts;
  pts.reserve(order.size());
  for (int i : order) pts.push_back(mesh.node(i));
  InterfaceCurve c = InterfaceCurve::from_polyline(std::move(pts), std::move(order));
  c.edge_of = std::move(edge_ids);
  return c;
}

/// Shifts every node by u. The displacement must vanish on the square boundary.
inline TriangleMesh apply_displacement(const TriangleMesh& mesh, std::span<const Vec2> u) {
  if (u.size() != mesh.num_nodes()) throw MeshError("displacement size does not match node count");
  std::vector<Vec2> moved(mesh.nodes());
  for (std::size_t i = 0; i < moved.size(); ++i) {
    if (mesh.on_outer_boundary(static_cast<int>(i)) && norm(u[i]) > 1e-12)
      throw MeshError("displacement does not vanish on the outer boundary");
    moved[i] += u[i];
  }
  return mesh.with_nodes(std::move(moved));
}

/// Piecewise-constant cell data, e.g. the diffusivity.
struct CellField {
  std::vector<double> values;

  static CellField from_subdomains(const TriangleMesh& mesh, double k1, double k2) {
    if (!(k1 > 0.0) || !(k2 > 0.0)) throw Error("diffusivities must be positive");
    CellField k;
    k.values.resize(mesh.num_triangles());
    for (std::size_t t = 0; t < k.values.size(); ++t) k.values[t] = mesh.subdomain(t) == 1 ? k1 : k2;
    return k;
  }
  double operator[](std::size_t t) const { return values[t]; }
  std::size_t size() const { return values.size(); }
};

// ---------------------------------------------------------------------------
// O-grid generation

inline std::vector<Vec2> circle_polygon(Vec2 center, double radius, int n) {
  std::vector<Vec2> pts;
  pts.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const double th = 2.0 * std::numbers::pi * i / n;
    pts.push_back(center + radius * Vec2{std::cos(th), std::sin(th)});
  }
  return pts;
}

namespace detail {

inline double polygon_signed_area(std::span<const Vec2> p) {
  double a = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) a += cross(p[i], p[(i + 1) % p.size()]);
  return 0.5 * a;
}

inline Vec2 polygon_centroid(std::span<const Vec2> p) {
  const double a = polygon_signed_area(p);
  Vec2 c;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const Vec2& u = p[i];
    const Vec2& v = p[(i + 1) % p.size()];
    c += (u + v) * cross(u, v);
  }
  return c / (6.0 * a);
}

inline bool polygon_is_simple(std::span<const Vec2> p) {
  const std::size_t n = p.size();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      if (j == i + 1 || (i == 0 && j == n - 1)) continue;  // adjacent edges share a vertex
      if (segments_intersect(p[i], p[(i + 1) % n], p[j], p[(j + 1) % n])) return false;
    }
  }
  return true;
}

/// First exit point of the ray c + t d from the open square.
inline Vec2 ray_to_square(Vec2 c, Vec2 d) {
  double best = std::numeric_limits<double>::infinity();
  int side = -1;
  auto consider = [&](double t, int s) {
    if (t > 0.0 && t < best) {
      best = t;
      side = s;
    }
  };
  if (d.x > 0) consider((1.0 - c.x) / d.x, 0);
  if (d.x < 0) consider((-1.0 - c.x) / d.x, 1);
  if (d.y > 0) consider((1.0 - c.y) / d.y, 2);
  if (d.y < 0) consider((-1.0 - c.y) / d.y, 3);
  Vec2 b = c + best * d;
  switch (side) {
    case 0: b.x = 1.0; break;
    case 1: b.x = -1.0; break;
    case 2: b.y = 1.0; break;
    case 3: b.y = -1.0; break;
    default: break;
  }
  b.x = std::clamp(b.x, -1.0, 1.0);
  b.y = std::clamp(b.y, -1.0, 1.0);
  return b;
}

}  // namespace detail

/// Structured O-grid mesh conforming to a closed polygonal interface.
///
/// The polygon must be simple, strictly inside the square and star-shaped with
/// respect to its centroid. Inside, concentric scaled copies of the polygon
/// shrink toward the centroid; outside, rings blend the polygon into the square
/// along rays from the centroid with geometrically growing spacing. Rings
/// double or halve their node count to keep cells close to isotropic with
/// target size perimeter / (n * refinement). The interface keeps exactly the
/// given vertices, so the cell count grows roughly with refinement^2.
inline TriangleMesh generate_ogrid_mesh(std::vector<Vec2> polygon, int refinement = 1) {
  if (polygon.size() < 3) throw MeshError("interface polygon needs at least three vertices");
  if (refinement < 1) throw MeshError("refinement must be a positive integer");
  for (const auto& p : polygon)
    if (!(std::abs(p.x) < 1.0 - 1e-9 && std::abs(p.y) < 1.0 - 1e-9))
      throw MeshError("interface polygon touches or leaves the square");
  if (detail::polygon_signed_area(polygon) < 0.0) std::reverse(polygon.begin(), polygon.end());
  if (!detail::polygon_is_simple(polygon)) throw MeshError("interface polygon is self-intersecting");

  const std::size_t n = polygon.size();
  const Vec2 c = detail::polygon_centroid(polygon);
  for (std::size_t i = 0; i < n; ++i)
    if (!(cross(polygon[i] - c, polygon[(i + 1) % n] - c) > 0.0))
      throw MeshError("interface polygon is not star-shaped about its centroid");

  double perimeter = 0.0, mean_radius = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    perimeter += norm(polygon[(i + 1) % n] - polygon[i]);
    mean_radius += norm(polygon[i] - c);
  }
  mean_radius /= static_cast<double>(n);
  const double spacing = perimeter / static_cast<double>(n) / refinement;

  // Ring nodes sit at fractional polygon parameters s in [0, n): vertex floor(s)
  // blended linearly toward the next vertex.
  auto on_polygon = [&](double s) {
    const auto i = static_cast<std::size_t>(s);
    const double f = s - static_cast<double>(i);
    return (1.0 - f) * polygon[i % n] + f * polygon[(i + 1) % n];
  };
  auto doubled = [&](const std::vector<double>& pos) {
    std::vector<double> out;
    out.reserve(2 * pos.size());
    for (std::size_t j = 0; j < pos.size(); ++j) {
      const double a = pos[j];
      const double b = j + 1 < pos.size() ? pos[j + 1] : pos[0] + static_cast<double>(n);
      out.push_back(a);
      out.push_back(0.5 * (a + b));
    }
    return out;
  };
  auto halved = [](const std::vector<double>& pos) {
    std::vector<double> out;
    for (std::size_t j = 0; j < pos.size(); j += 2) out.push_back(pos[j]);
    return out;
  };
  auto loop_length = [](const std::vector<Vec2>& pts) {
    double l = 0.0;
    for (std::size_t j = 0; j < pts.size(); ++j) l += norm(pts[(j + 1) % pts.size()] - pts[j]);
    return l;
  };

  std::vector<Vec2> nodes(polygon.begin(), polygon.end());
  std::vector<Triangle> tris;
  std::vector<int> labels;

  auto add_tri = [&](int a, int b, int d, int label) {
    if (signed_area(nodes[a], nodes[b], nodes[d]) < 0.0) std::swap(b, d);
    tris.push_back({a, b, d});
    labels.push_back(label);
  };
  auto add_ring = [&](const std::vector<Vec2>& pts) {
    std::vector<int> ids(pts.size());
    for (std::size_t j = 0; j < pts.size(); ++j) {
      ids[j] = static_cast<int>(nodes.size());
      nodes.push_back(pts[j]);
    }
    return ids;
  };
  // strip between two rings of equal size (shorter diagonal), or between a
  // coarse ring and a fine ring with twice the nodes (fine[2j] matches coarse[j])
  auto connect = [&](const std::vector<int>& r0, const std::vector<int>& r1, int label) {
    if (r0.size() == r1.size()) {
      const std::size_t m = r0.size();
      for (std::size_t j = 0; j < m; ++j) {
        const int a0 = r0[j], a1 = r0[(j + 1) % m], b0 = r1[j], b1 = r1[(j + 1) % m];
        if (norm(nodes[a0] - nodes[b1]) <= norm(nodes[a1] - nodes[b0])) {
          add_tri(a0, a1, b1, label);
          add_tri(a0, b1, b0, label);
        } else {
          add_tri(a0, a1, b0, label);
          add_tri(a1, b1, b0, label);
        }
      }
      return;
    }
    const auto& coarse = r0.size() < r1.size() ? r0 : r1;
    const auto& fine = r0.size() < r1.size() ? r1 : r0;
    const std::size_t m = coarse.size(), mf = fine.size();
    for (std::size_t j = 0; j < m; ++j) {
      const int a0 = coarse[j], a1 = coarse[(j + 1) % m];
      const int b0 = fine[2 * j], b1 = fine[2 * j + 1], b2 = fine[(2 * j + 2) % mf];
      add_tri(a0, b0, b1, label);
      add_tri(a0, b1, a1, label);
      add_tri(a1, b1, b2, label);
    }
  };

  std::vector<double> interface_pos(n);
  std::vector<int> interface_ids(n);
  for (std::size_t i = 0; i < n; ++i) {
    interface_pos[i] = static_cast<double>(i);
    interface_ids[i] = static_cast<int>(i);
  }

  // inner rings
  const int inner_rings = std::max(1, static_cast<int>(std::lround(mean_radius / spacing)));
  std::vector<double> pos = interface_pos;
  std::vector<int> ring = interface_ids;
  for (int k = 1; k < inner_rings; ++k) {
    const double t = 1.0 - static_cast<double>(k) / inner_rings;
    auto place = [&](const std::vector<double>& ps) {
      std::vector<Vec2> pts(ps.size());
      for (std::size_t j = 0; j < ps.size(); ++j) pts[j] = c + t * (on_polygon(ps[j]) - c);
      return pts;
    };
    auto pts = place(pos);
    const double tangential = loop_length(pts) / static_cast<double>(pos.size());
    if (tangential > 1.4 * spacing) {
      pos = doubled(pos);
      pts = place(pos);
    } else if (pos.size() % 2 == 0 && pos.size() / 2 >= 6 && tangential < 0.7 * spacing) {
      pos = halved(pos);
      pts = place(pos);
    }
    auto inner = add_ring(pts);
    connect(ring, inner, 2);
    ring = std::move(inner);
  }
  const int center = static_cast<int>(nodes.size());
  nodes.push_back(c);
  for (std::size_t j = 0; j < ring.size(); ++j) add_tri(ring[j], ring[(j + 1) % ring.size()], center, 2);

  // outer rings
  double mean_gap = 0.0;
  for (std::size_t i = 0; i < n; ++i) mean_gap += norm(detail::ray_to_square(c, polygon[i] - c) - polygon[i]);
  mean_gap /= static_cast<double>(n);
  const double growth = 1.0 + spacing / mean_radius;
  const int outer_rings =
      std::max(1, static_cast<int>(std::lround(std::log1p(mean_gap / mean_radius) / std::log(growth))));
  const double total = std::pow(growth, outer_rings) - 1.0;
  auto blend = [&](int k) { return k >= outer_rings ? 1.0 : (std::pow(growth, k) - 1.0) / total; };

  pos = interface_pos;
  ring = interface_ids;
  for (int k = 1; k <= outer_rings; ++k) {
    const double sk = blend(k);
    auto place = [&](const std::vector<double>& ps) {
      std::vector<Vec2> pts(ps.size());
      for (std::size_t j = 0; j < ps.size(); ++j) {
        const Vec2 p = on_polygon(ps[j]);
        pts[j] = p + sk * (detail::ray_to_square(c, p - c) - p);
      }
      return pts;
    };
    auto pts = place(pos);
    const double radial = std::max(spacing, mean_gap * (sk - blend(k - 1)));
    if (loop_length(pts) / static_cast<double>(pos.size()) > 1.4 * radial) {
      pos = doubled(pos);
      pts = place(pos);
    }
    if (k == outer_rings) {
      std::vector<char> snapped(pts.size(), 0);
      for (const Vec2 corner : {Vec2{1, 1}, Vec2{-1, 1}, Vec2{-1, -1}, Vec2{1, -1}}) {
        std::size_t best = 0;
        for (std::size_t j = 1; j < pts.size(); ++j)
          if (norm(pts[j] - corner) < norm(pts[best] - corner)) best = j;
        if (snapped[best]) throw MeshError("too few interface vertices to resolve the square corners");
        snapped[best] = 1;
        pts[best] = corner;
      }
    }
    auto outer = add_ring(pts);
    connect(outer, ring, 1);
    ring = std::move(outer);
  }

  return TriangleMesh::from_cells(std::move(nodes), std::move(tris), std::move(labels));
}

/// Circle variant: `n_interface` equally spaced vertices.
inline TriangleMesh generate_ogrid_mesh(int n_interface, Vec2 center, double radius, int refinement = 1) {
  if (n_interface < 8) throw MeshError("n_interface must be at least 8");
  if (!(radius > 0.0)) throw MeshError("radius must be positive");
  return generate_ogrid_mesh(circle_polygon(center, radius, n_interface), refinement);
}

// ---------------------------------------------------------------------------
// Point location

struct PointLocation {
  std::size_t triangle;
  std::array<double, 3> barycentric;
};

inline std::array<double, 3> barycentric(const Vec2& a, const Vec2& b, const Vec2& c, const Vec2& x) {
  const double det = cross(b - a, c - a);
  const double l1 = cross(x - a, c - a) / det;
  const double l2 = cross(b - a, x - a) / det;
  return {1.0 - l1 - l2, l1, l2};
}

/// Uniform background grid of buckets over [-1,1]^2 listing overlapping triangles.
class PointLocator {
 public:
  static constexpr double tolerance = 1e-10;

  explicit PointLocator(const TriangleMesh& mesh) : mesh_(&mesh) {
    cells_ = std::max<std::size_t>(1, static_cast<std::size_t>(std::sqrt(static_cast<double>(mesh.num_triangles()) / 2.0)));
    buckets_.assign(cells_ * cells_, {});
    for (std::size_t t = 0; t < mesh.num_triangles(); ++t) {
      const auto& tri = mesh.triangle(t);
      double x0 = 2, x1 = -2, y0 = 2, y1 = -2;
      for (int v : tri) {
        const Vec2 p = mesh.node(v);
        x0 = std::min(x0, p.x);
        x1 = std::max(x1, p.x);
        y0 = std::min(y0, p.y);
        y1 = std::max(y1, p.y);
      }
      const auto [i0, j0] = bucket_of({x0, y0});
      const auto [i1, j1] = bucket_of({x1, y1});
      for (std::size_t i = i0; i <= i1; ++i)
        for (std::size_t j = j0; j <= j1; ++j) buckets_[i * cells_ + j].push_back(static_cast<int>(t));
    }
  }

  /// Triangle containing x (largest minimal barycentric coordinate among candidates).
  PointLocation locate(const Vec2& x) const {
    if (std::abs(x.x) > 1.0 + tolerance || std::abs(x.y) > 1.0 + tolerance)
      throw MeshError("point outside the domain");
    const auto [i, j] = bucket_of(x);
    std::optional<PointLocation> best;
    double best_min = -std::numeric_limits<double>::infinity();
    for (int t : buckets_[i * cells_ + j]) {
      const auto& tri = mesh_->triangle(static_cast<std::size_t>(t));
      const auto lam = barycentric(mesh_->node(tri[0]), mesh_->node(tri[1]), mesh_->node(tri[2]), x);
      const double lo = std::min({lam[0], lam[1], lam[2]});
      if (lo > best_min) {
        best_min = lo;
        best = PointLocation{static_cast<std::size_t>(t), lam};
      }
    }
    if (!best || best_min < -tolerance) throw MeshError("point location failed");
    return *best;
  }

 private:
  std::pair<std::size_t, std::size_t> bucket_of(const Vec2& p) const {
    auto idx = [this](double v) {
      const double s = (v + 1.0) / 2.0 * static_cast<double>(cells_);
      return static_cast<std::size_t>(std::clamp(s, 0.0, static_cast<double>(cells_ - 1)));
    };
    return {idx(p.x), idx(p.y)};
  }

  const TriangleMesh* mesh_;
  std::size_t cells_;
  std::vector<std::vector<int>> buckets_;
};

inline PointLocation locate_point(const TriangleMesh& mesh, const Vec2& x) { return PointLocator(mesh).locate(x); }

}  // namespace shapeid
