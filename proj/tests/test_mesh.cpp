#include <gtest/gtest.h>

#include <set>

#include "support.hpp"

namespace shapeid {
namespace {

using testing::rng;
using testing::uniform;

void expect_invariants(const TriangleMesh& mesh) {
  double area = 0.0;
  for (std::size_t t = 0; t < mesh.num_triangles(); ++t) {
    EXPECT_GT(mesh.area(t), 0.0);
    area += mesh.area(t);
  }
  EXPECT_NEAR(area, 4.0, 4e-9);

  // each interface edge joins one triangle of each subdomain
  for (const auto& e : mesh.interface_edges()) {
    EXPECT_EQ(mesh.subdomain(static_cast<std::size_t>(e.outer_triangle)), 1);
    EXPECT_EQ(mesh.subdomain(static_cast<std::size_t>(e.inner_triangle)), 2);
  }

  // boundary tags cover the four sides exactly
  std::array<double, 4> side_length{};
  for (const auto& b : mesh.boundary_edges())
    side_length[static_cast<std::size_t>(b.tag)] += norm(mesh.node(b.nodes[1]) - mesh.node(b.nodes[0]));
  for (double l : side_length) EXPECT_NEAR(l, 2.0, 1e-12);

  // p + eps n lies in subdomain 1, p - eps n in subdomain 2
  const auto c = extract_interface(mesh);
  const PointLocator loc(mesh);
  for (std::size_t i = 0; i < c.size(); ++i) {
    const double eps = 0.1 * std::min(c.edge_lengths[i], c.edge_lengths[c.prev(i)]);
    EXPECT_EQ(mesh.subdomain(loc.locate(c.points[i] + eps * c.normals[i]).triangle), 1);
    EXPECT_EQ(mesh.subdomain(loc.locate(c.points[i] - eps * c.normals[i]).triangle), 2);
  }
}

TEST(OgridMesh, CircleHasOneLoopOfGivenVertices) {
  const auto mesh = generate_ogrid_mesh(64, {0.0, 0.0}, 0.5, 3);
  const auto c = extract_interface(mesh);
  EXPECT_EQ(c.size(), 64u);
  EXPECT_EQ(mesh.interface_edges().size(), 64u);
  for (const auto& p : c.points) EXPECT_NEAR(norm(p), 0.5, 1e-14);
  expect_invariants(mesh);
}

TEST(OgridMesh, SquarePolygon) {
  const auto mesh = generate_ogrid_mesh(std::vector<Vec2>{{-0.3, -0.3}, {0.3, -0.3}, {0.3, 0.3}, {-0.3, 0.3}}, 2);
  EXPECT_EQ(extract_interface(mesh).size(), 4u);
  expect_invariants(mesh);
}

TEST(OgridMesh, ClockwisePolygonIsReoriented) {
  auto poly = circle_polygon({0.1, 0.0}, 0.4, 20);
  std::reverse(poly.begin(), poly.end());
  const auto mesh = generate_ogrid_mesh(poly, 1);
  expect_invariants(mesh);
}

TEST(OgridMesh, CellCountsAtTwoRefinements) {
  const auto coarse = generate_ogrid_mesh(64, {0.0, 0.0}, 0.5, 4);
  const auto fine = generate_ogrid_mesh(64, {0.0, 0.0}, 0.5, 8);
  EXPECT_GT(coarse.num_triangles(), 20000u);
  EXPECT_LT(coarse.num_triangles(), 32000u);
  EXPECT_GT(fine.num_triangles(), 80000u);
  EXPECT_LT(fine.num_triangles(), 125000u);
  const double ratio = static_cast<double>(fine.num_triangles()) / static_cast<double>(coarse.num_triangles());
  EXPECT_GT(ratio, 3.5);
  EXPECT_LT(ratio, 4.5);
}

TEST(OgridMesh, RandomStarPolygonsSatisfyInvariants) {
  auto g = rng(11);
  for (int trial = 0; trial < 8; ++trial) {
    const int n = 8 + static_cast<int>(uniform(g, 0.0, 40.0));
    const Vec2 center{uniform(g, -0.2, 0.2), uniform(g, -0.2, 0.2)};
    const auto poly = testing::random_star_polygon(g, n, center, uniform(g, 0.2, 0.5), 0.3);
    const auto mesh = generate_ogrid_mesh(poly, 1 + trial % 2);
    SCOPED_TRACE(trial);
    expect_invariants(mesh);
    const auto c = extract_interface(mesh);
    ASSERT_EQ(c.size(), poly.size());
    std::set<std::pair<double, double>> want, got;
    for (const auto& p : poly) want.insert({p.x, p.y});
    for (const auto& p : c.points) got.insert({p.x, p.y});
    EXPECT_EQ(want, got);
  }
}

TEST(OgridMesh, RejectsInvalidPolygons) {
  EXPECT_THROW(generate_ogrid_mesh(std::vector<Vec2>{{-0.5, -0.5}, {0.5, 0.5}, {0.5, -0.5}, {-0.5, 0.5}}, 1), MeshError);
  EXPECT_THROW(generate_ogrid_mesh(std::vector<Vec2>{{-1.0, -0.5}, {0.5, -0.5}, {0.5, 0.5}, {-0.5, 0.5}}, 1), MeshError);
  EXPECT_THROW(generate_ogrid_mesh(4, {0.0, 0.0}, 0.5, 1), MeshError);
  EXPECT_THROW(generate_ogrid_mesh(16, {0.0, 0.0}, 0.5, 0), MeshError);
}

TEST(ExtractInterface, RegularPolygonNormalsAndPerimeter) {
  const auto c = extract_interface(generate_ogrid_mesh(64, {0.0, 0.0}, 0.5, 1));
  for (std::size_t i = 0; i < c.size(); ++i) {
    EXPECT_NEAR(c.normals[i].x, c.points[i].x / 0.5, 1e-12);
    EXPECT_NEAR(c.normals[i].y, c.points[i].y / 0.5, 1e-12);
    EXPECT_NEAR(norm(c.normals[i]), 1.0, 1e-14);
  }
  EXPECT_NEAR(c.perimeter(), 64 * 2 * 0.5 * std::sin(std::numbers::pi / 64), 1e-13);
  double w = 0.0;
  for (double x : c.weights) w += x;
  EXPECT_NEAR(w, c.perimeter(), 1e-13);
}

TEST(ExtractInterface, ReversedOrientationFlipsNormals) {
  const auto c = extract_interface(testing::small_mesh());
  auto pts = c.points;
  std::reverse(pts.begin(), pts.end());
  const auto r = InterfaceCurve::from_polyline(pts);
  const std::size_t n = c.size();
  for (std::size_t i = 0; i < n; ++i) {
    EXPECT_NEAR(r.normals[n - 1 - i].x, -c.normals[i].x, 1e-14);
    EXPECT_NEAR(r.normals[n - 1 - i].y, -c.normals[i].y, 1e-14);
  }
}

TEST(ApplyDisplacement, ZeroIsIdentity) {
  const auto mesh = testing::small_mesh();
  const auto moved = apply_displacement(mesh, std::vector<Vec2>(mesh.num_nodes()));
  EXPECT_EQ(moved.nodes(), mesh.nodes());
  EXPECT_EQ(moved.triangles(), mesh.triangles());
  EXPECT_EQ(moved.subdomains(), mesh.subdomains());
}

TEST(ApplyDisplacement, RadialGrowthMovesInterface) {
  const auto mesh = generate_ogrid_mesh(64, {0.0, 0.0}, 0.5, 1);
  const auto c = extract_interface(mesh);
  std::vector<Vec2> g(c.size());
  for (std::size_t i = 0; i < g.size(); ++i) g[i] = 0.01 * c.normals[i];
  const auto moved = apply_displacement(mesh, extend_to_domain(mesh, c.nodes, g));
  const auto mc = extract_interface(moved);
  double mean = 0.0;
  for (const auto& p : mc.points) mean += norm(p);
  EXPECT_NEAR(mean / static_cast<double>(mc.size()), 0.51, 1e-12);
  EXPECT_EQ(moved.interface_edges().size(), mesh.interface_edges().size());
  expect_invariants(moved);
}

TEST(ApplyDisplacement, InvertedElementIsReported) {
  const auto mesh = testing::small_mesh();
  const auto c = extract_interface(mesh);
  std::vector<Vec2> u(mesh.num_nodes());
  u[static_cast<std::size_t>(c.nodes[0])] = {-2.0, 0.3};
  try {
    apply_displacement(mesh, u);
    FAIL() << "expected InvertedElementError";
  } catch (const InvertedElementError& e) {
    const auto& tri = mesh.triangle(e.triangle());
    EXPECT_TRUE(std::find(tri.begin(), tri.end(), c.nodes[0]) != tri.end());
  }
}

TEST(ApplyDisplacement, RejectsMotionOfOuterBoundary) {
  const auto mesh = testing::small_mesh();
  std::vector<Vec2> u(mesh.num_nodes());
  u[static_cast<std::size_t>(mesh.outer_boundary_nodes().front())] = {0.0, 0.01};
  EXPECT_THROW(apply_displacement(mesh, u), MeshError);
}

TEST(LocatePoint, CentroidAndNodes) {
  const auto mesh = testing::small_mesh(32);
  for (std::size_t t = 0; t < mesh.num_triangles(); t += 7) {
    const auto& tri = mesh.triangle(t);
    const Vec2 x = (mesh.node(tri[0]) + mesh.node(tri[1]) + mesh.node(tri[2])) / 3.0;
    const auto loc = locate_point(mesh, x);
    EXPECT_EQ(loc.triangle, t);
    for (double l : loc.barycentric) EXPECT_NEAR(l, 1.0 / 3.0, 1e-12);
  }
  const PointLocator locator(mesh);
  for (std::size_t i = 0; i < mesh.num_nodes(); ++i) {
    const auto loc = locator.locate(mesh.node(static_cast<int>(i)));
    const auto& tri = mesh.triangle(loc.triangle);
    const auto k = std::find(tri.begin(), tri.end(), static_cast<int>(i)) - tri.begin();
    ASSERT_LT(k, 3);
    EXPECT_NEAR(loc.barycentric[static_cast<std::size_t>(k)], 1.0, 1e-10);
  }
}

TEST(LocatePoint, RandomPointsAgreeWithBruteForce) {
  const auto mesh = generate_ogrid_mesh(40, {0.1, -0.1}, 0.4, 2);
  const PointLocator locator(mesh);
  auto g = rng(5);
  for (int i = 0; i < 10000; ++i) {
    const Vec2 x{uniform(g, -1.0, 1.0), uniform(g, -1.0, 1.0)};
    const auto loc = locator.locate(x);
    const double sum = loc.barycentric[0] + loc.barycentric[1] + loc.barycentric[2];
    EXPECT_LT(std::abs(1.0 - sum), 1e-10);
    for (double l : loc.barycentric) {
      EXPECT_GE(l, -1e-10);
      EXPECT_LE(l, 1.0 + 1e-10);
    }
    // brute-force oracle: the best enclosing triangle over the whole mesh
    double best = -1e300;
    for (std::size_t t = 0; t < mesh.num_triangles(); ++t) {
      const auto& tri = mesh.triangle(t);
      const auto lam = barycentric(mesh.node(tri[0]), mesh.node(tri[1]), mesh.node(tri[2]), x);
      best = std::max(best, std::min({lam[0], lam[1], lam[2]}));
    }
    EXPECT_NEAR(std::min({loc.barycentric[0], loc.barycentric[1], loc.barycentric[2]}), best, 1e-12);
  }
  EXPECT_THROW(locator.locate({1.5, 0.0}), MeshError);
}

TEST(CellField, ConstantPerSubdomain) {
  const auto mesh = testing::small_mesh();
  const auto k = CellField::from_subdomains(mesh, 1.0, 0.001);
  for (std::size_t t = 0; t < mesh.num_triangles(); ++t) EXPECT_EQ(k[t], mesh.subdomain(t) == 1 ? 1.0 : 0.001);
  EXPECT_THROW(CellField::from_subdomains(mesh, 0.0, 1.0), Error);
}

}  // namespace
}  // namespace shapeid
