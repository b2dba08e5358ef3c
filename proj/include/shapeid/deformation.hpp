#pragma once

// Extension of interface displacements into the volume by linear elasticity.

#include <span>
#include <vector>

#include "shapeid/fem.hpp"
#include "shapeid/mesh.hpp"

namespace shapeid {

/// Two displacement components per node.
using VectorField2D = std::vector<Vec2>;

struct ElasticityParameters {
  double lambda = 0.0;
  double mu = 1.0;
};

/// P1 vector elasticity, unknowns interleaved as (u_x, u_y) per node:
///   a(u, v) = int 2 mu eps(u) : eps(v) + lambda div u div v
inline SparseSymMatrix assemble_elasticity(const TriangleMesh& mesh, const ElasticityParameters& prm = {}) {
  if (!(prm.mu > 0.0) || prm.lambda < 0.0) throw Error("elasticity needs mu > 0 and lambda >= 0");
  std::vector<Triplet> t;
  t.reserve(36 * mesh.num_triangles());
  for (std::size_t c = 0; c < mesh.num_triangles(); ++c) {
    const auto& tri = mesh.triangle(c);
    const auto el = p1_element(mesh, c);
    // strain rows (eps_xx, eps_yy, 2 eps_xy) for the 6 local dofs
    std::array<std::array<double, 6>, 3> b{};
    for (int a = 0; a < 3; ++a) {
      b[0][2 * a] = el.grad[a].x;
      b[1][2 * a + 1] = el.grad[a].y;
      b[2][2 * a] = el.grad[a].y;
      b[2][2 * a + 1] = el.grad[a].x;
    }
    const double d[3][3] = {{prm.lambda + 2 * prm.mu, prm.lambda, 0}, {prm.lambda, prm.lambda + 2 * prm.mu, 0}, {0, 0, prm.mu}};
    for (int i = 0; i < 6; ++i) {
      for (int j = 0; j < 6; ++j) {
        double v = 0.0;
        for (int r = 0; r < 3; ++r)
          for (int s = 0; s < 3; ++s) v += b[r][i] * d[r][s] * b[s][j];
        t.push_back({2 * tri[i / 2] + i % 2, 2 * tri[j / 2] + j % 2, el.area * v});
      }
    }
  }
  return SparseSymMatrix::from_triplets(2 * mesh.num_nodes(), std::move(t));
}

/// Elastic extension with u = g on the interface nodes and u = 0 on the square.
/// `interface_nodes[i]` receives `g[i]`.
inline VectorField2D extend_to_domain(const TriangleMesh& mesh, std::span<const int> interface_nodes,
                                      std::span<const Vec2> g, const ElasticityParameters& prm = {},
                                      const CgOptions& cg = {}) {
  if (interface_nodes.size() != g.size()) throw Error("one displacement per interface node expected");
  const std::size_t n = mesh.num_nodes();
  std::vector<double> values(2 * n, 0.0);
  std::vector<int> constrained;
  bool all_zero = true;
  for (std::size_t i = 0; i < interface_nodes.size(); ++i) {
    const auto v = static_cast<std::size_t>(interface_nodes[i]);
    if (!mesh.on_interface(static_cast<int>(v))) throw Error("displacement prescribed off the interface");
    values[2 * v] = g[i].x;
    values[2 * v + 1] = g[i].y;
    constrained.push_back(static_cast<int>(2 * v));
    constrained.push_back(static_cast<int>(2 * v + 1));
    all_zero = all_zero && g[i] == Vec2{};
  }
  VectorField2D u(n);
  if (all_zero) return u;
  for (int b : mesh.outer_boundary_nodes()) {
    constrained.push_back(2 * b);
    constrained.push_back(2 * b + 1);
  }
  const DirichletSystem sys(assemble_elasticity(mesh, prm), std::move(constrained));
  std::vector<double> rhs(2 * n, 0.0);
  sys.lift(rhs, values);
  const auto x = cg_solve(sys.matrix(), rhs, cg).x;
  for (std::size_t i = 0; i < n; ++i) u[i] = {x[2 * i], x[2 * i + 1]};
  return u;
}

}  // namespace shapeid
