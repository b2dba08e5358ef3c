#pragma once

// Transient and steady diffusion with a piecewise-constant coefficient, the
// discrete adjoints of both, the tracking objective and the transfer of
// observations between meshes.
//
// Parabolic state (implicit Euler, dt = T/N, y = 1 on the top side):
//   (M + dt K) y^{j+1} = M y^j + dt M f,            j = 0..N-1
// Misfit: sum_{j=1..N} dt/2 |y^j - ybar^j|_M^2.
// Its exact discrete adjoint, stored so that p^N = 0:
//   (M + dt K) p^j = M p^{j+1} - dt M (y^{j+1} - ybar^{j+1}),  j = N-1..0
// p^{j-1} is the multiplier of the step producing y^j, so every gradient
// formula pairs y^j with p^{j-1}.

#include <span>
#include <vector>

#include "shapeid/fem.hpp"
#include "shapeid/mesh.hpp"

namespace shapeid {

/// Nodal fields at t_j = j T / N, j = 0..N.
struct TimeSeriesField {
  double final_time = 0.0;
  int steps = 0;
  std::vector<ScalarField> levels;

  double dt() const { return final_time / steps; }
  double time(int j) const { return j * dt(); }
  const ScalarField& operator[](std::size_t j) const { return levels[j]; }
  ScalarField& operator[](std::size_t j) { return levels[j]; }
  std::size_t num_levels() const { return levels.size(); }
};

struct SolveOptions {
  CgOptions cg{};
};

namespace detail {

inline std::vector<double> constant(std::size_t n, double v) { return std::vector<double>(n, v); }

inline void check_same_grid(const TimeSeriesField& a, const TimeSeriesField& b) {
  if (a.steps != b.steps || a.final_time != b.final_time || a.levels.size() != b.levels.size())
    throw Error("time series live on different time grids");
  for (std::size_t j = 0; j < a.levels.size(); ++j)
    if (a.levels[j].size() != b.levels[j].size()) throw Error("time series live on different meshes");
}

}  // namespace detail

/// Implicit-Euler system M + dt K with the top side constrained.
struct HeatStepOperator {
  SparseSymMatrix mass;
  SparseSymMatrix stiffness;
  DirichletSystem system;
  double dt;

  HeatStepOperator(const TriangleMesh& mesh, const CellField& k, double dt_)
      : mass(assemble_mass(mesh)),
        stiffness(assemble_stiffness(mesh, k)),
        system(mass.plus(dt_, stiffness), mesh.boundary_nodes(BoundaryTag::top)),
        dt(dt_) {}
};

inline TimeSeriesField solve_state_parabolic(const TriangleMesh& mesh, const CellField& k, const ScalarField& f,
                                             const ScalarField& y0, double final_time, int steps,
                                             const SolveOptions& opt = {}) {
  if (!(final_time > 0.0) || steps < 1) throw Error("parabolic solve needs T > 0 and N >= 1");
  const std::size_t n = mesh.num_nodes();
  if (f.size() != n || y0.size() != n) throw Error("source or initial field has the wrong size");
  const double dt = final_time / steps;
  const HeatStepOperator op(mesh, k, dt);
  const auto mf = op.mass * std::span<const double>(f);
  const auto ones = detail::constant(n, 1.0);

  TimeSeriesField y{final_time, steps, {}};
  y.levels.reserve(static_cast<std::size_t>(steps) + 1);
  y.levels.push_back(y0);
  std::vector<double> rhs(n);
  for (int j = 0; j < steps; ++j) {
    op.mass.multiply(y.levels.back(), rhs);
    for (std::size_t i = 0; i < n; ++i) rhs[i] += dt * mf[i];
    op.system.lift(rhs, ones);
    y.levels.push_back(cg_solve(op.system.matrix(), rhs, opt.cg, y.levels.back()).x);
  }
  return y;
}

inline TimeSeriesField solve_adjoint_parabolic(const TriangleMesh& mesh, const CellField& k, const TimeSeriesField& y,
                                               const TimeSeriesField& ybar, const SolveOptions& opt = {}) {
  detail::check_same_grid(y, ybar);
  const std::size_t n = mesh.num_nodes();
  const double dt = y.dt();
  const HeatStepOperator op(mesh, k, dt);
  const auto zeros = detail::constant(n, 0.0);

  TimeSeriesField p{y.final_time, y.steps, std::vector<ScalarField>(y.levels.size(), zeros)};
  std::vector<double> rhs(n), misfit(n), mm(n);
  for (int j = y.steps - 1; j >= 0; --j) {
    const auto& yj = y[static_cast<std::size_t>(j) + 1];
    const auto& bj = ybar[static_cast<std::size_t>(j) + 1];
    for (std::size_t i = 0; i < n; ++i) misfit[i] = yj[i] - bj[i];
    op.mass.multiply(p[static_cast<std::size_t>(j) + 1], rhs);
    op.mass.multiply(misfit, mm);
    for (std::size_t i = 0; i < n; ++i) rhs[i] -= dt * mm[i];
    op.system.lift(rhs, zeros);
    p[static_cast<std::size_t>(j)] = cg_solve(op.system.matrix(), rhs, opt.cg, p[static_cast<std::size_t>(j) + 1]).x;
  }
  return p;
}

/// Nodes carrying Dirichlet data in the steady problem (top and bottom sides).
inline std::vector<int> elliptic_dirichlet_nodes(const TriangleMesh& mesh) {
  auto nodes = mesh.boundary_nodes(BoundaryTag::top);
  const auto bottom = mesh.boundary_nodes(BoundaryTag::bottom);
  nodes.insert(nodes.end(), bottom.begin(), bottom.end());
  return nodes;
}

/// -div(k grad y) = f, y = top_value on top, y = bottom_value on bottom, zero flux on the sides.
inline ScalarField solve_elliptic(const TriangleMesh& mesh, const CellField& k, const ScalarField& f,
                                  double top_value = 1.0, double bottom_value = 0.0, const SolveOptions& opt = {}) {
  const std::size_t n = mesh.num_nodes();
  if (f.size() != n) throw Error("source field has the wrong size");
  const auto mass = assemble_mass(mesh);
  const DirichletSystem sys(assemble_stiffness(mesh, k), elliptic_dirichlet_nodes(mesh));
  std::vector<double> values(n, 0.0);
  for (int v : mesh.boundary_nodes(BoundaryTag::top)) values[static_cast<std::size_t>(v)] = top_value;
  for (int v : mesh.boundary_nodes(BoundaryTag::bottom)) values[static_cast<std::size_t>(v)] = bottom_value;
  auto rhs = mass * std::span<const double>(f);
  sys.lift(rhs, values);
  return cg_solve(sys.matrix(), rhs, opt.cg).x;
}

/// -div(k grad p) = -(y - ybar), p = 0 where y carries Dirichlet data.
inline ScalarField solve_adjoint_elliptic(const TriangleMesh& mesh, const CellField& k, const ScalarField& y,
                                          const ScalarField& ybar, const SolveOptions& opt = {}) {
  const std::size_t n = mesh.num_nodes();
  if (y.size() != n || ybar.size() != n) throw Error("state or observation has the wrong size");
  const auto mass = assemble_mass(mesh);
  const DirichletSystem sys(assemble_stiffness(mesh, k), elliptic_dirichlet_nodes(mesh));
  std::vector<double> misfit(n);
  for (std::size_t i = 0; i < n; ++i) misfit[i] = ybar[i] - y[i];
  auto rhs = mass * std::span<const double>(misfit);
  sys.lift(rhs, detail::constant(n, 0.0));
  return cg_solve(sys.matrix(), rhs, opt.cg).x;
}

// ---------------------------------------------------------------------------
// Objective

struct ObjectiveValue {
  double misfit = 0.0;
  double perimeter = 0.0;  // interface length
  double mu = 0.0;
  double total() const { return misfit + mu * perimeter; }
};

inline double interface_length(const TriangleMesh& mesh) {
  double sum = 0.0;
  for (const auto& e : mesh.interface_edges()) sum += norm(mesh.node(e.nodes[1]) - mesh.node(e.nodes[0]));
  return sum;
}

inline double misfit_norm2(const SparseSymMatrix& mass, const ScalarField& y, const ScalarField& ybar) {
  std::vector<double> e(y.size());
  for (std::size_t i = 0; i < e.size(); ++i) e[i] = y[i] - ybar[i];
  return mass.inner(e, e);
}

/// sum_{j>=1} dt/2 |y^j - ybar^j|_M^2 + mu * perimeter.
inline ObjectiveValue evaluate_objective(const TriangleMesh& mesh, const TimeSeriesField& y,
                                         const TimeSeriesField& ybar, double mu) {
  detail::check_same_grid(y, ybar);
  const auto mass = assemble_mass(mesh);
  ObjectiveValue v{0.0, interface_length(mesh), mu};
  for (std::size_t j = 1; j < y.levels.size(); ++j) v.misfit += 0.5 * y.dt() * misfit_norm2(mass, y[j], ybar[j]);
  return v;
}

/// Steady variant: 1/2 |y - ybar|_M^2 + mu * perimeter.
inline ObjectiveValue evaluate_objective(const TriangleMesh& mesh, const ScalarField& y, const ScalarField& ybar,
                                         double mu) {
  return {0.5 * misfit_norm2(assemble_mass(mesh), y, ybar), interface_length(mesh), mu};
}

// ---------------------------------------------------------------------------
// State/adjoint pairings used by every gradient formula

/// One time level of the Lagrangian: weight * [ p^T (stiffness) y + ... ].
/// `y_prev` and `p_next` are empty for the steady problem.
struct AdjointPairing {
  std::span<const double> y;
  std::span<const double> y_prev;
  std::span<const double> p;
  std::span<const double> ybar;
  double weight;
  std::span<const double> p_next{};
};

inline std::vector<AdjointPairing> parabolic_pairings(const TimeSeriesField& y, const TimeSeriesField& p,
                                                      const TimeSeriesField& ybar) {
  detail::check_same_grid(y, p);
  detail::check_same_grid(y, ybar);
  std::vector<AdjointPairing> out;
  for (std::size_t j = 1; j < y.levels.size(); ++j) out.push_back({y[j], y[j - 1], p[j - 1], ybar[j], y.dt(), p[j]});
  return out;
}

inline std::vector<AdjointPairing> elliptic_pairings(const ScalarField& y, const ScalarField& p, const ScalarField& ybar) {
  return {AdjointPairing{y, {}, p, ybar, 1.0}};
}

/// dJ/dk_T for every cell: sum over pairings of weight * p_T^T K_T(k=1) y_T.
inline std::vector<double> diffusivity_gradient(const TriangleMesh& mesh, std::span<const AdjointPairing> pairs) {
  std::vector<double> g(mesh.num_triangles(), 0.0);
  for (std::size_t t = 0; t < mesh.num_triangles(); ++t) {
    const auto& tri = mesh.triangle(t);
    const auto e = p1_element(mesh, t);
    for (const auto& pr : pairs) {
      Vec2 gy, gp;
      for (int a = 0; a < 3; ++a) {
        gy += pr.y[static_cast<std::size_t>(tri[a])] * e.grad[a];
        gp += pr.p[static_cast<std::size_t>(tri[a])] * e.grad[a];
      }
      g[t] += pr.weight * e.area * dot(gy, gp);
    }
  }
  return g;
}

// ---------------------------------------------------------------------------
// Observation transfer

/// Precomputed barycentric interpolation from a source mesh onto target nodes.
class NodalInterpolation {
 public:
  NodalInterpolation(const TriangleMesh& source, std::span<const Vec2> targets) {
    const PointLocator locator(source);
    weights_.reserve(targets.size());
    for (const auto& x : targets) {
      const auto loc = locator.locate(x);
      weights_.push_back({source.triangle(loc.triangle), loc.barycentric});
    }
  }

  ScalarField apply(const ScalarField& f) const {
    ScalarField out(weights_.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
      const auto& [tri, lam] = weights_[i];
      out[i] = lam[0] * f[static_cast<std::size_t>(tri[0])] + lam[1] * f[static_cast<std::size_t>(tri[1])] +
               lam[2] * f[static_cast<std::size_t>(tri[2])];
    }
    return out;
  }

 private:
  std::vector<std::pair<Triangle, std::array<double, 3>>> weights_;
};

inline TimeSeriesField interpolate_observation(const TriangleMesh& source_mesh, const TimeSeriesField& source,
                                               const TriangleMesh& target_mesh) {
  const NodalInterpolation interp(source_mesh, target_mesh.nodes());
  TimeSeriesField out{source.final_time, source.steps, {}};
  out.levels.reserve(source.levels.size());
  for (const auto& level : source.levels) out.levels.push_back(interp.apply(level));
  return out;
}

}  // namespace shapeid
