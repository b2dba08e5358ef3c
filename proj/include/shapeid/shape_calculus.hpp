#pragma once

// Interface shape gradients and the curve operators that turn them into
// tangent vectors of the shape space.
//
// A tangent vector is a normal field h = alpha * n along the interface, stored
// as nodal P1 coefficients alpha on the closed polyline. The Sobolev metric
//   g1(alpha, beta) = int alpha beta + A alpha' beta' ds
// is discretised with the periodic P1 curve mass M_c and stiffness K_c.

#include <cmath>
#include <numbers>
#include <span>
#include <vector>

#include "shapeid/fem.hpp"
#include "shapeid/mesh.hpp"
#include "shapeid/pde.hpp"

namespace shapeid {

/// Normal-velocity coefficients alpha of h = alpha * n, one per interface node.
struct TangentVector {
  std::vector<double> alpha;

  TangentVector() = default;
  explicit TangentVector(std::vector<double> a) : alpha(std::move(a)) {}
  static TangentVector zero(std::size_t n) { return TangentVector(std::vector<double>(n, 0.0)); }

  std::size_t size() const { return alpha.size(); }
  double operator[](std::size_t i) const { return alpha[i]; }
  double& operator[](std::size_t i) { return alpha[i]; }

  TangentVector& operator+=(const TangentVector& o) {
    check(o);
    for (std::size_t i = 0; i < alpha.size(); ++i) alpha[i] += o.alpha[i];
    return *this;
  }
  TangentVector& operator-=(const TangentVector& o) {
    check(o);
    for (std::size_t i = 0; i < alpha.size(); ++i) alpha[i] -= o.alpha[i];
    return *this;
  }
  TangentVector& operator*=(double s) {
    for (auto& a : alpha) a *= s;
    return *this;
  }
  friend TangentVector operator+(TangentVector a, const TangentVector& b) { return a += b; }
  friend TangentVector operator-(TangentVector a, const TangentVector& b) { return a -= b; }
  friend TangentVector operator*(double s, TangentVector a) { return a *= s; }
  friend TangentVector operator-(TangentVector a) { return a *= -1.0; }

 private:
  void check(const TangentVector& o) const {
    if (o.size() != size()) throw Error("tangent vectors live on different curves");
  }
};

/// Un-smoothed L2 shape-gradient density per interface node (includes mu * kappa).
struct GradientDensity {
  std::vector<double> values;
  std::size_t size() const { return values.size(); }
  double operator[](std::size_t i) const { return values[i]; }
};

// ---------------------------------------------------------------------------
// Curve operators

inline SparseSymMatrix curve_mass(const InterfaceCurve& c) {
  std::vector<Triplet> t;
  const std::size_t n = c.size();
  for (std::size_t e = 0; e < n; ++e) {
    const int a = static_cast<int>(e), b = static_cast<int>(c.next(e));
    const double l = c.edge_lengths[e];
    t.push_back({a, a, l / 3.0});
    t.push_back({b, b, l / 3.0});
    t.push_back({a, b, l / 6.0});
    t.push_back({b, a, l / 6.0});
  }
  return SparseSymMatrix::from_triplets(n, std::move(t));
}

inline SparseSymMatrix curve_stiffness(const InterfaceCurve& c) {
  std::vector<Triplet> t;
  const std::size_t n = c.size();
  for (std::size_t e = 0; e < n; ++e) {
    const int a = static_cast<int>(e), b = static_cast<int>(c.next(e));
    const double w = 1.0 / c.edge_lengths[e];
    t.push_back({a, a, w});
    t.push_back({b, b, w});
    t.push_back({a, b, -w});
    t.push_back({b, a, -w});
  }
  return SparseSymMatrix::from_triplets(n, std::move(t));
}

/// M_c + A K_c
inline SparseSymMatrix g1_operator(const InterfaceCurve& c, double metric_a) {
  if (metric_a < 0.0) throw Error("metric parameter A must be non-negative");
  auto m = curve_mass(c);
  return metric_a == 0.0 ? m : m.plus(metric_a, curve_stiffness(c));
}

inline double g1_inner(const InterfaceCurve& c, const TangentVector& alpha, const TangentVector& beta, double metric_a) {
  if (alpha.size() != c.size() || beta.size() != c.size()) throw Error("g1_inner: vectors do not match the curve");
  return g1_operator(c, metric_a).inner(alpha.alpha, beta.alpha);
}

inline double g1_norm(const InterfaceCurve& c, const TangentVector& alpha, double metric_a) {
  return std::sqrt(std::max(0.0, g1_inner(c, alpha, alpha, metric_a)));
}

/// Turning angle at each node divided by its lumped arclength weight.
/// Positive on convex parts of a counter-clockwise curve.
inline std::vector<double> discrete_curvature(const InterfaceCurve& c) {
  const std::size_t n = c.size();
  std::vector<double> kappa(n);
  for (std::size_t i = 0; i < n; ++i) {
    const Vec2 in = c.points[i] - c.points[c.prev(i)];
    const Vec2 out = c.points[c.next(i)] - c.points[i];
    if (!(norm(in) > 0.0) || !(norm(out) > 0.0)) throw Error("degenerate zero-length edge");
    kappa[i] = std::atan2(cross(in, out), dot(in, out)) / c.weights[i];
  }
  return kappa;
}

namespace detail {
inline CgOptions curve_cg() {
  CgOptions o;
  o.rel_tol = 1e-14;
  return o;
}
}  // namespace detail

/// Nodal P1 function u with int u v ds = int q v ds for piecewise-constant edge data q.
inline std::vector<double> l2_project(const InterfaceCurve& c, std::span<const double> edge_density) {
  if (edge_density.size() != c.size()) throw Error("l2_project: one value per edge expected");
  std::vector<double> b(c.size(), 0.0);
  for (std::size_t e = 0; e < c.size(); ++e) {
    const double half = 0.5 * edge_density[e] * c.edge_lengths[e];
    b[e] += half;
    b[c.next(e)] += half;
  }
  return cg_solve(curve_mass(c), b, detail::curve_cg()).x;
}

/// Riesz representative of the density under g1: (M_c + A K_c) alpha = M_c gamma.
inline TangentVector sobolev_representation(const InterfaceCurve& c, const GradientDensity& gamma, double metric_a) {
  if (gamma.size() != c.size()) throw Error("density does not match the curve");
  if (metric_a < 0.0) throw Error("metric parameter A must be non-negative");
  if (metric_a == 0.0) return TangentVector(gamma.values);
  const auto rhs = curve_mass(c) * std::span<const double>(gamma.values);
  return TangentVector(cg_solve(g1_operator(c, metric_a), rhs, detail::curve_cg()).x);
}

// ---------------------------------------------------------------------------
// Shape gradients

/// Interface traces of one state/adjoint pairing. Normal fluxes sigma = k du/dn
/// (n pointing out of the inner region) are continuous across the interface
/// and recovered at the curve nodes from the weak-form residual restricted to
/// the inner subdomain; tangential derivatives are taken from the continuous
/// trace, one value per curve edge.
struct InterfaceTraces {
  std::vector<double> flux_y, flux_p;
  std::vector<double> dy_ds, dp_ds;
};

namespace detail {

/// int_Gamma sigma phi_i ds = sum over inner cells of [K_T u + M_T m]_i, solved
/// with the curve mass matrix.
inline std::vector<double> residual_flux(const TriangleMesh& mesh, const InterfaceCurve& c,
                                         const std::vector<int>& curve_index, const std::vector<std::size_t>& cells,
                                         double k_inner, std::span<const double> u, std::span<const double> m) {
  std::vector<double> r(c.size(), 0.0);
  for (std::size_t t : cells) {
    const auto& tri = mesh.triangle(t);
    const auto el = p1_element(mesh, t);
    const auto ut = gather(u, tri), mt = gather(m, tri);
    const double msum = mt[0] + mt[1] + mt[2];
    for (int a = 0; a < 3; ++a) {
      const int ci = curve_index[static_cast<std::size_t>(tri[a])];
      if (ci < 0) continue;
      double v = el.area / 12.0 * (msum + mt[a]);
      for (int b = 0; b < 3; ++b) v += k_inner * el.area * dot(el.grad[a], el.grad[b]) * ut[b];
      r[static_cast<std::size_t>(ci)] += v;
    }
  }
  return cg_solve(curve_mass(c), r, curve_cg()).x;
}

/// Edge mean of the product of two piecewise-linear nodal functions.
inline double edge_mean_product(const InterfaceCurve& c, std::span<const double> a, std::span<const double> b,
                                std::size_t e) {
  const std::size_t f = c.next(e);
  return (2.0 * a[e] * b[e] + 2.0 * a[f] * b[f] + a[e] * b[f] + a[f] * b[e]) / 6.0;
}

}  // namespace detail

/// Traces for every pairing. `f` is the nodal source (empty means zero). For
/// time-dependent pairings the pairing weight is the time step.
inline std::vector<InterfaceTraces> interface_traces(const TriangleMesh& mesh, const InterfaceCurve& c,
                                                     std::span<const AdjointPairing> pairs, double k2,
                                                     std::span<const double> f = {}) {
  const std::size_t n = mesh.num_nodes();
  if (!f.empty() && f.size() != n) throw Error("source field has the wrong size");
  std::vector<int> curve_index(n, -1);
  for (std::size_t i = 0; i < c.size(); ++i) curve_index[static_cast<std::size_t>(c.nodes[i])] = static_cast<int>(i);
  std::vector<std::size_t> cells;
  for (std::size_t t = 0; t < mesh.num_triangles(); ++t) {
    if (mesh.subdomain(t) != 2) continue;
    const auto& tri = mesh.triangle(t);
    if (curve_index[static_cast<std::size_t>(tri[0])] >= 0 || curve_index[static_cast<std::size_t>(tri[1])] >= 0 ||
        curve_index[static_cast<std::size_t>(tri[2])] >= 0)
      cells.push_back(t);
  }

  std::vector<InterfaceTraces> out;
  out.reserve(pairs.size());
  std::vector<double> my(n), mp(n);
  for (const auto& pr : pairs) {
    const bool transient = !pr.y_prev.empty();
    if (transient && pr.p_next.empty()) throw Error("time-dependent pairing lacks the next adjoint level");
    for (std::size_t i = 0; i < n; ++i) {
      // state: rate - f, adjoint: rate + (y - ybar)
      my[i] = (f.empty() ? 0.0 : -f[i]);
      mp[i] = pr.y[i] - pr.ybar[i];
      if (transient) {
        my[i] += (pr.y[i] - pr.y_prev[i]) / pr.weight;
        mp[i] += (pr.p[i] - pr.p_next[i]) / pr.weight;
      }
    }
    InterfaceTraces tr;
    tr.flux_y = detail::residual_flux(mesh, c, curve_index, cells, k2, pr.y, my);
    tr.flux_p = detail::residual_flux(mesh, c, curve_index, cells, k2, pr.p, mp);
    tr.dy_ds.resize(c.size());
    tr.dp_ds.resize(c.size());
    for (std::size_t e = 0; e < c.size(); ++e) {
      const auto a = static_cast<std::size_t>(c.nodes[e]), b = static_cast<std::size_t>(c.nodes[c.next(e)]);
      tr.dy_ds[e] = (pr.y[b] - pr.y[a]) / c.edge_lengths[e];
      tr.dp_ds[e] = (pr.p[b] - pr.p[a]) / c.edge_lengths[e];
    }
    out.push_back(std::move(tr));
  }
  return out;
}

/// Edge-wise density sum_j w_j (k2 - k1) grad y_1 . grad p_2, written with the
/// continuous fluxes: grad y_1 . grad p_2 = sigma_y sigma_p / (k1 k2) + y_s p_s.
inline std::vector<double> interface_edge_density(const InterfaceCurve& c, std::span<const AdjointPairing> pairs,
                                                  std::span<const InterfaceTraces> traces, double k1, double k2) {
  if (traces.size() != pairs.size()) throw Error("one trace set per pairing expected");
  std::vector<double> q(c.size(), 0.0);
  for (std::size_t j = 0; j < pairs.size(); ++j) {
    const auto& tr = traces[j];
    for (std::size_t e = 0; e < c.size(); ++e) {
      const double normal = detail::edge_mean_product(c, tr.flux_y, tr.flux_p, e) / (k1 * k2);
      q[e] += pairs[j].weight * (k2 - k1) * (normal + tr.dy_ds[e] * tr.dp_ds[e]);
    }
  }
  return q;
}

inline std::vector<double> interface_edge_density(const TriangleMesh& mesh, const InterfaceCurve& c,
                                                  std::span<const AdjointPairing> pairs, double k1, double k2,
                                                  std::span<const double> f = {}) {
  return interface_edge_density(c, pairs, interface_traces(mesh, c, pairs, k2, f), k1, k2);
}

/// Nodal L2 gradient density: projected interface term plus mu * kappa.
inline GradientDensity interface_gradient_density(const TriangleMesh& mesh, const InterfaceCurve& c,
                                                  std::span<const AdjointPairing> pairs, double k1, double k2,
                                                  double mu, std::span<const double> f = {}) {
  const auto q = interface_edge_density(mesh, c, pairs, k1, k2, f);
  GradientDensity g{l2_project(c, q)};
  if (mu != 0.0) {
    const auto kappa = discrete_curvature(c);
    for (std::size_t i = 0; i < g.values.size(); ++i) g.values[i] += mu * kappa[i];
  }
  return g;
}

/// Edge-wise density -[[ -2k du/dn dp/dn + k grad y . grad p ]] (outer minus
/// inner), each side's gradient rebuilt from the shared traces.
inline std::vector<double> interface_edge_density_form1(const InterfaceCurve& c, std::span<const AdjointPairing> pairs,
                                                        std::span<const InterfaceTraces> traces, double k1,
                                                        double k2) {
  if (traces.size() != pairs.size()) throw Error("one trace set per pairing expected");
  std::vector<double> q(c.size(), 0.0);
  for (std::size_t j = 0; j < pairs.size(); ++j) {
    const auto& tr = traces[j];
    for (std::size_t e = 0; e < c.size(); ++e) {
      const double ss = detail::edge_mean_product(c, tr.flux_y, tr.flux_p, e);
      const double tt = tr.dy_ds[e] * tr.dp_ds[e];
      auto side = [&](double k) { return -2.0 * k * ss / (k * k) + k * (ss / (k * k) + tt); };
      q[e] -= pairs[j].weight * (side(k1) - side(k2));
    }
  }
  return q;
}

inline GradientDensity interface_gradient_density_form1(const TriangleMesh& mesh, const InterfaceCurve& c,
                                                        std::span<const AdjointPairing> pairs, double k1, double k2,
                                                        std::span<const double> f = {}) {
  return {l2_project(c, interface_edge_density_form1(c, pairs, interface_traces(mesh, c, pairs, k2, f), k1, k2))};
}

/// sum_i gamma_i <V_i, n_i> w_i : the boundary-form derivative in direction V.
inline double boundary_derivative(const InterfaceCurve& c, const GradientDensity& gamma, std::span<const Vec2> v_nodal) {
  double s = 0.0;
  for (std::size_t i = 0; i < c.size(); ++i)
    s += gamma[i] * dot(v_nodal[static_cast<std::size_t>(c.nodes[i])], c.normals[i]) * c.weights[i];
  return s;
}

/// Volume form of the shape derivative (without the perimeter term) for a
/// nodal P1 velocity V that vanishes near the outer boundary:
///   sum_j w_j int -k grad y (grad V + grad V^T) grad p - p grad f . V - (y - ybar) grad ybar . V
///               + div V ( 1/2 (y - ybar)^2 + dy/dt p + k grad y . grad p - f p )
/// with dy/dt the backward difference of consecutive levels. The ybar term
/// accounts for the observation being a fixed function of space.
inline double domain_gradient_oracle(const TriangleMesh& mesh, const CellField& k, const ScalarField& f,
                                     std::span<const AdjointPairing> pairs, std::span<const Vec2> v_nodal) {
  if (v_nodal.size() != mesh.num_nodes()) throw Error("velocity field has the wrong size");
  for (int b : mesh.outer_boundary_nodes())
    if (norm(v_nodal[static_cast<std::size_t>(b)]) != 0.0) throw Error("velocity must vanish on the outer boundary");
  double total = 0.0;
  for (std::size_t t = 0; t < mesh.num_triangles(); ++t) {
    const auto& tri = mesh.triangle(t);
    const auto el = p1_element(mesh, t);
    std::array<double, 3> vx{}, vy{};
    for (int a = 0; a < 3; ++a) {
      vx[a] = v_nodal[static_cast<std::size_t>(tri[a])].x;
      vy[a] = v_nodal[static_cast<std::size_t>(tri[a])].y;
    }
    Vec2 dvx, dvy;  // gradients of the two velocity components
    for (int a = 0; a < 3; ++a) {
      dvx += vx[a] * el.grad[a];
      dvy += vy[a] * el.grad[a];
    }
    const double div_v = dvx.x + dvy.y;
    if (div_v == 0.0 && dvx.y == 0.0 && dvy.x == 0.0 && vx == std::array<double, 3>{} && vy == std::array<double, 3>{})
      continue;
    // symmetric part S = grad V + grad V^T
    const double s_xx = 2.0 * dvx.x, s_yy = 2.0 * dvy.y, s_xy = dvx.y + dvy.x;
    const auto ft = gather(f, tri);
    Vec2 grad_f;
    for (int a = 0; a < 3; ++a) grad_f += ft[a] * el.grad[a];

    for (const auto& pr : pairs) {
      const auto y = gather(pr.y, tri), p = gather(pr.p, tri), yb = gather(pr.ybar, tri);
      Vec2 gy, gp, gyb;
      for (int a = 0; a < 3; ++a) {
        gy += y[a] * el.grad[a];
        gp += p[a] * el.grad[a];
        gyb += yb[a] * el.grad[a];
      }
      const std::array<double, 3> e{y[0] - yb[0], y[1] - yb[1], y[2] - yb[2]};
      const double sym = gy.x * (s_xx * gp.x + s_xy * gp.y) + gy.y * (s_xy * gp.x + s_yy * gp.y);
      double contrib = k[t] * el.area * (-sym + div_v * dot(gy, gp));
      contrib += div_v * 0.5 * element_mass_product(el.area, e, e);
      contrib -= div_v * element_mass_product(el.area, ft, p);
      contrib -= grad_f.x * element_mass_product(el.area, p, vx) + grad_f.y * element_mass_product(el.area, p, vy);
      contrib -= gyb.x * element_mass_product(el.area, e, vx) + gyb.y * element_mass_product(el.area, e, vy);
      total += pr.weight * contrib;
      if (!pr.y_prev.empty()) {
        const auto yp = gather(pr.y_prev, tri);
        const std::array<double, 3> dy{y[0] - yp[0], y[1] - yp[1], y[2] - yp[2]};
        total += div_v * element_mass_product(el.area, dy, p);
      }
    }
  }
  return total;
}

}  // namespace shapeid
