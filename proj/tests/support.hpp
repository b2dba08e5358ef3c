#pragma once

// Shared generators and oracles for the unit tests.

#include <cmath>
#include <random>
#include <vector>

#include "shapeid/shapeid.hpp"

namespace shapeid::testing {

inline std::mt19937_64 rng(std::uint64_t seed) { return std::mt19937_64(seed); }

inline double uniform(std::mt19937_64& g, double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(g); }

inline std::vector<double> random_vector(std::mt19937_64& g, std::size_t n, double lo = -1.0, double hi = 1.0) {
  std::vector<double> v(n);
  for (double& x : v) x = uniform(g, lo, hi);
  return v;
}

/// Star-shaped polygon around `center` with radius r(theta) = r0 (1 + sum a_k cos(k theta + phi_k)).
inline std::vector<Vec2> random_star_polygon(std::mt19937_64& g, int n, Vec2 center, double r0, double wobble) {
  std::vector<double> amp(3), phase(3);
  for (int k = 0; k < 3; ++k) {
    amp[static_cast<std::size_t>(k)] = uniform(g, -wobble, wobble) / 3.0;
    phase[static_cast<std::size_t>(k)] = uniform(g, 0.0, 2.0 * std::numbers::pi);
  }
  std::vector<Vec2> pts;
  for (int i = 0; i < n; ++i) {
    const double th = 2.0 * std::numbers::pi * i / n;
    double r = 1.0;
    for (int k = 0; k < 3; ++k)
      r += amp[static_cast<std::size_t>(k)] * std::cos((k + 2) * th + phase[static_cast<std::size_t>(k)]);
    pts.push_back(center + r0 * r * Vec2{std::cos(th), std::sin(th)});
  }
  return pts;
}

/// Small mesh used by most tests.
inline TriangleMesh small_mesh(int n = 24, double r = 0.5, Vec2 c = {}) { return generate_ogrid_mesh(n, c, r, 1); }

/// Dense symmetric matrix from a sparse one.
inline std::vector<std::vector<double>> dense(const SparseSymMatrix& a) {
  std::vector<std::vector<double>> d(a.dim(), std::vector<double>(a.dim(), 0.0));
  a.for_each([&](int r, int c, double v) { d[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)] += v; });
  return d;
}

/// Gaussian elimination with partial pivoting; the independent solver oracle.
inline std::vector<double> dense_solve(std::vector<std::vector<double>> a, std::vector<double> b) {
  const std::size_t n = b.size();
  for (std::size_t k = 0; k < n; ++k) {
    std::size_t piv = k;
    for (std::size_t i = k + 1; i < n; ++i)
      if (std::abs(a[i][k]) > std::abs(a[piv][k])) piv = i;
    std::swap(a[k], a[piv]);
    std::swap(b[k], b[piv]);
    for (std::size_t i = k + 1; i < n; ++i) {
      const double f = a[i][k] / a[k][k];
      for (std::size_t j = k; j < n; ++j) a[i][j] -= f * a[k][j];
      b[i] -= f * b[k];
    }
  }
  std::vector<double> x(n);
  for (std::size_t i = n; i-- > 0;) {
    double s = b[i];
    for (std::size_t j = i + 1; j < n; ++j) s -= a[i][j] * x[j];
    x[i] = s / a[i][i];
  }
  return x;
}

inline double max_abs_diff(std::span<const double> a, std::span<const double> b) {
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a[i] - b[i]));
  return d;
}

// ---------------------------------------------------------------------------
// Dense quasi-Newton oracle

using Dense = std::vector<std::vector<double>>;

inline std::vector<double> dense_apply(const Dense& a, const std::vector<double>& x) {
  std::vector<double> y(a.size(), 0.0);
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < x.size(); ++j) y[i] += a[i][j] * x[j];
  return y;
}

inline double dense_inner(const Dense& g, const std::vector<double>& a, const std::vector<double>& b) {
  const auto gb = dense_apply(g, b);
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * gb[i];
  return s;
}

/// Inverse-update oracle: H <- (I - rho s (G y)^T) H (I - rho y (G s)^T) + rho s (G s)^T,
/// with u (G v)^T the operator x -> u g1(v, x).
struct DenseInverseBfgs {
  Dense g;  // metric
  Dense h;  // current inverse operator

  DenseInverseBfgs(Dense metric, double scale) : g(std::move(metric)) {
    const std::size_t n = g.size();
    h.assign(n, std::vector<double>(n, 0.0));
    for (std::size_t i = 0; i < n; ++i) h[i][i] = scale;
  }

  void update(const std::vector<double>& s, const std::vector<double>& y) {
    const std::size_t n = g.size();
    const double rho = 1.0 / dense_inner(g, y, s);
    const auto gs = dense_apply(g, s), gy = dense_apply(g, y);
    Dense left(n, std::vector<double>(n)), right(n, std::vector<double>(n));
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        left[i][j] = (i == j ? 1.0 : 0.0) - rho * s[i] * gy[j];
        right[i][j] = (i == j ? 1.0 : 0.0) - rho * y[i] * gs[j];
      }
    Dense lh(n, std::vector<double>(n, 0.0)), out(n, std::vector<double>(n, 0.0));
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t k = 0; k < n; ++k)
        for (std::size_t j = 0; j < n; ++j) lh[i][j] += left[i][k] * h[k][j];
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t k = 0; k < n; ++k)
        for (std::size_t j = 0; j < n; ++j) out[i][j] += lh[i][k] * right[k][j];
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) out[i][j] += rho * s[i] * gs[j];
    h = std::move(out);
  }
};

inline double rel_g1_error(const InterfaceCurve& c, double a, const std::vector<double>& x, const std::vector<double>& ref) {
  std::vector<double> d(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) d[i] = x[i] - ref[i];
  return g1_norm(c, TangentVector(d), a) / g1_norm(c, TangentVector(ref), a);
}

/// Random curve on 5..32 nodes and a G-self-adjoint positive model Hessian Q = G^{-1} S.
struct QuadraticModel {
  InterfaceCurve curve;
  double a;
  Dense metric;
  Dense spd;

  explicit QuadraticModel(std::mt19937_64& g) {
    const int n = 5 + static_cast<int>(uniform(g, 0.0, 28.0));
    curve = InterfaceCurve::from_polyline(testing::random_star_polygon(g, n, {}, 0.5, 0.5));
    a = std::vector<double>{0.0, 0.001, 0.1}[static_cast<std::size_t>(uniform(g, 0.0, 2.999))];
    metric = testing::dense(g1_operator(curve, a));
    const std::size_t m = curve.size();
    Dense b(m, std::vector<double>(m));
    for (auto& row : b) row = testing::random_vector(g, m);
    spd.assign(m, std::vector<double>(m, 0.0));
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < m; ++j) {
        spd[i][j] = i == j ? 0.5 : 0.0;
        for (std::size_t k = 0; k < m; ++k) spd[i][j] += b[k][i] * b[k][j] / static_cast<double>(m);
      }
  }

  /// y = Q s
  std::vector<double> hessian_apply(const std::vector<double>& s) const { return testing::dense_solve(metric, dense_apply(spd, s)); }
};

}  // namespace shapeid::testing
