#pragma once

// P1 finite elements on triangles and the sparse linear algebra shared by all solves.

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "shapeid/mesh.hpp"

namespace shapeid {

/// Nodal P1 coefficients.
using ScalarField = std::vector<double>;

class SolverError : public Error {
 public:
  SolverError(const std::string& what, double residual) : Error(what), residual_(residual) {}
  double residual() const { return residual_; }

 private:
  double residual_;
};

struct Triplet {
  int row;
  int col;
  double value;
};

/// Compressed sparse row matrix holding a symmetric operator.
class SparseSymMatrix {
 public:
  SparseSymMatrix() = default;

  /// Sums duplicates; entries that cancel to exactly zero are dropped.
  static SparseSymMatrix from_triplets(std::size_t dim, std::vector<Triplet> entries) {
    std::sort(entries.begin(), entries.end(),
              [](const Triplet& a, const Triplet& b) { return a.row != b.row ? a.row < b.row : a.col < b.col; });
    SparseSymMatrix m;
    m.dim_ = dim;
    m.row_ptr_.assign(dim + 1, 0);
    m.cols_.reserve(entries.size());
    m.vals_.reserve(entries.size());
    std::size_t k = 0;
    for (std::size_t r = 0; r < dim; ++r) {
      while (k < entries.size() && static_cast<std::size_t>(entries[k].row) == r) {
        const int col = entries[k].col;
        double v = 0.0;
        while (k < entries.size() && static_cast<std::size_t>(entries[k].row) == r && entries[k].col == col)
          v += entries[k++].value;
        if (v != 0.0) {
          m.cols_.push_back(col);
          m.vals_.push_back(v);
        }
      }
      m.row_ptr_[r + 1] = m.cols_.size();
    }
    return m;
  }

  std::size_t dim() const { return dim_; }
  std::size_t nonzeros() const { return vals_.size(); }

  void multiply(std::span<const double> x, std::span<double> y) const {
    for (std::size_t r = 0; r < dim_; ++r) {
      double s = 0.0;
      for (std::size_t k = row_ptr_[r]; k < row_ptr_[r + 1]; ++k) s += vals_[k] * x[static_cast<std::size_t>(cols_[k])];
      y[r] = s;
    }
  }

  std::vector<double> operator*(std::span<const double> x) const {
    std::vector<double> y(dim_);
    multiply(x, y);
    return y;
  }

  double operator()(std::size_t r, std::size_t c) const {
    const auto b = cols_.begin() + static_cast<std::ptrdiff_t>(row_ptr_[r]);
    const auto e = cols_.begin() + static_cast<std::ptrdiff_t>(row_ptr_[r + 1]);
    const auto it = std::lower_bound(b, e, static_cast<int>(c));
    return (it != e && *it == static_cast<int>(c)) ? vals_[static_cast<std::size_t>(it - cols_.begin())] : 0.0;
  }

  std::vector<double> diagonal() const {
    std::vector<double> d(dim_);
    for (std::size_t r = 0; r < dim_; ++r) d[r] = (*this)(r, r);
    return d;
  }

  /// Bilinear form x^T A y.
  double inner(std::span<const double> x, std::span<const double> y) const {
    double s = 0.0;
    for (std::size_t r = 0; r < dim_; ++r) {
      double row = 0.0;
      for (std::size_t k = row_ptr_[r]; k < row_ptr_[r + 1]; ++k) row += vals_[k] * y[static_cast<std::size_t>(cols_[k])];
      s += x[r] * row;
    }
    return s;
  }

  /// this + s * other (same dimension).
  SparseSymMatrix plus(double s, const SparseSymMatrix& other) const {
    std::vector<Triplet> t;
    t.reserve(nonzeros() + other.nonzeros());
    for_each([&](int r, int c, double v) { t.push_back({r, c, v}); });
    other.for_each([&](int r, int c, double v) { t.push_back({r, c, s * v}); });
    return from_triplets(dim_, std::move(t));
  }

  SparseSymMatrix scaled(double s) const {
    SparseSymMatrix m = *this;
    for (auto& v : m.vals_) v *= s;
    return m;
  }

  template <class F>
  void for_each(F&& f) const {
    for (std::size_t r = 0; r < dim_; ++r)
      for (std::size_t k = row_ptr_[r]; k < row_ptr_[r + 1]; ++k) f(static_cast<int>(r), cols_[k], vals_[k]);
  }

  /// max |a_ij - a_ji|
  double asymmetry() const {
    double worst = 0.0;
    for_each([&](int r, int c, double v) {
      worst = std::max(worst, std::abs(v - (*this)(static_cast<std::size_t>(c), static_cast<std::size_t>(r))));
    });
    return worst;
  }

 private:
  friend class DirichletSystem;
  std::size_t dim_ = 0;
  std::vector<std::size_t> row_ptr_{0};
  std::vector<int> cols_;
  std::vector<double> vals_;
};

// ---------------------------------------------------------------------------
// Element matrices

/// Gradients of the three barycentric basis functions and the triangle area.
struct P1Element {
  std::array<Vec2, 3> grad;
  double area;
};

inline P1Element p1_element(const Vec2& a, const Vec2& b, const Vec2& c) {
  const double det = cross(b - a, c - a);
  P1Element e;
  e.area = 0.5 * det;
  e.grad[0] = Vec2{b.y - c.y, c.x - b.x} / det;
  e.grad[1] = Vec2{c.y - a.y, a.x - c.x} / det;
  e.grad[2] = Vec2{a.y - b.y, b.x - a.x} / det;
  return e;
}

inline P1Element p1_element(const TriangleMesh& mesh, std::size_t t) {
  const auto& tri = mesh.triangle(t);
  return p1_element(mesh.node(tri[0]), mesh.node(tri[1]), mesh.node(tri[2]));
}

using ElementMatrix = std::array<std::array<double, 3>, 3>;

inline ElementMatrix element_mass(double area) {
  ElementMatrix m;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) m[i][j] = area / 12.0 * (i == j ? 2.0 : 1.0);
  return m;
}

inline ElementMatrix element_stiffness(const P1Element& e, double k) {
  ElementMatrix m;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) m[i][j] = k * e.area * dot(e.grad[i], e.grad[j]);
  return m;
}

/// Exact integral of u*v over one triangle for P1 nodal values.
inline double element_mass_product(double area, const std::array<double, 3>& u, const std::array<double, 3>& v) {
  const double su = u[0] + u[1] + u[2], sv = v[0] + v[1] + v[2];
  return area / 12.0 * (su * sv + u[0] * v[0] + u[1] * v[1] + u[2] * v[2]);
}

template <class Field>
std::array<double, 3> gather(const Field& f, const Triangle& tri) {
  return {f[static_cast<std::size_t>(tri[0])], f[static_cast<std::size_t>(tri[1])], f[static_cast<std::size_t>(tri[2])]};
}

// ---------------------------------------------------------------------------
// Assembly

inline SparseSymMatrix assemble_mass(const TriangleMesh& mesh) {
  std::vector<Triplet> t;
  t.reserve(9 * mesh.num_triangles());
  for (std::size_t c = 0; c < mesh.num_triangles(); ++c) {
    const auto& tri = mesh.triangle(c);
    const auto m = element_mass(mesh.area(c));
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) t.push_back({tri[i], tri[j], m[i][j]});
  }
  return SparseSymMatrix::from_triplets(mesh.num_nodes(), std::move(t));
}

inline SparseSymMatrix assemble_stiffness(const TriangleMesh& mesh, const CellField& k) {
  if (k.size() != mesh.num_triangles()) throw Error("diffusivity size does not match triangle count");
  std::vector<Triplet> t;
  t.reserve(9 * mesh.num_triangles());
  for (std::size_t c = 0; c < mesh.num_triangles(); ++c) {
    if (!(k[c] > 0.0)) throw Error("diffusivity must be positive on every cell");
    const auto& tri = mesh.triangle(c);
    const auto m = element_stiffness(p1_element(mesh, c), k[c]);
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) t.push_back({tri[i], tri[j], m[i][j]});
  }
  return SparseSymMatrix::from_triplets(mesh.num_nodes(), std::move(t));
}

/// Constant gradient of the P1 interpolant of `field` on triangle t.
template <class Field>
Vec2 p1_gradient(const TriangleMesh& mesh, const Field& field, std::size_t t) {
  const auto e = p1_element(mesh, t);
  const auto v = gather(field, mesh.triangle(t));
  return v[0] * e.grad[0] + v[1] * e.grad[1] + v[2] * e.grad[2];
}

// ---------------------------------------------------------------------------
// Dirichlet conditions

/// Operator with a set of constrained unknowns eliminated symmetrically.
///
/// Constrained rows and columns are replaced by the identity; right-hand sides
/// are lifted with the coupling to the prescribed values so that the reduced
/// system stays symmetric positive definite.
class DirichletSystem {
 public:
  DirichletSystem(const SparseSymMatrix& a, std::vector<int> constrained) : full_(a), constrained_(std::move(constrained)) {
    mask_.assign(a.dim(), 0);
    for (int c : constrained_) {
      if (c < 0 || static_cast<std::size_t>(c) >= a.dim()) throw Error("constrained index out of range");
      mask_[static_cast<std::size_t>(c)] = 1;
    }
    std::vector<Triplet> t;
    t.reserve(a.nonzeros());
    a.for_each([&](int r, int c, double v) {
      if (!mask_[static_cast<std::size_t>(r)] && !mask_[static_cast<std::size_t>(c)]) t.push_back({r, c, v});
    });
    for (std::size_t i = 0; i < mask_.size(); ++i)
      if (mask_[i]) t.push_back({static_cast<int>(i), static_cast<int>(i), 1.0});
    reduced_ = SparseSymMatrix::from_triplets(a.dim(), std::move(t));
  }

  const SparseSymMatrix& matrix() const { return reduced_; }
  const std::vector<int>& constrained() const { return constrained_; }
  bool is_constrained(std::size_t i) const { return mask_[i] != 0; }

  /// b <- b - A_{:,c} g_c on free rows, b_c <- g_c on constrained rows.
  void lift(std::span<double> b, std::span<const double> values) const {
    std::vector<double> g(full_.dim(), 0.0);
    for (std::size_t i = 0; i < mask_.size(); ++i)
      if (mask_[i]) g[i] = values[i];
    if (!constrained_.empty()) {
      const auto ag = full_ * std::span<const double>(g);
      for (std::size_t i = 0; i < mask_.size(); ++i) b[i] = mask_[i] ? g[i] : b[i] - ag[i];
    }
  }

 private:
  SparseSymMatrix full_;
  SparseSymMatrix reduced_;
  std::vector<int> constrained_;
  std::vector<char> mask_;
};

/// Eliminates Dirichlet nodes lying on the tagged outer boundary and returns
/// the modified matrix and right-hand side.
inline std::pair<SparseSymMatrix, std::vector<double>> apply_dirichlet(const TriangleMesh& mesh, const SparseSymMatrix& a,
                                                                       std::vector<double> b, const std::vector<int>& nodes,
                                                                       double value) {
  for (int v : nodes)
    if (v < 0 || static_cast<std::size_t>(v) >= mesh.num_nodes() || !mesh.on_outer_boundary(v))
      throw Error("Dirichlet node is not on the tagged boundary");
  DirichletSystem sys(a, nodes);
  sys.lift(b, std::vector<double>(a.dim(), value));
  return {sys.matrix(), std::move(b)};
}

// ---------------------------------------------------------------------------
// Conjugate gradients

struct CgOptions {
  double rel_tol = 1e-10;
  std::size_t max_iter = 0;  // 0 means 10 * dim
  bool jacobi = true;
};

struct CgResult {
  std::vector<double> x;
  std::size_t iterations = 0;
  double residual = 0.0;  // final ||b - Ax|| / ||b||
};

/// Jacobi-preconditioned CG. Stops when ||Ax - b|| <= rel_tol ||b||. The
/// optional initial guess only changes the iteration count.
inline CgResult cg_solve(const SparseSymMatrix& a, std::span<const double> b, const CgOptions& opt = {},
                         std::span<const double> x0 = {}) {
  const std::size_t n = a.dim();
  if (b.size() != n) throw Error("cg_solve: right-hand side size mismatch");
  const std::size_t max_iter = opt.max_iter ? opt.max_iter : 10 * std::max<std::size_t>(n, 1);
  CgResult res;
  res.x.assign(n, 0.0);
  const double bnorm = std::sqrt(std::inner_product(b.begin(), b.end(), b.begin(), 0.0));
  if (bnorm == 0.0) return res;
  if (x0.size() == n) std::copy(x0.begin(), x0.end(), res.x.begin());

  std::vector<double> inv_diag(n, 1.0);
  if (opt.jacobi) {
    const auto d = a.diagonal();
    for (std::size_t i = 0; i < n; ++i) {
      if (!(d[i] > 0.0)) throw SolverError("cg_solve: non-positive diagonal entry", 1.0);
      inv_diag[i] = 1.0 / d[i];
    }
  }

  std::vector<double> r(n), z(n), p(n), ap(n);
  a.multiply(res.x, ap);
  for (std::size_t i = 0; i < n; ++i) r[i] = b[i] - ap[i];
  auto rnorm = [&] { return std::sqrt(std::inner_product(r.begin(), r.end(), r.begin(), 0.0)); };
  double rel = rnorm() / bnorm;
  for (std::size_t i = 0; i < n; ++i) z[i] = inv_diag[i] * r[i];
  p = z;
  double rz = std::inner_product(r.begin(), r.end(), z.begin(), 0.0);
  std::size_t it = 0;
  while (rel > opt.rel_tol) {
    if (it >= max_iter)
      throw SolverError("cg_solve: no convergence after " + std::to_string(it) + " iterations (residual " +
                            std::to_string(rel) + ")",
                        rel);
    a.multiply(p, ap);
    const double pap = std::inner_product(p.begin(), p.end(), ap.begin(), 0.0);
    if (!(pap > 0.0)) throw SolverError("cg_solve: operator is not positive definite", rel);
    const double alpha = rz / pap;
    for (std::size_t i = 0; i < n; ++i) {
      res.x[i] += alpha * p[i];
      r[i] -= alpha * ap[i];
    }
    ++it;
    rel = rnorm() / bnorm;
    if (rel <= opt.rel_tol) break;
    for (std::size_t i = 0; i < n; ++i) z[i] = inv_diag[i] * r[i];
    const double rz_new = std::inner_product(r.begin(), r.end(), z.begin(), 0.0);
    const double beta = rz_new / rz;
    rz = rz_new;
    for (std::size_t i = 0; i < n; ++i) p[i] = z[i] + beta * p[i];
  }
  res.iterations = it;
  res.residual = rel;
  return res;
}

}  // namespace shapeid
