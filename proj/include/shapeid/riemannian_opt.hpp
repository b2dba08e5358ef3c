#pragma once

// Steepest descent and limited-memory BFGS on the space of interface curves.
//
// Retraction: nodes move along their normals, R_c(eta) = c + eta n, extended
// into the volume by elasticity. Vector transport carries nodal coefficients
// unchanged to the moved nodes; stored pairs are re-measured with the metric
// of the current curve.

#include <chrono>
#include <cmath>
#include <deque>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "shapeid/deformation.hpp"
#include "shapeid/mesh.hpp"
#include "shapeid/problem.hpp"
#include "shapeid/shape_calculus.hpp"

namespace shapeid {

class OptimizationError : public Error {
 public:
  using Error::Error;
};

/// Identity on nodal coefficients: v(s - eta(s)) at a moved node is the old value.
inline TangentVector transport(const TangentVector& eta, const TangentVector& v) {
  if (!eta.alpha.empty() && eta.size() != v.size()) throw Error("transport: vectors live on different curves");
  return v;
}

struct CurvaturePair {
  TangentVector s;
  TangentVector y;
  double rho;  // 1 / g1(y, s) at the time of storage
};

class LbfgsMemory {
 public:
  LbfgsMemory(std::size_t capacity, double metric_a) : capacity_(capacity), metric_a_(metric_a) {
    if (capacity == 0) throw Error("L-BFGS memory needs capacity >= 1");
  }

  std::size_t capacity() const { return capacity_; }
  double metric_a() const { return metric_a_; }
  std::size_t size() const { return pairs_.size(); }
  bool empty() const { return pairs_.empty(); }
  /// Oldest first.
  const std::deque<CurvaturePair>& pairs() const { return pairs_; }
  std::size_t skipped() const { return skipped_; }

  void push(CurvaturePair p) {
    pairs_.push_back(std::move(p));
    while (pairs_.size() > capacity_) pairs_.pop_front();
  }
  void note_skip() { ++skipped_; }
  void clear() { pairs_.clear(); }

 private:
  std::size_t capacity_;
  double metric_a_;
  std::deque<CurvaturePair> pairs_;
  std::size_t skipped_ = 0;
};

/// Stores (s, y) unless g1(y, s) <= 1e-14 |s| |y|. Returns whether the pair was kept.
inline bool lbfgs_update(LbfgsMemory& memory, const TangentVector& s, const TangentVector& y, const InterfaceCurve& curve) {
  const auto g = g1_operator(curve, memory.metric_a());
  const double ys = g.inner(y.alpha, s.alpha);
  const double ss = g.inner(s.alpha, s.alpha), yy = g.inner(y.alpha, y.alpha);
  if (!(ys > 1e-14 * std::sqrt(ss) * std::sqrt(yy)) || !std::isfinite(ys)) {
    memory.note_skip();
    return false;
  }
  memory.push({s, y, 1.0 / ys});
  return true;
}

/// Two-loop recursion with g1 inner products; returns q = G^{-1} grad. The
/// initial operator is g1(y,s)/g1(y,y) times the identity for the newest pair.
inline TangentVector lbfgs_direction(const LbfgsMemory& memory, const TangentVector& grad, const InterfaceCurve& curve) {
  if (grad.size() != curve.size()) throw Error("gradient does not match the curve");
  if (memory.empty()) return grad;
  const auto g = g1_operator(curve, memory.metric_a());

  struct Live {
    const CurvaturePair* pair;
    double rho;
    double alpha = 0.0;
  };
  std::vector<Live> live;
  for (const auto& p : memory.pairs()) {
    if (p.s.size() != grad.size() || p.y.size() != grad.size()) continue;
    const double rho = 1.0 / g.inner(p.y.alpha, p.s.alpha);
    if (std::isfinite(rho) && rho > 0.0) live.push_back({&p, rho});
  }
  if (live.empty()) return grad;

  TangentVector q = grad;
  for (auto it = live.rbegin(); it != live.rend(); ++it) {
    it->alpha = it->rho * g.inner(it->pair->s.alpha, q.alpha);
    q -= it->alpha * it->pair->y;
  }
  const auto& newest = *live.back().pair;
  q *= g.inner(newest.y.alpha, newest.s.alpha) / g.inner(newest.y.alpha, newest.y.alpha);
  for (auto& l : live) {
    const double beta = l.rho * g.inner(l.pair->y.alpha, q.alpha);
    q += (l.alpha - beta) * l.pair->s;
  }
  return q;
}

// ---------------------------------------------------------------------------
// Shape distance

/// Curve-L2 norm, over the target, of the normal distance from each node of
/// `curve` to `target`. Each node shoots a ray along +-n; the nearest hit on
/// any target segment gives the signed distance and a foot point on the target.
/// Nodes whose ray misses fall back to the nearest-point distance.
inline double shape_distance(const InterfaceCurve& curve, const InterfaceCurve& target, std::size_t* fallbacks = nullptr) {
  const std::size_t m = target.size();
  const auto s_target = target.arclength();
  const double perimeter = target.perimeter();
  std::vector<std::pair<double, double>> samples;  // (arclength on target, signed distance)
  samples.reserve(curve.size());
  std::size_t missed = 0;
  for (std::size_t i = 0; i < curve.size(); ++i) {
    const Vec2 x = curve.points[i], n = curve.normals[i];
    double best_t = std::numeric_limits<double>::infinity();
    double best_s = 0.0;
    for (std::size_t e = 0; e < m; ++e) {
      const Vec2 a = target.points[e], d = target.points[target.next(e)] - a;
      const double den = cross(n, d);
      if (den == 0.0) continue;
      const Vec2 w = a - x;
      const double t = cross(w, d) / den;
      const double u = cross(w, n) / den;
      if (u < 0.0 || u > 1.0) continue;
      if (std::abs(t) < std::abs(best_t)) {
        best_t = t;
        best_s = s_target[e] + u * target.edge_lengths[e];
      }
    }
    if (!std::isfinite(best_t)) {
      ++missed;
      double best = std::numeric_limits<double>::infinity();
      for (std::size_t e = 0; e < m; ++e) {
        const Vec2 a = target.points[e], d = target.points[target.next(e)] - a;
        const double u = std::clamp(dot(x - a, d) / dot(d, d), 0.0, 1.0);
        const Vec2 foot = a + u * d;
        const double dist = norm(foot - x);
        if (dist < best) {
          best = dist;
          best_t = dot(foot - x, n) >= 0.0 ? dist : -dist;
          best_s = s_target[e] + u * target.edge_lengths[e];
        }
      }
    }
    samples.emplace_back(best_s, best_t);
  }
  if (fallbacks) *fallbacks = missed;
  std::sort(samples.begin(), samples.end());
  double integral = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto [sa, da] = samples[i];
    auto [sb, db] = samples[(i + 1) % samples.size()];
    if (i + 1 == samples.size()) sb += perimeter;
    integral += (sb - sa) * (da * da + da * db + db * db) / 3.0;
  }
  return std::sqrt(integral);
}

// ---------------------------------------------------------------------------
// Driver

enum class Method { steepest_descent, lbfgs };

struct OptimizerOptions {
  Method method = Method::lbfgs;
  std::size_t memory = 5;
  double metric_a = 0.001;
  double step = 1.0;           // fixed step along quasi-Newton directions
  double gradient_step = 0.1;  // g1 length of the first steepest-descent step
  int max_iters = 50;
  double grad_tol = 1e-6;
  int max_halvings = 5;
  ElasticityParameters elasticity{};
  bool record_time = true;
};

struct IterationRecord {
  int iter = 0;
  double objective = 0.0;
  double misfit = 0.0;
  double perimeter = 0.0;
  double gradnorm = 0.0;
  double distance = 0.0;
  double seconds = 0.0;
  double step = 0.0;  // step actually taken to reach this iterate
};

struct OptimizerState {
  int iteration = 0;
  TriangleMesh mesh;
  InterfaceCurve curve;
  std::vector<IterationRecord> history;
};

enum class OptimizerStatus { converged, max_iterations, failed };

struct OptimizerResult {
  OptimizerState state;
  OptimizerStatus status = OptimizerStatus::max_iterations;
  std::string message;
};

struct StepResult {
  TriangleMesh mesh;
  InterfaceCurve curve;
  double step;
};

/// Moves the interface by step * alpha * n, extends the motion elastically and
/// deforms the mesh. Inverted elements halve the step, at most `max_halvings` times.
inline StepResult optimization_step(const TriangleMesh& mesh, const InterfaceCurve& curve, const TangentVector& direction,
                                    double step, const ElasticityParameters& elasticity = {}, int max_halvings = 5) {
  if (direction.size() != curve.size()) throw Error("direction does not match the curve");
  for (int attempt = 0; attempt <= max_halvings; ++attempt) {
    std::vector<Vec2> g(curve.size());
    for (std::size_t i = 0; i < g.size(); ++i) g[i] = (step * direction[i]) * curve.normals[i];
    const auto u = extend_to_domain(mesh, curve.nodes, g, elasticity);
    try {
      auto moved = apply_displacement(mesh, u);
      auto c = extract_interface(moved);
      return {std::move(moved), std::move(c), step};
    } catch (const InvertedElementError&) {
      step *= 0.5;
    }
  }
  throw OptimizationError("mesh deformation inverts elements even after " + std::to_string(max_halvings) +
                          " step halvings");
}

using IterationCallback = std::function<void(const OptimizerState&, const Evaluation&)>;

inline OptimizerResult run_optimizer(const InterfaceIdentification& problem, const TriangleMesh& initial,
                                     const OptimizerOptions& opt, const InterfaceCurve& target,
                                     const IterationCallback& on_iteration = {}) {
  using clock = std::chrono::steady_clock;
  const auto t0 = clock::now();
  OptimizerResult result;
  auto& st = result.state;
  st.mesh = initial;
  LbfgsMemory memory(std::max<std::size_t>(1, opt.memory), opt.metric_a);

  auto record = [&](const Evaluation& ev, const TangentVector& grad, double step) {
    IterationRecord r;
    r.iter = st.iteration;
    r.objective = ev.value.total();
    r.misfit = ev.value.misfit;
    r.perimeter = ev.value.perimeter;
    r.gradnorm = g1_norm(ev.curve, grad, opt.metric_a);
    r.distance = shape_distance(ev.curve, target);
    r.seconds = opt.record_time ? std::chrono::duration<double>(clock::now() - t0).count() : 0.0;
    r.step = step;
    st.history.push_back(r);
    if (on_iteration) on_iteration(st, ev);
  };

  try {
    Evaluation ev = problem.evaluate(st.mesh);
    st.curve = ev.curve;
    TangentVector grad = sobolev_representation(ev.curve, ev.density, opt.metric_a);
    record(ev, grad, 0.0);
    // Gradient directions carry the objective's scale, so their fixed step is
    // set once from the initial gradient norm.
    const double g0 = st.history.back().gradnorm;
    const double sd_step = g0 > 0.0 ? opt.gradient_step / g0 : 0.0;
    while (true) {
      if (st.history.back().gradnorm < opt.grad_tol) {
        result.status = OptimizerStatus::converged;
        break;
      }
      if (st.iteration >= opt.max_iters) {
        result.status = OptimizerStatus::max_iterations;
        break;
      }
      const bool lbfgs = opt.method == Method::lbfgs;
      const TangentVector q = lbfgs ? lbfgs_direction(memory, grad, st.curve) : grad;
      const double step = lbfgs && !memory.empty() ? opt.step : sd_step;
      auto moved = optimization_step(st.mesh, st.curve, -q, step, opt.elasticity, opt.max_halvings);
      const TangentVector eta = -moved.step * q;

      Evaluation next = problem.evaluate(moved.mesh);
      TangentVector next_grad = sobolev_representation(next.curve, next.density, opt.metric_a);
      if (opt.method == Method::lbfgs)
        lbfgs_update(memory, transport(eta, eta), next_grad - transport(eta, grad), next.curve);

      st.mesh = std::move(moved.mesh);
      st.curve = next.curve;
      ++st.iteration;
      grad = std::move(next_grad);
      record(next, grad, moved.step);
    }
  } catch (const std::exception& e) {
    result.status = OptimizerStatus::failed;
    result.message = e.what();
  }
  return result;
}

}  // namespace shapeid
