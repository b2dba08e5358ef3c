#pragma once

// The interface identification problem: given observations on a reference
// mesh, evaluate the tracking objective and its interface shape gradient on
// any mesh of the same square.

#include <memory>
#include <vector>

#include "shapeid/mesh.hpp"
#include "shapeid/pde.hpp"
#include "shapeid/shape_calculus.hpp"

namespace shapeid {

enum class Mode { parabolic, elliptic };

struct PhysicsParameters {
  Mode mode = Mode::parabolic;
  double k1 = 1.0;     // outside the interface
  double k2 = 0.001;   // inside the interface
  double mu = 1e-4;    // perimeter weight
  double final_time = 20.0;
  int steps = 30;
  double source = 0.0;   // constant f
  double initial = 0.0;  // constant y0
};

/// Observations on their own mesh. Steady observations are a single level
/// with steps == 0.
struct Observation {
  TriangleMesh mesh;
  TimeSeriesField data;
};

/// Everything computed for one shape.
struct Evaluation {
  ObjectiveValue value;
  InterfaceCurve curve;
  GradientDensity density;
  TimeSeriesField y;
  TimeSeriesField p;
  TimeSeriesField ybar;
  bool steady = false;

  std::vector<AdjointPairing> pairings() const {
    return steady ? elliptic_pairings(y[0], p[0], ybar[0]) : parabolic_pairings(y, p, ybar);
  }
};

/// Solves the forward problem on `mesh` for the given physics.
inline TimeSeriesField solve_forward(const TriangleMesh& mesh, const PhysicsParameters& prm) {
  const auto k = CellField::from_subdomains(mesh, prm.k1, prm.k2);
  const ScalarField f(mesh.num_nodes(), prm.source);
  if (prm.mode == Mode::elliptic) return TimeSeriesField{0.0, 0, {solve_elliptic(mesh, k, f)}};
  const ScalarField y0(mesh.num_nodes(), prm.initial);
  return solve_state_parabolic(mesh, k, f, y0, prm.final_time, prm.steps);
}

class InterfaceIdentification {
 public:
  InterfaceIdentification(PhysicsParameters prm, std::shared_ptr<const Observation> obs)
      : prm_(prm), obs_(std::move(obs)) {
    const bool steady = prm_.mode == Mode::elliptic;
    if (steady != (obs_->data.steps == 0)) throw Error("observation does not match the problem mode");
    if (!steady && (obs_->data.steps != prm_.steps || obs_->data.final_time != prm_.final_time))
      throw Error("observation time grid does not match the problem");
  }

  const PhysicsParameters& physics() const { return prm_; }
  const Observation& observation() const { return *obs_; }

  /// Objective only (no adjoint).
  ObjectiveValue objective(const TriangleMesh& mesh) const {
    const auto y = solve_forward(mesh, prm_);
    const auto ybar = interpolate_observation(obs_->mesh, obs_->data, mesh);
    if (prm_.mode == Mode::elliptic) return evaluate_objective(mesh, y[0], ybar[0], prm_.mu);
    return evaluate_objective(mesh, y, ybar, prm_.mu);
  }

  Evaluation evaluate(const TriangleMesh& mesh) const {
    Evaluation ev;
    ev.steady = prm_.mode == Mode::elliptic;
    ev.curve = extract_interface(mesh);
    ev.y = solve_forward(mesh, prm_);
    ev.ybar = interpolate_observation(obs_->mesh, obs_->data, mesh);
    const auto k = CellField::from_subdomains(mesh, prm_.k1, prm_.k2);
    if (ev.steady) {
      ev.p = TimeSeriesField{0.0, 0, {solve_adjoint_elliptic(mesh, k, ev.y[0], ev.ybar[0])}};
      ev.value = evaluate_objective(mesh, ev.y[0], ev.ybar[0], prm_.mu);
    } else {
      ev.p = solve_adjoint_parabolic(mesh, k, ev.y, ev.ybar);
      ev.value = evaluate_objective(mesh, ev.y, ev.ybar, prm_.mu);
    }
    const auto pairs = ev.pairings();
    const ScalarField f(mesh.num_nodes(), prm_.source);
    ev.density = interface_gradient_density(mesh, ev.curve, pairs, prm_.k1, prm_.k2, prm_.mu, f);
    return ev;
  }

 private:
  PhysicsParameters prm_;
  std::shared_ptr<const Observation> obs_;
};

}  // namespace shapeid
