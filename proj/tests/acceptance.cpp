// Full-scale acceptance runs. Prints one PASS/FAIL line per criterion and
// exits non-zero if any fails.
//
//   shapeid_acceptance [--out <dir>] [criterion ...]

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <functional>
#include <iostream>
#include <optional>
#include <sstream>
#include <thread>

#include "support.hpp"

namespace shapeid {
namespace {

namespace fs = std::filesystem;

struct Outcome {
  bool pass = false;
  std::string detail;
};

fs::path g_out = "acceptance_output";

std::string fmt(double v, int prec = 4) {
  std::ostringstream s;
  s.precision(prec);
  s << v;
  return s.str();
}

/// First iteration whose distance is at most `fraction` of the initial one.
std::optional<int> threshold_iteration(const std::vector<IterationRecord>& h, double fraction = 0.1) {
  for (const auto& r : h)
    if (r.distance <= fraction * h.front().distance) return r.iter;
  return std::nullopt;
}

std::string iter_text(const std::optional<int>& it) { return it ? std::to_string(*it) : "never"; }

ExperimentResult run(ExperimentConfig cfg, const std::string& name, const Observation& clean) {
  cfg.output = (g_out / name).string();
  auto r = run_experiment(cfg, clean, cfg.seed);
  if (r.optimizer.status == OptimizerStatus::failed) throw Error(name + " failed: " + r.optimizer.message);
  return r;
}

// ---------------------------------------------------------------------------
// 1 and 2 share the gradient check on the default configuration.

struct GradientData {
  std::vector<GradientCheckRow> rows;
  double density_gap = 0.0;  // |form1 - sd2| / |sd2| in curve L2
};

const GradientData& gradient_data() {
  static const GradientData data = [] {
    const ExperimentConfig cfg;
    const auto clean = synthesize_observation(cfg);
    GradientData d;
    d.rows = gradient_check(cfg, clean, 5, 7);
    auto out = detail::open_for_writing(g_out / "gradient_check.csv");
    write_gradient_check_csv(out, d.rows);

    const auto problem = make_problem(cfg, clean, cfg.seed);
    const auto mesh = initial_mesh(cfg);
    const auto ev = problem.evaluate(mesh);
    const ScalarField f(mesh.num_nodes(), cfg.source);
    auto form1 = interface_gradient_density_form1(mesh, ev.curve, ev.pairings(), cfg.k1, cfg.k2, f);
    const auto kappa = discrete_curvature(ev.curve);
    std::vector<double> diff(kappa.size());
    for (std::size_t i = 0; i < diff.size(); ++i) diff[i] = form1.values[i] + cfg.mu * kappa[i] - ev.density.values[i];
    const auto m = curve_mass(ev.curve);
    d.density_gap = std::sqrt(m.inner(diff, diff) / m.inner(ev.density.values, ev.density.values));
    return d;
  }();
  return data;
}

Outcome ac1() {
  const auto& rows = gradient_data().rows;
  Outcome o{true, ""};
  std::vector<double> orders;
  double worst = 0.0;
  for (const auto& r : rows) {
    worst = std::max(worst, r.relative_error());
    orders.push_back(r.order);
  }
  std::sort(orders.begin(), orders.end());
  const double median = orders[orders.size() / 2];
  o.pass = worst <= 0.05 && median >= 0.8 && median <= 1.2;
  o.detail = "max |sd2 - FD|/|FD| = " + fmt(worst) + " (<= 0.05), median order = " + fmt(median) + " (in [0.8, 1.2])";
  return o;
}

Outcome ac2() {
  const auto& d = gradient_data();
  double worst1 = 0.0, worst2 = 0.0;
  for (const auto& r : d.rows) {
    worst1 = std::max(worst1, std::abs(r.boundary_form1 - r.domain_form) / std::abs(r.domain_form));
    worst2 = std::max(worst2, std::abs(r.boundary_form - r.domain_form) / std::abs(r.domain_form));
  }
  return {d.density_gap <= 0.1 && worst1 <= 0.1 && worst2 <= 0.1,
          "density L2 gap = " + fmt(d.density_gap) + ", form1 vs domain = " + fmt(worst1) +
              ", sd2 vs domain = " + fmt(worst2) + " (all <= 0.1)"};
}

Outcome ac3() {
  auto g = testing::rng(2024);
  double worst_dir = 0.0, worst_secant = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    const testing::QuadraticModel model(g);
    const std::size_t n = model.curve.size();
    const std::size_t m = 1 + static_cast<std::size_t>(testing::uniform(g, 0.0, 9.999));
    LbfgsMemory mem(m, model.a);
    std::vector<std::pair<std::vector<double>, std::vector<double>>> pairs;
    const int pushes = 1 + static_cast<int>(testing::uniform(g, 0.0, 11.999));
    for (int k = 0; k < pushes; ++k) {
      const auto s = testing::random_vector(g, n);
      const auto y = model.hessian_apply(s);
      if (!lbfgs_update(mem, TangentVector(s), TangentVector(y), model.curve)) return {false, "valid pair rejected"};
      pairs.emplace_back(s, y);
    }
    const auto& newest = pairs.back();
    testing::DenseInverseBfgs oracle(model.metric, testing::dense_inner(model.metric, newest.second, newest.first) /
                                                       testing::dense_inner(model.metric, newest.second, newest.second));
    for (std::size_t k = pairs.size() - mem.size(); k < pairs.size(); ++k) {
      oracle.update(pairs[k].first, pairs[k].second);
      worst_secant = std::max(worst_secant, testing::rel_g1_error(model.curve, model.a,
                                                                  testing::dense_apply(oracle.h, pairs[k].second), pairs[k].first));
    }
    const auto grad = testing::random_vector(g, n);
    const auto q = lbfgs_direction(mem, TangentVector(grad), model.curve);
    worst_dir = std::max(worst_dir, testing::rel_g1_error(model.curve, model.a, q.alpha, testing::dense_apply(oracle.h, grad)));
  }
  return {worst_dir <= 1e-10 && worst_secant <= 1e-10,
          "two-loop vs dense = " + fmt(worst_dir, 3) + ", secant residual = " + fmt(worst_secant, 3) +
              " (<= 1e-10, 200 problems)"};
}

Outcome ac4() {
  ExperimentConfig cfg;
  const auto clean = synthesize_observation(cfg);
  cfg.optimizer = Method::steepest_descent;
  const auto sd = run(cfg, "ac4_sd", clean);
  cfg.optimizer = Method::lbfgs;
  cfg.memory = 5;
  const auto lb = run(cfg, "ac4_lbfgs5", clean);
  const auto isd = threshold_iteration(sd.optimizer.state.history);
  const auto ilb = threshold_iteration(lb.optimizer.state.history);
  return {isd && ilb && *ilb < *isd,
          "10% reached at SD " + iter_text(isd) + ", L-BFGS(5) " + iter_text(ilb) + "; final distances " +
              fmt(sd.optimizer.state.history.back().distance) + " / " + fmt(lb.optimizer.state.history.back().distance)};
}

Outcome ac5() {
  ExperimentConfig cfg;
  cfg.mode = Mode::elliptic;
  const auto clean = synthesize_observation(cfg);
  cfg.optimizer = Method::steepest_descent;
  const auto isd = threshold_iteration(run(cfg, "ac5_sd", clean).optimizer.state.history);
  bool pass = isd.has_value();
  std::string detail = "10% reached at SD " + iter_text(isd);
  cfg.optimizer = Method::lbfgs;
  for (int m : {1, 5, 10}) {
    cfg.memory = m;
    const auto r = run(cfg, "ac5_lbfgs" + std::to_string(m), clean);
    const auto it = threshold_iteration(r.optimizer.state.history);
    pass = pass && it && *it < *isd;
    detail += ", L-BFGS(" + std::to_string(m) + ") " + iter_text(it) + " [" +
              (r.optimizer.status == OptimizerStatus::converged ? "grad_tol" : "max_iters") + "]";
  }
  return {pass, detail};
}

Outcome ac6() {
  ExperimentConfig coarse;
  const auto clean = synthesize_observation(coarse);
  ExperimentConfig fine = coarse;
  const auto coarse_cells = initial_mesh(coarse).num_triangles();
  std::size_t fine_cells = 0;
  do {
    ++fine.refinement;
    fine_cells = initial_mesh(fine).num_triangles();
  } while (fine_cells < 3 * coarse_cells);

  bool pass = true;
  std::string detail = std::to_string(coarse_cells) + " vs " + std::to_string(fine_cells) + " cells";
  for (Method method : {Method::steepest_descent, Method::lbfgs}) {
    coarse.optimizer = fine.optimizer = method;
    const std::string tag = method == Method::lbfgs ? "lbfgs" : "sd";
    const auto hc = run(coarse, "ac6_coarse_" + tag, clean).optimizer.state.history;
    const auto hf = run(fine, "ac6_fine_" + tag, clean).optimizer.state.history;
    double floor = hc.front().objective;
    for (const auto& r : hc) floor = std::min(floor, r.objective);
    // plateau: first coarse iterate whose objective is within 10% of the coarse minimum
    std::size_t plateau = 0;
    while (plateau < hc.size() && hc[plateau].objective > 1.1 * floor) ++plateau;
    double worst = 1.0;
    for (std::size_t i = 0; i < std::min(plateau, hf.size()); ++i) {
      const double ratio = hf[i].distance / hc[i].distance;
      worst = std::max(worst, std::max(ratio, 1.0 / ratio));
    }
    pass = pass && plateau <= hf.size() && worst <= 2.0;
    detail += "; " + tag + ": max ratio " + fmt(worst) + " before plateau at iteration " + std::to_string(plateau) +
              ", final distances " + fmt(hc.back().distance) + " / " + fmt(hf.back().distance);
  }
  return {pass, detail};
}

Outcome ac7() {
  ExperimentConfig cfg;
  cfg.noise = 0.05;
  cfg.output = (g_out / "ac7_noise").string();
  const int jobs = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  const auto s = run_noise_study(cfg, 10, std::min(jobs, 10));
  return {s.failed == 0 && s.spread_ratio <= 0.01,
          "max spread " + fmt(s.max_spread) + " / mean diameter " + fmt(s.mean_diameter) + " = " +
              fmt(100.0 * s.spread_ratio) + "% (<= 1%), failed runs " + std::to_string(s.failed)};
}

Outcome ac8() {
  std::vector<std::string> failures;
  auto check = [&](bool ok, const std::string& what) {
    if (!ok) failures.push_back(what);
  };

  // element matrices on the reference triangle
  const auto e = p1_element({0, 0}, {1, 0}, {0, 1});
  const auto m = element_mass(e.area);
  const auto k = element_stiffness(e, 1.0);
  const double mass[3][3] = {{2, 1, 1}, {1, 2, 1}, {1, 1, 2}};
  const double stiff[3][3] = {{1, -0.5, -0.5}, {-0.5, 0.5, 0}, {-0.5, 0, 0.5}};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      check(std::abs(m[i][j] - mass[i][j] / 24.0) <= 1e-12, "element mass");
      check(std::abs(k[i][j] - stiff[i][j]) <= 1e-12, "element stiffness");
    }

  // curvature of regular n-gons and total turning
  for (int n : {8, 64, 200}) {
    const auto c = InterfaceCurve::from_polyline(circle_polygon({0.1, -0.2}, 0.5, n));
    const auto kappa = discrete_curvature(c);
    const double expected = (2.0 * std::numbers::pi / n) / (2.0 * 0.5 * std::sin(std::numbers::pi / n));
    double total = 0.0;
    for (std::size_t i = 0; i < kappa.size(); ++i) {
      check(std::abs(kappa[i] - expected) <= 1e-12 * expected, "n-gon curvature");
      total += kappa[i] * c.weights[i];
    }
    check(std::abs(total - 2.0 * std::numbers::pi) <= 1e-12, "total curvature");
  }

  // Sobolev smoothing and metric
  auto g = testing::rng(8);
  const auto c = InterfaceCurve::from_polyline(testing::random_star_polygon(g, 40, {}, 0.4, 0.4));
  const GradientDensity gamma{testing::random_vector(g, c.size())};
  check(sobolev_representation(c, gamma, 0.0).alpha == gamma.values, "A = 0 smoothing");
  const TangentVector one(std::vector<double>(c.size(), 1.0));
  check(std::abs(g1_inner(c, one, one, 0.001) - c.perimeter()) <= 1e-13, "g1(1,1) = perimeter");

  // adjoint gradient of the discrete misfit against central differences in k
  const auto mesh = testing::small_mesh(24);
  const auto kf = CellField::from_subdomains(mesh, 1.0, 0.01);
  const ScalarField f(mesh.num_nodes(), 0.0), y0(mesh.num_nodes(), 0.0);
  SolveOptions tight;
  tight.cg.rel_tol = 1e-14;
  const auto ybar = solve_state_parabolic(mesh, CellField::from_subdomains(mesh, 1.0, 0.05), f, y0, 2.0, 8, tight);
  const auto y = solve_state_parabolic(mesh, kf, f, y0, 2.0, 8, tight);
  const auto p = solve_adjoint_parabolic(mesh, kf, y, ybar, tight);
  const auto grad = diffusivity_gradient(mesh, parabolic_pairings(y, p, ybar));
  const auto dk = testing::random_vector(g, mesh.num_triangles());
  // relative perturbation k_T (1 + eps dk_T)
  double predicted = 0.0;
  for (std::size_t t = 0; t < dk.size(); ++t) predicted += grad[t] * dk[t] * kf.values[t];
  auto misfit = [&](double eps) {
    CellField kk = kf;
    for (std::size_t t = 0; t < dk.size(); ++t) kk.values[t] *= 1.0 + eps * dk[t];
    return evaluate_objective(mesh, solve_state_parabolic(mesh, kk, f, y0, 2.0, 8, tight), ybar, 0.0).total();
  };
  const double eps = 1e-4;
  const double fd = (misfit(eps) - misfit(-eps)) / (2.0 * eps);
  const double adjoint_error = std::abs(predicted - fd) / std::abs(fd);
  check(adjoint_error <= 1e-6, "adjoint vs FD");

  std::string detail = "element matrices, n-gon curvature, total turning, A = 0 identity, g1(1,1), adjoint-FD " +
                       fmt(adjoint_error, 2);
  for (const auto& fl : failures) detail += "; failed: " + fl;
  return {failures.empty(), detail};
}

}  // namespace
}  // namespace shapeid

int main(int argc, char** argv) {
  using namespace shapeid;
  const std::vector<std::function<Outcome()>> criteria{ac1, ac2, ac3, ac4, ac5, ac6, ac7, ac8};
  std::vector<int> selected;
  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    if (arg == "--out" && i + 1 < argc) {
      g_out = argv[++i];
    } else {
      const int n = std::atoi(arg.c_str());
      if (n < 1 || n > static_cast<int>(criteria.size())) {
        std::cerr << "usage: shapeid_acceptance [--out <dir>] [criterion ...]\n";
        return 2;
      }
      selected.push_back(n);
    }
  }
  if (selected.empty())
    for (int n = 1; n <= static_cast<int>(criteria.size()); ++n) selected.push_back(n);

  bool all = true;
  for (int n : selected) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[static_cast<std::size_t>(n - 1)]();
    } catch (const std::exception& ex) {
      o = {false, std::string("error: ") + ex.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    all = all && o.pass;
    std::cout << "AC" << n << ' ' << (o.pass ? "PASS" : "FAIL") << "  " << o.detail << "  [" << fmt(secs, 3) << " s]"
              << std::endl;
  }
  return all ? 0 : 1;
}
