#pragma once

// Experiment driver: configuration, synthetic observations, noise, optimizer
// runs with file output, noise studies and finite-difference gradient checks.

#include <algorithm>
#include <array>
#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <future>
#include <iomanip>
#include <map>
#include <cmath>
#include <memory>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "shapeid/io.hpp"
#include "shapeid/problem.hpp"
#include "shapeid/riemannian_opt.hpp"

namespace shapeid {

class ConfigError : public Error {
 public:
  using Error::Error;
};

enum class NoiseDistribution { uniform, gaussian };

struct ExperimentConfig {
  Mode mode = Mode::parabolic;
  double k1 = 1.0;
  double k2 = 0.001;
  double mu = 1e-4;
  double A = 0.001;
  double T = 20.0;
  int N = 30;
  double source = 0.0;
  double initial_value = 0.0;

  double target_radius = 0.5;
  int reference_n_interface = 64;
  int reference_refinement = 4;

  double initial_center_x = 0.1;
  double initial_center_y = 0.1;
  double initial_radius = 0.35;
  std::string initial_polygon;  // node,x,y CSV; replaces the circle when set
  int n_interface = 104;
  int refinement = 1;

  Method optimizer = Method::lbfgs;
  int memory = 5;
  int max_iters = 50;
  double step = 1.0;
  double gradient_step = 0.1;
  double grad_tol = 1e-6;
  int max_halvings = 5;
  double elasticity_lambda = 0.0;
  double elasticity_mu = 1.0;

  double noise = 0.0;
  NoiseDistribution noise_distribution = NoiseDistribution::uniform;
  std::uint64_t seed = 1;

  std::string output = "out";
  int snapshot_every = 0;  // 0 disables VTK snapshots
  bool record_time = false;

  PhysicsParameters physics() const {
    PhysicsParameters p;
    p.mode = mode;
    p.k1 = k1;
    p.k2 = k2;
    p.mu = mu;
    p.final_time = T;
    p.steps = N;
    p.source = source;
    p.initial = initial_value;
    return p;
  }

  OptimizerOptions optimizer_options() const {
    OptimizerOptions o;
    o.method = optimizer;
    o.memory = static_cast<std::size_t>(memory);
    o.metric_a = A;
    o.step = step;
    o.gradient_step = gradient_step;
    o.max_iters = max_iters;
    o.grad_tol = grad_tol;
    o.max_halvings = max_halvings;
    o.elasticity = {elasticity_lambda, elasticity_mu};
    o.record_time = record_time;
    return o;
  }

  /// Throws ConfigError on out-of-range values.
  void validate() const {
    auto require = [](bool ok, const char* what) {
      if (!ok) throw ConfigError(what);
    };
    require(k1 > 0.0 && k2 > 0.0, "k1 and k2 must be positive");
    require(mu >= 0.0, "mu must be non-negative");
    require(A >= 0.0, "A must be non-negative");
    require(T > 0.0, "T must be positive");
    require(N >= 1, "N must be at least 1");
    require(target_radius > 0.0 && target_radius < 1.0, "target_radius must lie in (0, 1)");
    require(initial_radius > 0.0, "initial_radius must be positive");
    require(n_interface >= 8 && reference_n_interface >= 8, "interface node counts must be at least 8");
    require(refinement >= 1 && reference_refinement >= 1, "refinements must be positive");
    require(memory >= 1, "memory must be at least 1");
    require(max_iters >= 0, "max_iters must be non-negative");
    require(step > 0.0 && gradient_step > 0.0, "step sizes must be positive");
    require(grad_tol >= 0.0, "grad_tol must be non-negative");
    require(max_halvings >= 0, "max_halvings must be non-negative");
    require(elasticity_mu > 0.0 && elasticity_lambda >= 0.0, "elasticity needs mu > 0 and lambda >= 0");
    require(noise >= 0.0 && noise < 1.0, "noise must lie in [0, 1)");
    require(snapshot_every >= 0, "snapshot_every must be non-negative");
  }

  static ExperimentConfig parse(std::istream& in);
  static ExperimentConfig from_file(const std::filesystem::path& path);
  /// key = value lines that parse back to an identical configuration.
  std::string echo() const;
};

namespace detail {

inline std::string format_double(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

template <class T>
T parse_number(const std::string& key, const std::string& text) {
  T v{};
  const auto* end = text.data() + text.size();
  const auto r = std::from_chars(text.data(), end, v);
  if (r.ec != std::errc{} || r.ptr != end) throw ConfigError("invalid value '" + text + "' for key '" + key + "'");
  return v;
}

struct ConfigField {
  std::function<void(ExperimentConfig&, const std::string&)> set;
  std::function<std::string(const ExperimentConfig&)> get;
};

template <class T>
ConfigField number_field(T ExperimentConfig::*member, const std::string& key) {
  return {[member, key](ExperimentConfig& c, const std::string& v) { c.*member = parse_number<T>(key, v); },
          [member](const ExperimentConfig& c) {
            if constexpr (std::is_floating_point_v<T>)
              return format_double(c.*member);
            else
              return std::to_string(c.*member);
          }};
}

/// Keys in echo order.
inline const std::vector<std::pair<std::string, ConfigField>>& config_fields() {
  static const std::vector<std::pair<std::string, ConfigField>> fields = [] {
    using C = ExperimentConfig;
    std::vector<std::pair<std::string, ConfigField>> f;
    f.emplace_back("mode", ConfigField{[](C& c, const std::string& v) {
                                         if (v == "parabolic") c.mode = Mode::parabolic;
                                         else if (v == "elliptic") c.mode = Mode::elliptic;
                                         else throw ConfigError("mode must be parabolic or elliptic");
                                       },
                                       [](const C& c) { return std::string(c.mode == Mode::elliptic ? "elliptic" : "parabolic"); }});
    f.emplace_back("k1", number_field(&C::k1, "k1"));
    f.emplace_back("k2", number_field(&C::k2, "k2"));
    f.emplace_back("mu", number_field(&C::mu, "mu"));
    f.emplace_back("A", number_field(&C::A, "A"));
    f.emplace_back("T", number_field(&C::T, "T"));
    f.emplace_back("N", number_field(&C::N, "N"));
    f.emplace_back("source", number_field(&C::source, "source"));
    f.emplace_back("initial_value", number_field(&C::initial_value, "initial_value"));
    f.emplace_back("target_radius", number_field(&C::target_radius, "target_radius"));
    f.emplace_back("reference_n_interface", number_field(&C::reference_n_interface, "reference_n_interface"));
    f.emplace_back("reference_refinement", number_field(&C::reference_refinement, "reference_refinement"));
    f.emplace_back("initial_center_x", number_field(&C::initial_center_x, "initial_center_x"));
    f.emplace_back("initial_center_y", number_field(&C::initial_center_y, "initial_center_y"));
    f.emplace_back("initial_radius", number_field(&C::initial_radius, "initial_radius"));
    f.emplace_back("initial_polygon", ConfigField{[](C& c, const std::string& v) { c.initial_polygon = v; },
                                                  [](const C& c) { return c.initial_polygon; }});
    f.emplace_back("n_interface", number_field(&C::n_interface, "n_interface"));
    f.emplace_back("refinement", number_field(&C::refinement, "refinement"));
    f.emplace_back("optimizer", ConfigField{[](C& c, const std::string& v) {
                                              if (v == "sd") c.optimizer = Method::steepest_descent;
                                              else if (v == "lbfgs") c.optimizer = Method::lbfgs;
                                              else throw ConfigError("optimizer must be sd or lbfgs");
                                            },
                                            [](const C& c) { return std::string(c.optimizer == Method::lbfgs ? "lbfgs" : "sd"); }});
    f.emplace_back("memory", number_field(&C::memory, "memory"));
    f.emplace_back("max_iters", number_field(&C::max_iters, "max_iters"));
    f.emplace_back("step", number_field(&C::step, "step"));
    f.emplace_back("gradient_step", number_field(&C::gradient_step, "gradient_step"));
    f.emplace_back("grad_tol", number_field(&C::grad_tol, "grad_tol"));
    f.emplace_back("max_halvings", number_field(&C::max_halvings, "max_halvings"));
    f.emplace_back("elasticity_lambda", number_field(&C::elasticity_lambda, "elasticity_lambda"));
    f.emplace_back("elasticity_mu", number_field(&C::elasticity_mu, "elasticity_mu"));
    f.emplace_back("noise", number_field(&C::noise, "noise"));
    f.emplace_back("noise_distribution",
                   ConfigField{[](C& c, const std::string& v) {
                                 if (v == "uniform") c.noise_distribution = NoiseDistribution::uniform;
                                 else if (v == "gaussian") c.noise_distribution = NoiseDistribution::gaussian;
                                 else throw ConfigError("noise_distribution must be uniform or gaussian");
                               },
                               [](const C& c) {
                                 return std::string(c.noise_distribution == NoiseDistribution::gaussian ? "gaussian" : "uniform");
                               }});
    f.emplace_back("seed", number_field(&C::seed, "seed"));
    f.emplace_back("output", ConfigField{[](C& c, const std::string& v) { c.output = v; },
                                         [](const C& c) { return c.output; }});
    f.emplace_back("snapshot_every", number_field(&C::snapshot_every, "snapshot_every"));
    f.emplace_back("record_time", ConfigField{[](C& c, const std::string& v) {
                                                if (v == "true" || v == "1") c.record_time = true;
                                                else if (v == "false" || v == "0") c.record_time = false;
                                                else throw ConfigError("record_time must be true or false");
                                              },
                                              [](const C& c) { return std::string(c.record_time ? "true" : "false"); }});
    return f;
  }();
  return fields;
}

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace detail

/// Flat `key = value` lines; `#` starts a comment. Unknown or repeated keys are errors.
inline ExperimentConfig ExperimentConfig::parse(std::istream& in) {
  std::map<std::string, const detail::ConfigField*> lookup;
  for (const auto& [key, field] : detail::config_fields()) lookup[key] = &field;
  ExperimentConfig c;
  std::map<std::string, int> seen;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("line " + std::to_string(line_no) + ": expected key = value");
    const std::string key = detail::trim(line.substr(0, eq));
    const std::string value = detail::trim(line.substr(eq + 1));
    const auto it = lookup.find(key);
    if (it == lookup.end()) throw ConfigError("line " + std::to_string(line_no) + ": unknown key '" + key + "'");
    if (seen[key]++) throw ConfigError("line " + std::to_string(line_no) + ": repeated key '" + key + "'");
    it->second->set(c, value);
  }
  c.validate();
  return c;
}

inline ExperimentConfig ExperimentConfig::from_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  return parse(in);
}

inline std::string ExperimentConfig::echo() const {
  std::ostringstream out;
  for (const auto& [key, field] : detail::config_fields()) out << key << " = " << field.get(*this) << '\n';
  return out.str();
}

// ---------------------------------------------------------------------------
// Data

/// State solution for the circular target interface on the reference mesh.
inline Observation synthesize_observation(const ExperimentConfig& cfg) {
  auto mesh = generate_ogrid_mesh(cfg.reference_n_interface, {0.0, 0.0}, cfg.target_radius, cfg.reference_refinement);
  auto data = solve_forward(mesh, cfg.physics());
  return {std::move(mesh), std::move(data)};
}

/// Independent samples per node and level: uniform on [-a, a] or normal with
/// standard deviation a, where a = amplitude * max |ybar|.
inline TimeSeriesField add_noise(const TimeSeriesField& ybar, double amplitude, std::uint64_t seed,
                                 NoiseDistribution distribution = NoiseDistribution::uniform) {
  if (!(amplitude >= 0.0 && amplitude < 1.0)) throw Error("noise amplitude must lie in [0, 1)");
  TimeSeriesField out = ybar;
  if (amplitude == 0.0) return out;
  double peak = 0.0;
  for (const auto& level : ybar.levels)
    for (double v : level) peak = std::max(peak, std::abs(v));
  const double a = amplitude * peak;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uniform(-a, a);
  std::normal_distribution<double> normal(0.0, a);
  for (auto& level : out.levels)
    for (double& v : level) v += distribution == NoiseDistribution::uniform ? uniform(rng) : normal(rng);
  return out;
}

inline TriangleMesh initial_mesh(const ExperimentConfig& cfg) {
  if (!cfg.initial_polygon.empty()) {
    std::ifstream in(cfg.initial_polygon);
    if (!in) throw ConfigError("cannot open initial polygon " + cfg.initial_polygon);
    return generate_ogrid_mesh(read_shape_csv(in).points, cfg.refinement);
  }
  return generate_ogrid_mesh(cfg.n_interface, {cfg.initial_center_x, cfg.initial_center_y}, cfg.initial_radius,
                             cfg.refinement);
}

/// Problem with (possibly noisy) observations for the given seed.
inline InterfaceIdentification make_problem(const ExperimentConfig& cfg, const Observation& clean, std::uint64_t seed) {
  auto obs = std::make_shared<Observation>(clean);
  if (cfg.noise > 0.0) obs->data = add_noise(clean.data, cfg.noise, seed, cfg.noise_distribution);
  return InterfaceIdentification(cfg.physics(), std::move(obs));
}

// ---------------------------------------------------------------------------
// Single run

inline void write_history_csv(std::ostream& out, const std::vector<IterationRecord>& history) {
  const auto prec = out.precision(17);
  out << "iter,J,misfit,perimeter,gradnorm,distance,seconds\n";
  for (const auto& r : history)
    out << r.iter << ',' << r.objective << ',' << r.misfit << ',' << r.perimeter << ',' << r.gradnorm << ','
        << r.distance << ',' << r.seconds << '\n';
  out.precision(prec);
}

struct ExperimentResult {
  OptimizerResult optimizer;
  InterfaceCurve target;
  std::uint64_t seed = 0;
};

namespace detail {

inline void write_snapshot(const std::filesystem::path& dir, const ExperimentConfig& cfg, const OptimizerState& st,
                           const Evaluation& ev) {
  std::ostringstream stem;
  stem << std::setw(4) << std::setfill('0') << st.iteration;
  const auto k = CellField::from_subdomains(st.mesh, cfg.k1, cfg.k2);
  PointData pd;
  pd.scalars.emplace_back("y", ev.y.levels.back());
  pd.scalars.emplace_back("p", ev.p.levels.front());
  pd.scalars.emplace_back("ybar", ev.ybar.levels.back());
  write_vtk(dir / ("mesh_" + stem.str() + ".vtk"), st.mesh, &k, pd);
  const auto gamma_tilde = sobolev_representation(ev.curve, ev.density, cfg.A);
  auto out = open_for_writing(dir / ("gradient_" + stem.str() + ".csv"));
  write_gradient_csv(out, ev.curve, ev.density, discrete_curvature(ev.curve), gamma_tilde);
}

}  // namespace detail

/// Runs the optimizer on one data set. With a non-empty `cfg.output` the run
/// writes config_echo.txt, history.csv, shape_initial.csv, shape_target.csv,
/// shape_final.csv and, every `snapshot_every` iterations, snapshots/. A
/// non-null `log` receives one line per iteration.
inline ExperimentResult run_experiment(const ExperimentConfig& cfg, const Observation& clean, std::uint64_t seed,
                                       std::ostream* log = nullptr) {
  cfg.validate();
  const std::filesystem::path dir = cfg.output;
  const bool write = !cfg.output.empty();
  if (write) {
    auto echo = detail::open_for_writing(dir / "config_echo.txt");
    ExperimentConfig used = cfg;
    used.seed = seed;
    echo << used.echo();
  }
  const auto problem = make_problem(cfg, clean, seed);
  const auto mesh0 = initial_mesh(cfg);
  ExperimentResult res;
  res.seed = seed;
  res.target = extract_interface(clean.mesh);
  if (write) {
    write_shape_csv(dir / "shape_initial.csv", extract_interface(mesh0));
    write_shape_csv(dir / "shape_target.csv", res.target);
  }
  const IterationCallback cb = [&](const OptimizerState& st, const Evaluation& ev) {
    if (write && cfg.snapshot_every > 0 && st.iteration % cfg.snapshot_every == 0)
      detail::write_snapshot(dir / "snapshots", cfg, st, ev);
    if (log) {
      const auto& r = st.history.back();
      *log << "iter " << r.iter << "  J " << r.objective << "  |grad| " << r.gradnorm << "  distance " << r.distance
           << "  step " << r.step << std::endl;
    }
  };
  res.optimizer = run_optimizer(problem, mesh0, cfg.optimizer_options(), res.target, cb);
  if (write) {
    auto hist = detail::open_for_writing(dir / "history.csv");
    write_history_csv(hist, res.optimizer.state.history);
    if (!res.optimizer.state.curve.points.empty()) write_shape_csv(dir / "shape_final.csv", res.optimizer.state.curve);
  }
  return res;
}

inline ExperimentResult run_experiment(const ExperimentConfig& cfg, std::ostream* log = nullptr) {
  return run_experiment(cfg, synthesize_observation(cfg), cfg.seed, log);
}

// ---------------------------------------------------------------------------
// Noise study

/// Largest distance from a vertex of `a` to the polyline `b`, symmetrised.
inline double hausdorff_distance(const InterfaceCurve& a, const InterfaceCurve& b) {
  auto one_sided = [](const InterfaceCurve& from, const InterfaceCurve& to) {
    double worst = 0.0;
    for (const auto& x : from.points) {
      double best = std::numeric_limits<double>::infinity();
      for (std::size_t e = 0; e < to.size(); ++e) {
        const Vec2 p = to.points[e], d = to.points[to.next(e)] - p;
        const double u = std::clamp(dot(x - p, d) / dot(d, d), 0.0, 1.0);
        best = std::min(best, norm(p + u * d - x));
      }
      worst = std::max(worst, best);
    }
    return worst;
  };
  return std::max(one_sided(a, b), one_sided(b, a));
}

/// Largest distance between two vertices.
inline double curve_diameter(const InterfaceCurve& c) {
  double d = 0.0;
  for (std::size_t i = 0; i < c.size(); ++i)
    for (std::size_t j = i + 1; j < c.size(); ++j) d = std::max(d, norm(c.points[i] - c.points[j]));
  return d;
}

struct NoiseStudySummary {
  std::vector<std::uint64_t> seeds;
  std::vector<ExperimentResult> runs;
  std::vector<std::vector<double>> pairwise;  // Hausdorff distances between final shapes
  double mean_diameter = 0.0;
  double max_spread = 0.0;
  double spread_ratio = 0.0;  // max_spread / mean_diameter
  std::size_t failed = 0;
};

/// Run i uses seed cfg.seed + i and writes into <output>/run_<i>. Up to `jobs`
/// runs execute concurrently. Failed runs are kept but excluded from the spread.
inline NoiseStudySummary run_noise_study(const ExperimentConfig& cfg, int n_runs, int jobs = 1) {
  if (n_runs < 2) throw ConfigError("a noise study needs at least two runs");
  cfg.validate();
  const Observation clean = synthesize_observation(cfg);
  const std::filesystem::path dir = cfg.output;
  NoiseStudySummary s;
  s.runs.resize(static_cast<std::size_t>(n_runs));
  for (int i = 0; i < n_runs; ++i) s.seeds.push_back(cfg.seed + static_cast<std::uint64_t>(i));

  auto one = [&](int i) {
    ExperimentConfig c = cfg;
    if (!cfg.output.empty()) {
      std::ostringstream name;
      name << "run_" << std::setw(3) << std::setfill('0') << i;
      c.output = (dir / name.str()).string();
    }
    c.snapshot_every = 0;
    return run_experiment(c, clean, s.seeds[static_cast<std::size_t>(i)]);
  };
  const int width = std::max(1, jobs);
  for (int base = 0; base < n_runs; base += width) {
    std::vector<std::future<ExperimentResult>> batch;
    for (int i = base; i < std::min(n_runs, base + width); ++i)
      batch.push_back(std::async(width > 1 ? std::launch::async : std::launch::deferred, one, i));
    for (std::size_t j = 0; j < batch.size(); ++j) s.runs[static_cast<std::size_t>(base) + j] = batch[j].get();
  }

  std::vector<std::size_t> ok;
  for (std::size_t i = 0; i < s.runs.size(); ++i) {
    if (s.runs[i].optimizer.status == OptimizerStatus::failed || s.runs[i].optimizer.state.curve.points.empty())
      ++s.failed;
    else
      ok.push_back(i);
  }
  const std::size_t n = s.runs.size();
  s.pairwise.assign(n, std::vector<double>(n, 0.0));
  for (std::size_t a = 0; a < ok.size(); ++a)
    for (std::size_t b = a + 1; b < ok.size(); ++b) {
      const double d = hausdorff_distance(s.runs[ok[a]].optimizer.state.curve, s.runs[ok[b]].optimizer.state.curve);
      s.pairwise[ok[a]][ok[b]] = s.pairwise[ok[b]][ok[a]] = d;
      s.max_spread = std::max(s.max_spread, d);
    }
  for (std::size_t i : ok) s.mean_diameter += curve_diameter(s.runs[i].optimizer.state.curve);
  if (!ok.empty()) s.mean_diameter /= static_cast<double>(ok.size());
  s.spread_ratio = s.mean_diameter > 0.0 ? s.max_spread / s.mean_diameter : 0.0;

  if (!cfg.output.empty()) {
    auto out = detail::open_for_writing(dir / "spread.csv");
    out << "run,seed,status,final_J,final_distance,diameter,max_distance_to_others\n";
    for (std::size_t i = 0; i < n; ++i) {
      const auto& r = s.runs[i];
      const auto& h = r.optimizer.state.history;
      const bool good = std::find(ok.begin(), ok.end(), i) != ok.end();
      double worst = 0.0;
      for (double d : s.pairwise[i]) worst = std::max(worst, d);
      out << i << ',' << s.seeds[i] << ','
          << (r.optimizer.status == OptimizerStatus::failed ? "failed" : "ok") << ','
          << (h.empty() ? 0.0 : h.back().objective) << ',' << (h.empty() ? 0.0 : h.back().distance) << ','
          << (good ? curve_diameter(r.optimizer.state.curve) : 0.0) << ',' << worst << '\n';
    }
    auto sum = detail::open_for_writing(dir / "spread_summary.txt");
    sum << "runs = " << n << "\nfailed = " << s.failed << "\nmean_diameter = " << s.mean_diameter
        << "\nmax_spread = " << s.max_spread << "\nspread_ratio = " << s.spread_ratio << "\nseeds =";
    for (auto seed : s.seeds) sum << ' ' << seed;
    sum << '\n';
  }
  return s;
}

// ---------------------------------------------------------------------------
// Gradient check

/// Smooth velocity b(x) (c0 + c1 x + c2 y + c3 sin(pi x) cos(pi y), ...) with a
/// bump b that vanishes on the square's boundary and near it.
struct SmoothField {
  std::array<double, 8> c{};

  static SmoothField random(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    SmoothField f;
    for (double& v : f.c) v = u(rng);
    return f;
  }

  Vec2 operator()(Vec2 x) const {
    const double r = std::max(std::abs(x.x), std::abs(x.y)) / 0.9;
    const double bump = r >= 1.0 ? 0.0 : 1.0 - std::pow(r, 8);
    const double w = std::sin(std::numbers::pi * x.x) * std::cos(std::numbers::pi * x.y);
    return bump * Vec2{c[0] + c[1] * x.x + c[2] * x.y + c[3] * w, c[4] + c[5] * x.x + c[6] * x.y + c[7] * w};
  }

  std::vector<Vec2> nodal(const TriangleMesh& mesh) const {
    std::vector<Vec2> v(mesh.num_nodes());
    for (std::size_t i = 0; i < v.size(); ++i)
      v[i] = mesh.on_outer_boundary(static_cast<int>(i)) ? Vec2{} : (*this)(mesh.node(static_cast<int>(i)));
    return v;
  }
};

struct GradientCheckRow {
  double boundary_form = 0.0;   // sum gamma <V,n> w with the sd2 density
  double boundary_form1 = 0.0;  // same with the first boundary form
  double domain_form = 0.0;     // volume oracle plus perimeter term
  std::array<double, 3> eps{1e-2, 5e-3, 2.5e-3};
  std::array<double, 3> central{};
  std::array<double, 3> forward{};
  double extrapolated = 0.0;  // 2 D(eps_3) - D(eps_2) from forward differences
  double order = 0.0;         // log2 of successive forward-difference changes; 1 for a first-order scheme

  double relative_error() const { return std::abs(boundary_form - central[2]) / std::abs(central[2]); }
};

/// Compares analytic directional derivatives with finite differences of the
/// discrete objective for `n_fields` random smooth deformations of the initial mesh.
inline std::vector<GradientCheckRow> gradient_check(const ExperimentConfig& cfg, const Observation& clean,
                                                    int n_fields, std::uint64_t seed) {
  const auto problem = make_problem(cfg, clean, cfg.seed);
  const auto mesh = initial_mesh(cfg);
  const auto ev = problem.evaluate(mesh);
  const auto pairs = ev.pairings();
  const auto k = CellField::from_subdomains(mesh, cfg.k1, cfg.k2);
  const ScalarField f(mesh.num_nodes(), cfg.source);
  auto form1 = interface_gradient_density_form1(mesh, ev.curve, pairs, cfg.k1, cfg.k2, f);
  const auto kappa = discrete_curvature(ev.curve);
  for (std::size_t i = 0; i < form1.size(); ++i) form1.values[i] += cfg.mu * kappa[i];
  GradientDensity perimeter{std::vector<double>(kappa.size())};
  for (std::size_t i = 0; i < kappa.size(); ++i) perimeter.values[i] = cfg.mu * kappa[i];
  const double j0 = problem.objective(mesh).total();

  std::mt19937_64 rng(seed);
  std::vector<GradientCheckRow> rows;
  for (int trial = 0; trial < n_fields; ++trial) {
    const auto v = SmoothField::random(rng).nodal(mesh);
    GradientCheckRow r;
    r.boundary_form = boundary_derivative(ev.curve, ev.density, v);
    r.boundary_form1 = boundary_derivative(ev.curve, form1, v);
    r.domain_form = domain_gradient_oracle(mesh, k, f, pairs, v) + boundary_derivative(ev.curve, perimeter, v);
    for (std::size_t e = 0; e < 3; ++e) {
      std::vector<Vec2> up(v.size()), down(v.size());
      for (std::size_t i = 0; i < v.size(); ++i) {
        up[i] = r.eps[e] * v[i];
        down[i] = -r.eps[e] * v[i];
      }
      const double jp = problem.objective(apply_displacement(mesh, up)).total();
      const double jm = problem.objective(apply_displacement(mesh, down)).total();
      r.central[e] = (jp - jm) / (2.0 * r.eps[e]);
      r.forward[e] = (jp - j0) / r.eps[e];
    }
    r.extrapolated = 2.0 * r.forward[2] - r.forward[1];
    r.order = std::log2(std::abs(r.forward[0] - r.forward[1]) / std::abs(r.forward[1] - r.forward[2]));
    rows.push_back(r);
  }
  return rows;
}

inline void write_gradient_check_csv(std::ostream& out, const std::vector<GradientCheckRow>& rows) {
  const auto prec = out.precision(17);
  out << "field,boundary_form,boundary_form1,domain_form,central_1e-2,central_5e-3,central_2.5e-3,"
         "forward_1e-2,forward_5e-3,forward_2.5e-3,extrapolated,order,relative_error\n";
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& r = rows[i];
    out << i << ',' << r.boundary_form << ',' << r.boundary_form1 << ',' << r.domain_form;
    for (double d : r.central) out << ',' << d;
    for (double d : r.forward) out << ',' << d;
    out << ',' << r.extrapolated << ',' << r.order << ',' << r.relative_error() << '\n';
  }
  out.precision(prec);
}

}  // namespace shapeid
