// Command-line driver for interface identification experiments.

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>

#include "shapeid/experiment.hpp"

namespace {

using namespace shapeid;

struct Common {
  std::string config;
  std::string out;
  int snapshot_every = -1;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config, "key = value experiment file")->required()->check(CLI::ExistingFile);
  cmd->add_option("--out", c.out, "output directory (overrides the config)");
  cmd->add_option("--snapshot-every", c.snapshot_every, "write VTK and gradient snapshots every k iterations")
      ->check(CLI::NonNegativeNumber);
}

ExperimentConfig load(const Common& c) {
  auto cfg = ExperimentConfig::from_file(c.config);
  if (!c.out.empty()) cfg.output = c.out;
  if (c.snapshot_every >= 0) cfg.snapshot_every = c.snapshot_every;
  return cfg;
}

const char* status_name(OptimizerStatus s) {
  switch (s) {
    case OptimizerStatus::converged: return "converged";
    case OptimizerStatus::max_iterations: return "max_iterations";
    case OptimizerStatus::failed: return "failed";
  }
  return "unknown";
}

int run(const Common& c) {
  const auto cfg = load(c);
  const auto res = run_experiment(cfg, &std::cerr);
  const auto& h = res.optimizer.state.history;
  std::cout << "status " << status_name(res.optimizer.status);
  if (!h.empty()) std::cout << "  iterations " << h.back().iter << "  J " << h.back().objective << "  distance "
                            << h.front().distance << " -> " << h.back().distance;
  std::cout << '\n';
  if (res.optimizer.status == OptimizerStatus::failed) {
    std::cerr << "error: " << res.optimizer.message << '\n';
    return 1;
  }
  return 0;
}

int noise_study(const Common& c, int runs, int jobs) {
  const auto cfg = load(c);
  const auto s = run_noise_study(cfg, runs, jobs);
  std::cout << "runs " << runs << "  failed " << s.failed << "  mean_diameter " << s.mean_diameter << "  max_spread "
            << s.max_spread << "  spread_ratio " << s.spread_ratio << "\nseeds";
  for (auto seed : s.seeds) std::cout << ' ' << seed;
  std::cout << '\n';
  return s.failed == 0 ? 0 : 1;
}

int gradient_check_cmd(const Common& c, int fields, std::uint64_t seed) {
  const auto cfg = load(c);
  const auto rows = gradient_check(cfg, synthesize_observation(cfg), fields, seed);
  write_gradient_check_csv(std::cout, rows);
  if (!cfg.output.empty()) {
    auto out = detail::open_for_writing(std::filesystem::path(cfg.output) / "gradient_check.csv");
    write_gradient_check_csv(out, rows);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Interface identification by shape optimization"};
  app.require_subcommand(1);

  Common run_opts, noise_opts, check_opts;
  auto* run_cmd = app.add_subcommand("run", "synthesize data and run the optimizer");
  add_common(run_cmd, run_opts);

  int runs = 10, jobs = 1;
  auto* noise_cmd = app.add_subcommand("noise-study", "repeat a run with independent noise seeds");
  add_common(noise_cmd, noise_opts);
  noise_cmd->add_option("--runs", runs, "number of runs")->check(CLI::Range(2, 100000));
  noise_cmd->add_option("--jobs", jobs, "concurrent runs")->check(CLI::PositiveNumber);

  int fields = 5;
  std::uint64_t field_seed = 1;
  auto* check_cmd = app.add_subcommand("gradient-check", "compare shape derivatives with finite differences");
  add_common(check_cmd, check_opts);
  check_cmd->add_option("--fields", fields, "number of random perturbation fields")->check(CLI::PositiveNumber);
  check_cmd->add_option("--seed", field_seed, "seed for the perturbation fields");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run_cmd) return run(run_opts);
    if (*noise_cmd) return noise_study(noise_opts, runs, jobs);
    if (*check_cmd) return gradient_check_cmd(check_opts, fields, field_seed);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
