#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "mobsense/baselines.hpp"
#include "mobsense/evaluation.hpp"
#include "mobsense/export.hpp"
#include "mobsense/guidance.hpp"
#include "mobsense/scenario.hpp"

namespace fs = std::filesystem;
using namespace mobsense;

namespace {

constexpr const char* kSeedEnv = "MOBSENSE_SEED";

struct GlobalOptions {
  std::string config;
  std::string out = "out";
  std::optional<int> order;
  std::optional<std::uint64_t> seed;
  int threads = 1;
};

ScenarioSpec resolve(const GlobalOptions& g) {
  ScenarioSpec spec = load_scenario(g.config);
  if (g.order) spec.order = *g.order;
  if (g.seed) {
    spec.seed = *g.seed;
  } else if (const char* env = std::getenv(kSeedEnv); env != nullptr && *env != '\0') {
    spec.seed = std::stoull(env);
  }
  spec.validate();
  return spec;
}

void write_sidecar(const fs::path& out, const ScenarioSpec& spec) {
  write_text_file(out / "run.ini", serialize_scenario(spec));
}

std::pair<int, int> parse_range(const std::string& text) {
  const auto dots = text.find("..");
  if (dots == std::string::npos) throw CLI::ValidationError("--mp-range", "expected a..b");
  return {std::stoi(text.substr(0, dots)), std::stoi(text.substr(dots + 2))};
}

int run_discretize(const GlobalOptions& g) {
  const ScenarioSpec spec = resolve(g);
  const SpectralModel model = build_spectral_model(spec.order, spec.field);
  const fs::path out(g.out);
  write_file(out / "A.csv", [&](std::ostream& o) { write_matrix_csv(o, model.generator); });
  write_file(out / "Q.csv", [&](std::ostream& o) { write_matrix_csv(o, model.process_cov); });
  write_file(out / "Pi0.csv", [&](std::ostream& o) { write_matrix_csv(o, model.init_cov); });
  write_sidecar(out, spec);
  std::cout << "order " << spec.order << " dim " << model.dim() << " trace_Pi0 "
            << format_real(model.init_cov.trace()) << "\n";
  return 0;
}

int run_solve(const GlobalOptions& g) {
  const ScenarioSpec spec = resolve(g);
  const GuidanceProblem problem = GuidanceProblem::from_scenario(spec);
  const GuidanceSolution sol = solve_fbs(problem);
  const fs::path out(g.out);
  write_file(out / "solution.csv", [&](std::ostream& o) { write_solution_csv(o, sol, spec.grid); });
  write_file(out / "costs.csv", [&](std::ostream& o) { write_costs_csv(o, sol); });
  write_sidecar(out, spec);
  std::cout << "total " << format_real(sol.cost_total) << " uncertainty "
            << format_real(sol.cost_uncertainty) << " mobility " << format_real(sol.cost_mobility)
            << " iterations " << sol.iterations << (sol.converged ? "" : " (not converged)")
            << "\n";
  return sol.converged ? 0 : 2;
}

int run_simulate(const GlobalOptions& g, const std::string& policy_text, int trials,
                 const std::vector<double>& snapshots) {
  const ScenarioSpec spec = resolve(g);
  const PolicyId policy = parse_policy(policy_text);
  const GuidanceProblem problem = GuidanceProblem::from_scenario(spec);
  TimeSeries states;
  bool converged = true;
  if (policy == PolicyId::optimal) {
    const GuidanceSolution sol = solve_fbs(problem);
    converged = sol.converged;
    states = sol.states;
  } else {
    states = baseline_states(policy, problem.fleet(), spec.field, spec.grid);
  }
  TrialOptions options;
  options.threads = g.threads;
  options.snapshot_times = snapshots;
  TrialStats stats = run_trials(problem, states, trials, spec.seed, options);
  stats.policy = policy;
  const fs::path out(g.out);
  const std::string name(policy_name(policy));
  write_file(out / ("trials_" + name + ".csv"), [&](std::ostream& o) { write_trials_csv(o, stats); });
  for (std::size_t s = 0; s < stats.variance_grid_snapshots.size(); ++s) {
    const VarianceSnapshot& snap = stats.variance_grid_snapshots[s];
    write_file(out / ("variance_" + name + "_t" + format_real(snap.time) + ".csv"),
               [&](std::ostream& o) { write_variance_csv(o, snap.variance); });
  }
  write_sidecar(out, spec);
  std::cout << name << " trials " << stats.n_trials << " mean "
            << format_real(stats.terminal_error_mean) << " std "
            << format_real(stats.terminal_error_std) << "\n";
  return converged ? 0 : 2;
}

int report_study(const GlobalOptions& g, const ScenarioSpec& spec, const StudyResult& result) {
  const fs::path out(g.out);
  write_file(out / (std::string(study_name(result.kind)) + ".csv"),
             [&](std::ostream& o) { write_study_csv(o, result); });
  write_sidecar(out, spec);
  bool converged = true;
  for (const StudyEntry& e : result.entries) {
    std::cout << study_name(result.kind) << " " << format_real(e.value) << " total "
              << format_real(e.cost_total) << " normalized " << format_real(e.normalized_total)
              << (e.converged ? "" : " (not converged)") << "\n";
    converged = converged && e.converged;
  }
  return converged ? 0 : 2;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Mobile sensor guidance for diffusion-advection field estimation"};
  app.require_subcommand(1);
  GlobalOptions g;
  app.add_option("--config", g.config, "Scenario file")->required()->check(CLI::ExistingFile);
  app.add_option("--out", g.out, "Output directory");
  app.add_option("--order", g.order, "Galerkin order N (overrides config)")->check(CLI::PositiveNumber);
  app.add_option("--seed", g.seed, "Master seed (overrides config and MOBSENSE_SEED)");
  app.add_option("--threads", g.threads, "Worker threads")->check(CLI::PositiveNumber);

  app.add_subcommand("discretize", "Dump A_N, Q_N and Pi0_N");
  app.add_subcommand("solve", "Solve for the optimal guidance");

  auto* simulate = app.add_subcommand("simulate", "Monte Carlo evaluation of a policy");
  std::string policy = "optimal";
  int trials = 100;
  std::vector<double> snapshots;
  simulate->add_option("--policy", policy, "optimal, naive1, naive2, naive3 or null");
  simulate->add_option("--trials", trials)->check(CLI::PositiveNumber);
  simulate->add_option("--snapshots", snapshots, "Variance snapshot times")->delimiter(',');

  auto* sweep = app.add_subcommand("sweep", "Sweep R or gamma");
  std::string param;
  std::vector<double> values;
  int sweep_trials = 0;
  sweep->add_option("--param", param)->required()->check(CLI::IsMember({"R", "gamma"}));
  sweep->add_option("--values", values)->required()->delimiter(',');
  sweep->add_option("--trials", sweep_trials, "Monte Carlo trials per entry")
      ->check(CLI::NonNegativeNumber);

  auto* convergence = app.add_subcommand("convergence", "Optimal cost versus order");
  std::vector<int> orders{4, 6, 8, 10, 12};
  convergence->add_option("--orders", orders)->delimiter(',');

  auto* heterogeneous = app.add_subcommand("heterogeneous", "Mixed poor/superior teams");
  std::string mp_range = "0..8";
  HeterogeneousConfig hetero;
  heterogeneous->add_option("--mp-range", mp_range, "Poor sensor counts a..b");
  heterogeneous->add_option("--sensors", hetero.n_sensors)->check(CLI::PositiveNumber);

  CLI11_PARSE(app, argc, argv);

  try {
    if (app.got_subcommand("discretize")) return run_discretize(g);
    if (app.got_subcommand("solve")) return run_solve(g);
    if (app.got_subcommand(simulate)) return run_simulate(g, policy, trials, snapshots);
    if (app.got_subcommand(sweep)) {
      const ScenarioSpec spec = resolve(g);
      const SweepParameter p = param == "R" ? SweepParameter::R : SweepParameter::gamma;
      return report_study(g, spec,
                          parameter_sweep(spec, p, values, sweep_trials, spec.seed, g.threads));
    }
    if (app.got_subcommand(convergence)) {
      const ScenarioSpec spec = resolve(g);
      return report_study(g, spec, convergence_study(spec, orders, g.threads));
    }
    if (app.got_subcommand(heterogeneous)) {
      const ScenarioSpec spec = resolve(g);
      std::tie(hetero.mp_min, hetero.mp_max) = parse_range(mp_range);
      return report_study(g, spec, heterogeneous_study(spec, hetero, g.threads));
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
