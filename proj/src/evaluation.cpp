#include "mobsense/evaluation.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <stdexcept>
#include <thread>

#include "mobsense/plant.hpp"
#include "mobsense/rng.hpp"

namespace mobsense {

void parallel_for(int count, int threads, const std::function<void(int)>& body) {
  if (count <= 0) return;
  const int workers = std::clamp(threads, 1, count);
  if (workers == 1) {
    for (int i = 0; i < count; ++i) body(i);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (int i = next++; i < count; i = next++) {
        try {
          body(i);
        } catch (...) {
          std::lock_guard lock(failure_mutex);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  }
  for (std::thread& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

namespace {

int nearest_node(const TimeGrid& grid, double t) {
  if (t < -1e-12 || t > grid.horizon + 1e-12) {
    throw std::invalid_argument("snapshot time outside the horizon");
  }
  return static_cast<int>(std::lround(t / grid.step));
}

double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

double sample_std(const std::vector<double>& v, double mean) {
  if (v.size() < 2) return 0.0;
  double s = 0.0;
  for (double x : v) s += (x - mean) * (x - mean);
  return std::sqrt(s / static_cast<double>(v.size() - 1));
}

}  // namespace

TrialStats run_trials(const GuidanceProblem& problem, const TimeSeries& states, int n_trials,
                      std::uint64_t master_seed, const TrialOptions& options) {
  if (n_trials < 1) throw std::invalid_argument("run_trials: n_trials must be >= 1");
  const SpectralModel& model = problem.model();
  const TimeGrid& grid = problem.grid();
  const FleetModel& fleet = problem.fleet();
  const TimeSeries guidance = TimeSeries::Zero(fleet.input_dim(), grid.nodes());
  const ForwardState fwd = problem.forward_along(guidance, states);
  const Vector intensity = fleet.footprints().noise_vars;
  const Vector sample_var = options.suppress_noise ? Vector::Zero(intensity.size()).eval()
                                                   : Vector(intensity / grid.step);
  PlantNoise noise = PlantNoise::from_model(model);
  if (options.suppress_noise) {
    noise.init_factor.setZero();
    noise.process_factor.setZero();
  }

  std::vector<int> snapshot_nodes;
  for (double t : options.snapshot_times) snapshot_nodes.push_back(nearest_node(grid, t));

  std::vector<Vector> terminal_errors(n_trials);
  std::vector<std::vector<Vector>> snapshot_errors(snapshot_nodes.size(),
                                                   std::vector<Vector>(n_trials));
  parallel_for(n_trials, options.threads, [&](int trial) {
    RngStream rng(master_seed, static_cast<std::uint64_t>(trial));
    const TimeSeries truth = simulate_truth(model, noise, grid, rng);
    std::vector<Measurement> ys;
    ys.reserve(grid.count);
    for (int k = 0; k < grid.count; ++k) {
      ys.push_back(measure(truth.col(k), fwd.sensing.nodes[k], sample_var, rng, grid.time(k)));
    }
    const TimeSeries estimate = run_filter(model, grid, fwd.sensing, intensity, ys, fwd.covariance);
    terminal_errors[trial] = truth.col(grid.count) - estimate.col(grid.count);
    for (std::size_t s = 0; s < snapshot_nodes.size(); ++s) {
      snapshot_errors[s][trial] = truth.col(snapshot_nodes[s]) - estimate.col(snapshot_nodes[s]);
    }
  });

  TrialStats stats;
  stats.n_trials = n_trials;
  for (const Vector& e : terminal_errors) stats.per_trial_errors.push_back(e.norm());
  stats.terminal_error_mean = mean_of(stats.per_trial_errors);
  stats.terminal_error_std = sample_std(stats.per_trial_errors, stats.terminal_error_mean);

  // Unbiased trace of the error covariance; its standard error from the
  // per-trial centered squared norms.
  Vector mean_error = Vector::Zero(model.dim());
  for (const Vector& e : terminal_errors) mean_error += e;
  mean_error /= n_trials;
  std::vector<double> centered_sq;
  for (const Vector& e : terminal_errors) centered_sq.push_back((e - mean_error).squaredNorm());
  if (n_trials > 1) {
    const double scale = static_cast<double>(n_trials) / (n_trials - 1);
    const double sq_mean = mean_of(centered_sq);
    stats.terminal_error_cov_trace = scale * sq_mean;
    stats.terminal_error_cov_trace_se =
        scale * sample_std(centered_sq, sq_mean) / std::sqrt(static_cast<double>(n_trials));
  }

  for (std::size_t s = 0; s < snapshot_nodes.size(); ++s) {
    stats.variance_grid_snapshots.push_back(
        {grid.time(snapshot_nodes[s]), pointwise_variance(snapshot_errors[s], options.grid_points)});
  }
  return stats;
}

TrialStats run_trials_guidance(const GuidanceProblem& problem, const TimeSeries& guidance,
                               int n_trials, std::uint64_t master_seed,
                               const TrialOptions& options) {
  return run_trials(problem, propagate_sensors(problem.fleet(), guidance, problem.grid()), n_trials,
                    master_seed, options);
}

std::string_view study_name(StudyKind kind) {
  switch (kind) {
    case StudyKind::convergence: return "convergence";
    case StudyKind::sweep_R: return "sweep_R";
    case StudyKind::sweep_gamma: return "sweep_gamma";
    case StudyKind::team: return "team";
    case StudyKind::heterogeneous: return "heterogeneous";
  }
  return "unknown";
}

namespace {

StudyEntry summarize(const GuidanceProblem& problem, const GuidanceSolution& sol, double value) {
  StudyEntry e;
  e.value = value;
  e.cost_total = sol.cost_total;
  e.cost_uncertainty = sol.cost_uncertainty;
  e.cost_mobility = sol.cost_mobility;
  e.guidance_energy = guidance_energy(sol.guidance, problem.grid());
  e.path_length = path_length(problem.fleet().positions(sol.states));
  e.iterations = sol.iterations;
  e.converged = sol.converged;
  e.guidance = sol.guidance;
  e.states = sol.states;
  return e;
}

void normalize(StudyResult& result, const StudyEntry& reference) {
  result.reference_total = reference.cost_total;
  result.reference_uncertainty = reference.cost_uncertainty;
  for (StudyEntry& e : result.entries) {
    e.normalized_total = e.cost_total / reference.cost_total;
    e.normalized_uncertainty = e.cost_uncertainty / reference.cost_uncertainty;
  }
}

void require_increasing(const std::vector<double>& axis, bool strict) {
  for (std::size_t i = 1; i < axis.size(); ++i) {
    if (strict ? !(axis[i] > axis[i - 1]) : !(axis[i] >= axis[i - 1])) {
      throw std::invalid_argument("study axis must be increasing");
    }
  }
}

}  // namespace

StudyResult convergence_study(const ScenarioSpec& scenario, const std::vector<int>& orders,
                              int threads) {
  if (orders.empty()) throw std::invalid_argument("convergence_study: no orders");
  StudyResult result;
  result.kind = StudyKind::convergence;
  for (int n : orders) result.axis.push_back(n);
  require_increasing(result.axis, false);
  result.entries.resize(orders.size());
  parallel_for(static_cast<int>(orders.size()), threads, [&](int i) {
    ScenarioSpec s = scenario;
    s.order = orders[i];
    const GuidanceProblem problem = GuidanceProblem::from_scenario(s);
    result.entries[i] = summarize(problem, solve_fbs(problem), orders[i]);
  });
  normalize(result, result.entries.back());
  return result;
}

StudyResult parameter_sweep(const ScenarioSpec& scenario, SweepParameter parameter,
                            const std::vector<double>& values, int n_trials, std::uint64_t seed,
                            int threads) {
  if (values.empty()) throw std::invalid_argument("parameter_sweep: no values");
  for (double v : values) {
    if (!(v > 0.0)) throw std::invalid_argument("parameter_sweep: values must be positive");
  }
  StudyResult result;
  result.kind = parameter == SweepParameter::R ? StudyKind::sweep_R : StudyKind::sweep_gamma;
  result.axis = values;
  require_increasing(result.axis, true);
  result.entries.resize(values.size());
  const auto model =
      std::make_shared<const SpectralModel>(build_spectral_model(scenario.order, scenario.field));
  // Entries run concurrently; trials inside each entry stay sequential.
  parallel_for(static_cast<int>(values.size()), threads, [&](int i) {
    ScenarioSpec s = scenario;
    for (SensorSpec& sensor : s.fleet) {
      if (parameter == SweepParameter::R) {
        sensor.noise_var = values[i];
      } else {
        sensor.guidance_penalty = values[i];
      }
    }
    if (parameter == SweepParameter::gamma) s.mobility.penalty.reset();
    const GuidanceProblem problem = GuidanceProblem::from_scenario(s, model);
    const GuidanceSolution sol = solve_fbs(problem);
    result.entries[i] = summarize(problem, sol, values[i]);
    if (n_trials > 0) {
      result.entries[i].trials = run_trials(problem, sol.states, n_trials, seed);
    }
  });
  normalize(result, result.entries.front());
  return result;
}

std::vector<Vec2> lower_left_starts(int n_sensors) {
  if (n_sensors < 1) throw std::invalid_argument("lower_left_starts: need at least one sensor");
  const int per_row = (n_sensors + 1) / 2;
  std::vector<Vec2> starts;
  for (int s = 0; s < n_sensors; ++s) {
    starts.emplace_back(0.1 + 0.05 * (s % per_row), 0.1 + 0.05 * (s / per_row));
  }
  return starts;
}

ScenarioSpec team_scenario(const ScenarioSpec& base, const HeterogeneousConfig& config,
                           int poor_count) {
  if (poor_count < 0 || poor_count > config.n_sensors) {
    throw std::invalid_argument("team_scenario: poor sensor count out of range");
  }
  ScenarioSpec s = base;
  s.field.kernel_scale = config.kernel_scale;
  s.field.uncertainty_peak = config.peak;
  s.mobility.penalty.reset();
  s.mobility.terminal_target.resize(0);
  s.fleet.clear();
  const double radius = base.fleet.empty() ? 0.05 : base.fleet.front().footprint_radius;
  const std::vector<Vec2> starts = lower_left_starts(config.n_sensors);
  for (int i = 0; i < config.n_sensors; ++i) {
    const SensorGrade& g = i < poor_count ? config.poor : config.superior;
    s.fleet.push_back(SensorSpec::single_integrator(starts[i], radius, g.noise_var, g.penalty));
  }
  return s;
}

StudyResult heterogeneous_study(const ScenarioSpec& base, const HeterogeneousConfig& config,
                                int threads) {
  if (config.mp_min < 0 || config.mp_max > config.n_sensors || config.mp_min > config.mp_max) {
    throw std::invalid_argument("heterogeneous_study: m_p range outside 0..n_sensors");
  }
  StudyResult result;
  result.kind = StudyKind::heterogeneous;
  const ScenarioSpec probe = team_scenario(base, config, 0);
  const auto model =
      std::make_shared<const SpectralModel>(build_spectral_model(probe.order, probe.field));
  std::vector<int> counts;
  if (config.mp_min > 0) counts.push_back(0);  // normalization reference
  for (int mp = config.mp_min; mp <= config.mp_max; ++mp) counts.push_back(mp);
  std::vector<StudyEntry> entries(counts.size());
  parallel_for(static_cast<int>(counts.size()), threads, [&](int i) {
    const GuidanceProblem problem =
        GuidanceProblem::from_scenario(team_scenario(base, config, counts[i]), model);
    entries[i] = summarize(problem, solve_fbs(problem), counts[i]);
  });
  const StudyEntry reference = entries.front();
  if (config.mp_min > 0) entries.erase(entries.begin());
  result.entries = std::move(entries);
  for (const StudyEntry& e : result.entries) result.axis.push_back(e.value);
  normalize(result, reference);
  return result;
}

}  // namespace mobsense
