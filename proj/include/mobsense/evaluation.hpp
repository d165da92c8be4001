#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "mobsense/baselines.hpp"
#include "mobsense/guidance.hpp"

namespace mobsense {

/// Runs body(i) for i in [0, count) on up to `threads` workers. Each index is
/// executed exactly once; callers write results into slot i.
void parallel_for(int count, int threads, const std::function<void(int)>& body);

struct TrialOptions {
  int threads = 1;
  int grid_points = 144;
  std::vector<double> snapshot_times;
  /// Zeroes every noise source (initial, process, measurement).
  bool suppress_noise = false;
};

struct VarianceSnapshot {
  double time = 0.0;
  Matrix variance;  // G x G, entry (a, b) at (x_a, y_b)
};

struct TrialStats {
  PolicyId policy = PolicyId::optimal;
  int n_trials = 0;
  double terminal_error_mean = 0.0;
  double terminal_error_std = 0.0;
  std::vector<double> per_trial_errors;
  std::vector<VarianceSnapshot> variance_grid_snapshots;
  /// Sample covariance trace of the terminal error and its standard error.
  double terminal_error_cov_trace = 0.0;
  double terminal_error_cov_trace_se = 0.0;
};

/// Monte Carlo evaluation of a sensor trajectory: truth by Euler-Maruyama,
/// sampled measurements with variance R/dt, Kalman-Bucy estimate, terminal
/// error |Z(t_f) - Zhat(t_f)|_2. Trial i draws from stream (master_seed, i).
TrialStats run_trials(const GuidanceProblem& problem, const TimeSeries& states, int n_trials,
                      std::uint64_t master_seed, const TrialOptions& options = {});

/// Guidance-grid form: states are propagated with linear interpolation.
TrialStats run_trials_guidance(const GuidanceProblem& problem, const TimeSeries& guidance,
                               int n_trials, std::uint64_t master_seed,
                               const TrialOptions& options = {});

enum class StudyKind { convergence, sweep_R, sweep_gamma, team, heterogeneous };

std::string_view study_name(StudyKind kind);

struct StudyEntry {
  double value = 0.0;
  double cost_total = 0.0;
  double cost_uncertainty = 0.0;
  double cost_mobility = 0.0;
  double normalized_total = 1.0;
  double normalized_uncertainty = 1.0;
  double guidance_energy = 0.0;
  double path_length = 0.0;
  int iterations = 0;
  bool converged = false;
  std::optional<TrialStats> trials;
  TimeSeries guidance;
  TimeSeries states;
};

struct StudyResult {
  StudyKind kind = StudyKind::convergence;
  std::vector<double> axis;
  std::vector<StudyEntry> entries;
  double reference_total = 1.0;
  double reference_uncertainty = 1.0;
};

/// Solves the problem at every order; normalizes by the last (largest) order.
StudyResult convergence_study(const ScenarioSpec& scenario, const std::vector<int>& orders,
                              int threads = 1);

enum class SweepParameter { R, gamma };

/// Sets every sensor's noise variance (R) or guidance penalty (gamma) to each
/// value, solves, and Monte Carlo-evaluates with `n_trials` (0 skips evaluation).
StudyResult parameter_sweep(const ScenarioSpec& scenario, SweepParameter parameter,
                            const std::vector<double>& values, int n_trials = 0,
                            std::uint64_t seed = 0, int threads = 1);

struct SensorGrade {
  double noise_var = 0.2;
  double penalty = 0.5;
};

struct HeterogeneousConfig {
  int n_sensors = 8;
  int mp_min = 0;
  int mp_max = 8;
  SensorGrade poor{1.0, 2.5};
  SensorGrade superior{0.2, 0.5};
  double kernel_scale = 8.0;
  Vec2 peak{0.5, 0.5};
};

/// Lower-left start lattice: two rows of ceil(n/2) points spaced 0.05 from (0.1, 0.1).
std::vector<Vec2> lower_left_starts(int n_sensors);

/// Team with the first `poor_count` sensors poor, the rest superior.
ScenarioSpec team_scenario(const ScenarioSpec& base, const HeterogeneousConfig& config,
                           int poor_count);

/// Costs for m_p = mp_min..mp_max poor sensors, normalized by the all-superior team.
StudyResult heterogeneous_study(const ScenarioSpec& base, const HeterogeneousConfig& config,
                                int threads = 1);

}  // namespace mobsense
