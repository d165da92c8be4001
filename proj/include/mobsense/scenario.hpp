#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "mobsense/fleet.hpp"
#include "mobsense/riccati.hpp"
#include "mobsense/spectral.hpp"

namespace mobsense {

/// fixed: omega is halved on every cost increase and stays halved.
/// barzilai_borwein: omega is re-estimated each iteration from the last two
/// residuals (clamped to [1e-3, 1]) and halved only within the iteration.
enum class Relaxation { fixed, barzilai_borwein };

struct SolverSettings {
  double omega = 0.5;
  Relaxation relaxation = Relaxation::barzilai_borwein;
  double tol = 1e-6;
  int max_iter = 200;
  /// Multiplies the integrated covariance trace; 0 leaves a pure mobility problem.
  double uncertainty_weight = 1.0;
};

/// Admissibility bounds on |p| and |dp/dt|; reported against, never enforced.
struct GuidanceClamps {
  std::optional<double> p_max;
  std::optional<double> a_max;
};

struct ScenarioSpec {
  FieldSpec field;
  std::vector<SensorSpec> fleet;
  MobilitySpec mobility;
  TimeGrid grid;
  int order = 12;
  SolverSettings solver;
  GuidanceClamps clamps;
  std::uint64_t seed = 0;

  void validate() const;
};

/// The single-sensor reference scenario: start (0.3, 0.1), r = 0.05,
/// R = 0.2, gamma = 0.5, flow (0.1, -0.1), x0 = (0.75, 0.25), t_f = 2, dt = 0.01, N = 12.
ScenarioSpec reference_scenario();

/// Error raised for malformed or invalid configuration files. `key` names the
/// offending setting (e.g. "grid.step"); `line` is 0 when unknown.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(const std::string& key, int line, const std::string& message);
  const std::string& key() const { return key_; }
  int line() const { return line_; }

 private:
  std::string key_;
  int line_;
};

constexpr int kScenarioSchemaVersion = 1;

ScenarioSpec parse_scenario(const std::string& text);
ScenarioSpec load_scenario(const std::filesystem::path& path);
std::string serialize_scenario(const ScenarioSpec& spec);
void save_scenario(const ScenarioSpec& spec, const std::filesystem::path& path);

}  // namespace mobsense
