#pragma once

#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "mobsense/riccati.hpp"
#include "mobsense/types.hpp"

namespace mobsense {

/// Linear platform dynamics of one sensor. The first two state components are
/// the sensor location.
struct SensorSpec {
  Matrix alpha;
  Matrix beta;
  bool drift_in_flow = true;
  Vector init_state;
  double footprint_radius = 0.05;
  double noise_var = 0.2;
  double guidance_penalty = 0.5;

  static SensorSpec single_integrator(const Vec2& start, double radius = 0.05,
                                      double noise_var = 0.2, double penalty = 0.5);

  int state_dim() const { return static_cast<int>(alpha.rows()); }
  int input_dim() const { return static_cast<int>(beta.cols()); }
  bool controllable() const;
  void validate() const;
};

/// Concatenated dynamics zeta' = alpha zeta + beta p + drift of all sensors.
struct FleetModel {
  std::vector<SensorSpec> sensors;
  Matrix alpha;
  Matrix beta;
  Matrix locator;  // M: stacked 2D positions = M zeta
  Vector drift;
  Vector init_state;
  std::vector<int> state_offsets;
  std::vector<int> input_offsets;

  int size() const { return static_cast<int>(sensors.size()); }
  int state_dim() const { return static_cast<int>(alpha.rows()); }
  int input_dim() const { return static_cast<int>(beta.cols()); }
  SensorFootprints footprints() const;
  /// Diagonal guidance penalty assembled from the per-sensor gamma_i.
  Matrix penalty() const;
  TimeSeries positions(const TimeSeries& states) const { return locator * states; }
};

FleetModel assemble_fleet(std::span<const SensorSpec> sensors, const Vec2& flow);

/// RK4 on zeta' = alpha zeta + beta p + drift; p linearly interpolated between nodes.
TimeSeries propagate_sensors(const FleetModel& fleet, const TimeSeries& guidance,
                             const TimeGrid& grid);

/// RK4 with the guidance evaluated exactly at stage times.
TimeSeries propagate_sensors(const FleetModel& fleet, const std::function<Vector(double)>& guidance,
                             const TimeGrid& grid);

struct HazardBump {
  double amplitude = 0.0;
  Vec2 center = Vec2::Zero();
  double width = 0.1;
};

/// Mobility cost: integral of h(zeta) + p^T gamma p / 2 plus
/// terminal_weight * |M zeta(t_f) - target|^2.
/// h sums amplitude * exp(-|x - center|^2 / (2 width^2)) over bumps and sensor positions.
struct MobilitySpec {
  std::optional<Matrix> penalty;  // overrides the per-sensor diagonal when set
  std::vector<HazardBump> hazards;
  Vector terminal_target;         // empty: no terminal term
  double terminal_weight = 0.0;

  Matrix penalty_matrix(const FleetModel& fleet) const;
  void validate(const FleetModel& fleet) const;
};

double hazard_value(const MobilitySpec& spec, const Vector& positions);
Vector hazard_gradient(const MobilitySpec& spec, const Vector& positions);

double mobility_cost(const TimeSeries& states, const TimeSeries& guidance, const MobilitySpec& spec,
                     const FleetModel& fleet, const TimeGrid& grid);

}  // namespace mobsense
