#include "mobsense/baselines.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace mobsense {

namespace {

bool is_single_integrator(const SensorSpec& s) {
  return s.state_dim() == 2 && s.input_dim() == 2 && s.alpha.isZero(0.0) &&
         s.beta.isIdentity(0.0);
}

Vec2 desired_velocity(PolicyId policy, double t, const Vec2& start, const FieldSpec& field,
                      const TimeGrid& grid) {
  switch (policy) {
    case PolicyId::naive1:
      return (Vec2(1.0, 1.0) - start - start) / grid.horizon;
    case PolicyId::naive2:
      if (t > grid.horizon) return Vec2::Zero();
      return (field.uncertainty_peak - start) / grid.horizon;
    case PolicyId::naive3: {
      const Vec2 r = start - kLoopCenter;
      const double phase = std::atan2(r.y(), r.x()) - kLoopAngularSpeed * t;
      return kLoopRadius * kLoopAngularSpeed * Vec2(std::sin(phase), -std::cos(phase));
    }
    case PolicyId::null:
      return Vec2::Zero();
    case PolicyId::optimal:
      break;
  }
  throw std::invalid_argument("baseline_guidance: the optimal policy comes from the solver");
}

}  // namespace

std::string_view policy_name(PolicyId id) {
  switch (id) {
    case PolicyId::optimal: return "optimal";
    case PolicyId::naive1: return "naive1";
    case PolicyId::naive2: return "naive2";
    case PolicyId::naive3: return "naive3";
    case PolicyId::null: return "null";
  }
  return "unknown";
}

PolicyId parse_policy(std::string_view name) {
  for (PolicyId id : {PolicyId::optimal, PolicyId::naive1, PolicyId::naive2, PolicyId::naive3,
                      PolicyId::null}) {
    if (policy_name(id) == name) return id;
  }
  throw std::invalid_argument("unknown policy '" + std::string(name) + "'");
}

Vector baseline_guidance(PolicyId policy, double t, const FleetModel& fleet, const FieldSpec& field,
                         const TimeGrid& grid) {
  Vector p(fleet.input_dim());
  for (int s = 0; s < fleet.size(); ++s) {
    const SensorSpec& spec = fleet.sensors[s];
    if (!is_single_integrator(spec)) {
      throw std::invalid_argument("baseline policies require single-integrator sensors");
    }
    const Vec2 start = spec.init_state.head<2>();
    const Vec2 drift = fleet.drift.segment<2>(fleet.state_offsets[s]);
    p.segment<2>(fleet.input_offsets[s]) = desired_velocity(policy, t, start, field, grid) - drift;
  }
  return p;
}

TimeSeries baseline_guidance_grid(PolicyId policy, const FleetModel& fleet, const FieldSpec& field,
                                  const TimeGrid& grid) {
  TimeSeries p(fleet.input_dim(), grid.nodes());
  for (int k = 0; k < grid.nodes(); ++k) p.col(k) = baseline_guidance(policy, grid.time(k), fleet, field, grid);
  return p;
}

TimeSeries baseline_states(PolicyId policy, const FleetModel& fleet, const FieldSpec& field,
                           const TimeGrid& grid) {
  return propagate_sensors(
      fleet, [&](double t) { return baseline_guidance(policy, t, fleet, field, grid); }, grid);
}

}  // namespace mobsense
