#pragma once

#include <cmath>
#include <numbers>
#include <string>
#include <string_view>

#include "mobsense/fleet.hpp"
#include "mobsense/riccati.hpp"
#include "mobsense/spectral.hpp"

namespace mobsense {

enum class PolicyId { optimal, naive1, naive2, naive3, null };

std::string_view policy_name(PolicyId id);
/// Throws std::invalid_argument for unknown names.
PolicyId parse_policy(std::string_view name);

/// Center and radius of the clockwise loop flown by naive3.
inline const Vec2 kLoopCenter{0.5, 0.5};
inline const double kLoopRadius = 1.0 / std::sqrt(5.0);
inline constexpr double kLoopAngularSpeed = std::numbers::pi;

/// Velocity command of a fixed policy at time t for every sensor, drift
/// compensated: p = desired velocity - flow for sensors that drift.
///  - naive1: constant speed to (1,1) - start, arriving at t_f
///  - naive2: constant speed to the uncertainty peak, arriving at t_f, then hold
///  - naive3: clockwise loop about (0.5,0.5), radius 1/sqrt5, pi rad/s, phase from the start point
///  - null:   hold position
/// Requires single-integrator sensors; `optimal` is rejected.
Vector baseline_guidance(PolicyId policy, double t, const FleetModel& fleet, const FieldSpec& field,
                         const TimeGrid& grid);

/// The policy sampled on every grid node (m x (K+1)).
TimeSeries baseline_guidance_grid(PolicyId policy, const FleetModel& fleet, const FieldSpec& field,
                                  const TimeGrid& grid);

/// Sensor states under the policy, with the command evaluated at RK4 stage times.
TimeSeries baseline_states(PolicyId policy, const FleetModel& fleet, const FieldSpec& field,
                           const TimeGrid& grid);

}  // namespace mobsense
