#include "mobsense/fleet.hpp"

#include <Eigen/Cholesky>
#include <Eigen/LU>
#include <cmath>
#include <stdexcept>
#include <string>

namespace mobsense {

SensorSpec SensorSpec::single_integrator(const Vec2& start, double radius, double noise_var,
                                         double penalty) {
  SensorSpec s;
  s.alpha = Matrix::Zero(2, 2);
  s.beta = Matrix::Identity(2, 2);
  s.init_state = start;
  s.footprint_radius = radius;
  s.noise_var = noise_var;
  s.guidance_penalty = penalty;
  return s;
}

bool SensorSpec::controllable() const {
  const int n = state_dim();
  const int m = input_dim();
  Matrix ctrb(n, n * m);
  Matrix block = beta;
  for (int k = 0; k < n; ++k) {
    ctrb.middleCols(k * m, m) = block;
    block = alpha * block;
  }
  return Eigen::FullPivLU<Matrix>(ctrb).rank() == n;
}

void SensorSpec::validate() const {
  if (alpha.rows() < 2 || alpha.rows() != alpha.cols()) {
    throw std::invalid_argument("sensor alpha must be square with at least 2 states");
  }
  if (beta.rows() != alpha.rows() || beta.cols() < 1) {
    throw std::invalid_argument("sensor beta must have one row per state");
  }
  if (init_state.size() != alpha.rows()) {
    throw std::invalid_argument("sensor init_state has wrong dimension");
  }
  if (!(footprint_radius > 0.0)) throw std::invalid_argument("sensor radius must be > 0");
  if (!(noise_var > 0.0)) throw std::invalid_argument("sensor noise_var must be > 0");
  if (!(guidance_penalty > 0.0)) throw std::invalid_argument("sensor gamma must be > 0");
  if (!controllable()) throw std::invalid_argument("sensor dynamics are not controllable");
}

SensorFootprints FleetModel::footprints() const {
  SensorFootprints f;
  f.noise_vars.resize(size());
  for (int s = 0; s < size(); ++s) {
    f.radii.push_back(sensors[s].footprint_radius);
    f.noise_vars(s) = sensors[s].noise_var;
  }
  return f;
}

Matrix FleetModel::penalty() const {
  Vector diag(input_dim());
  for (int s = 0; s < size(); ++s) {
    diag.segment(input_offsets[s], sensors[s].input_dim()).setConstant(sensors[s].guidance_penalty);
  }
  return diag.asDiagonal();
}

FleetModel assemble_fleet(std::span<const SensorSpec> sensors, const Vec2& flow) {
  if (sensors.empty()) throw std::invalid_argument("fleet must contain at least one sensor");
  int n = 0;
  int m = 0;
  FleetModel fleet;
  for (const SensorSpec& s : sensors) {
    s.validate();
    fleet.state_offsets.push_back(n);
    fleet.input_offsets.push_back(m);
    n += s.state_dim();
    m += s.input_dim();
  }
  const int count = static_cast<int>(sensors.size());
  fleet.sensors.assign(sensors.begin(), sensors.end());
  fleet.alpha = Matrix::Zero(n, n);
  fleet.beta = Matrix::Zero(n, m);
  fleet.locator = Matrix::Zero(2 * count, n);
  fleet.drift = Vector::Zero(n);
  fleet.init_state.resize(n);
  for (int s = 0; s < count; ++s) {
    const SensorSpec& spec = sensors[s];
    const int so = fleet.state_offsets[s];
    const int io = fleet.input_offsets[s];
    fleet.alpha.block(so, so, spec.state_dim(), spec.state_dim()) = spec.alpha;
    fleet.beta.block(so, io, spec.state_dim(), spec.input_dim()) = spec.beta;
    fleet.locator.block(2 * s, so, 2, 2).setIdentity();
    fleet.init_state.segment(so, spec.state_dim()) = spec.init_state;
    if (spec.drift_in_flow) fleet.drift.segment<2>(so) = flow;
  }
  return fleet;
}

namespace {

template <typename GuidanceAt>
TimeSeries rk4_sensors(const FleetModel& fleet, const TimeGrid& grid, GuidanceAt&& guidance_at) {
  const double h = grid.step;
  TimeSeries z(fleet.state_dim(), grid.nodes());
  z.col(0) = fleet.init_state;
  auto rate = [&](const Vector& state, const Vector& p) -> Vector {
    return fleet.alpha * state + fleet.beta * p + fleet.drift;
  };
  for (int k = 0; k < grid.count; ++k) {
    const Vector p0 = guidance_at(k, 0.0);
    const Vector pm = guidance_at(k, 0.5);
    const Vector p1 = guidance_at(k, 1.0);
    const Vector x = z.col(k);
    const Vector k1 = rate(x, p0);
    const Vector k2 = rate(x + 0.5 * h * k1, pm);
    const Vector k3 = rate(x + 0.5 * h * k2, pm);
    const Vector k4 = rate(x + h * k3, p1);
    z.col(k + 1) = x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    if (!z.col(k + 1).allFinite()) {
      throw std::runtime_error("propagate_sensors: non-finite state at step " +
                               std::to_string(k + 1));
    }
  }
  return z;
}

}  // namespace

TimeSeries propagate_sensors(const FleetModel& fleet, const TimeSeries& guidance,
                             const TimeGrid& grid) {
  if (guidance.rows() != fleet.input_dim() || guidance.cols() != grid.nodes()) {
    throw std::invalid_argument("propagate_sensors: guidance grid has wrong shape");
  }
  return rk4_sensors(fleet, grid, [&](int k, double frac) -> Vector {
    if (frac == 0.0) return guidance.col(k);
    if (frac == 1.0) return guidance.col(k + 1);
    return (1.0 - frac) * guidance.col(k) + frac * guidance.col(k + 1);
  });
}

TimeSeries propagate_sensors(const FleetModel& fleet, const std::function<Vector(double)>& guidance,
                             const TimeGrid& grid) {
  return rk4_sensors(fleet, grid, [&](int k, double frac) -> Vector {
    return guidance(grid.time(k) + frac * grid.step);
  });
}

Matrix MobilitySpec::penalty_matrix(const FleetModel& fleet) const {
  return penalty ? *penalty : fleet.penalty();
}

void MobilitySpec::validate(const FleetModel& fleet) const {
  const Matrix gamma = penalty_matrix(fleet);
  if (gamma.rows() != fleet.input_dim() || gamma.cols() != fleet.input_dim()) {
    throw std::invalid_argument("mobility penalty has wrong dimension");
  }
  if ((gamma - gamma.transpose()).cwiseAbs().maxCoeff() > 1e-12 * gamma.cwiseAbs().maxCoeff()) {
    throw std::invalid_argument("mobility penalty must be symmetric");
  }
  if (Eigen::LLT<Matrix>(gamma).info() != Eigen::Success) {
    throw std::invalid_argument("mobility penalty must be positive definite");
  }
  for (const HazardBump& b : hazards) {
    if (!(b.amplitude >= 0.0)) throw std::invalid_argument("hazard amplitude must be >= 0");
    if (!(b.width > 0.0)) throw std::invalid_argument("hazard width must be > 0");
  }
  if (!(terminal_weight >= 0.0)) throw std::invalid_argument("terminal weight must be >= 0");
  if (terminal_target.size() != 0 && terminal_target.size() != 2 * fleet.size()) {
    throw std::invalid_argument("terminal target must have 2 entries per sensor");
  }
}

double hazard_value(const MobilitySpec& spec, const Vector& positions) {
  double h = 0.0;
  for (Eigen::Index s = 0; s + 1 < positions.size(); s += 2) {
    const Vec2 x = positions.segment<2>(s);
    for (const HazardBump& b : spec.hazards) {
      h += b.amplitude * std::exp(-(x - b.center).squaredNorm() / (2.0 * b.width * b.width));
    }
  }
  return h;
}

Vector hazard_gradient(const MobilitySpec& spec, const Vector& positions) {
  Vector g = Vector::Zero(positions.size());
  for (Eigen::Index s = 0; s + 1 < positions.size(); s += 2) {
    const Vec2 x = positions.segment<2>(s);
    for (const HazardBump& b : spec.hazards) {
      const double w2 = b.width * b.width;
      const double v = b.amplitude * std::exp(-(x - b.center).squaredNorm() / (2.0 * w2));
      g.segment<2>(s) -= (v / w2) * (x - b.center);
    }
  }
  return g;
}

double mobility_cost(const TimeSeries& states, const TimeSeries& guidance, const MobilitySpec& spec,
                     const FleetModel& fleet, const TimeGrid& grid) {
  if (states.cols() != grid.nodes() || guidance.cols() != grid.nodes()) {
    throw std::invalid_argument("mobility_cost: grids not aligned");
  }
  const Matrix gamma = spec.penalty_matrix(fleet);
  double total = 0.0;
  for (int k = 0; k < grid.nodes(); ++k) {
    const Vector p = guidance.col(k);
    double running = 0.5 * p.dot(gamma * p);
    if (!spec.hazards.empty()) running += hazard_value(spec, fleet.locator * states.col(k));
    total += grid.weight(k) * running;
  }
  if (spec.terminal_target.size() > 0 && spec.terminal_weight > 0.0) {
    total += spec.terminal_weight *
             (fleet.locator * states.col(grid.count) - spec.terminal_target).squaredNorm();
  }
  return total;
}

}  // namespace mobsense
