#include "mobsense/riccati.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace mobsense {

TimeGrid TimeGrid::make(double horizon, double step) {
  TimeGrid grid;
  grid.horizon = horizon;
  grid.step = step;
  grid.count = (step > 0.0 && horizon > 0.0) ? static_cast<int>(std::lround(horizon / step)) : 0;
  grid.validate();
  return grid;
}

void TimeGrid::validate() const {
  if (!(horizon > 0.0)) throw std::invalid_argument("grid.horizon must be > 0");
  if (!(step > 0.0)) throw std::invalid_argument("grid.step must be > 0");
  if (count < 1 || std::abs(count * step - horizon) > 1e-12 * std::max(1.0, horizon)) {
    throw std::invalid_argument("grid.step must divide grid.horizon");
  }
}

SensingSchedule make_sensing_schedule(int order, const TimeSeries& positions,
                                      const SensorFootprints& footprints) {
  if (positions.rows() != 2 * footprints.size()) {
    throw std::invalid_argument("positions must have 2 rows per sensor");
  }
  // Captures by value: the schedule outlives the caller's arguments.
  auto outputs_at = [order, radii = footprints.radii](const Vector& stacked) {
    const int sensors = static_cast<int>(radii.size());
    Matrix c(order * order, sensors);
    for (int s = 0; s < sensors; ++s) {
      c.col(s) = output_vector(stacked.segment<2>(2 * s), radii[s], order);
    }
    return c;
  };
  SensingSchedule schedule;
  schedule.inv_noise = footprints.noise_vars.cwiseInverse();
  const int nodes = static_cast<int>(positions.cols());
  schedule.nodes.reserve(nodes);
  for (int k = 0; k < nodes; ++k) schedule.nodes.push_back(outputs_at(positions.col(k)));
  for (int k = 0; k + 1 < nodes; ++k) {
    schedule.midpoints.push_back(outputs_at(0.5 * (positions.col(k) + positions.col(k + 1))));
  }
  schedule.between = [positions, outputs_at](int k, double tau) {
    return outputs_at(interpolate_positions(positions, k, tau));
  };
  return schedule;
}

Vector interpolate_positions(const TimeSeries& positions, int k, double tau) {
  return (1.0 - tau) * positions.col(k) + tau * positions.col(k + 1);
}

int riccati_substeps(const Matrix& cov, const Matrix& c0, const Matrix& c1, const Vector& inv_noise,
                     double h) {
  constexpr double kMaxRateStep = 0.2;
  constexpr int kMaxSubsteps = 4096;
  double rate = 0.0;
  for (Eigen::Index i = 0; i < inv_noise.size(); ++i) {
    const double v0 = c0.col(i).dot(cov * c0.col(i));
    const double v1 = c1.col(i).dot(cov * c1.col(i));
    rate += 2.0 * inv_noise(i) * std::max(v0, v1);
  }
  const double needed = std::ceil(rate * h / kMaxRateStep);
  if (!(needed > 1.0)) return 1;
  return needed >= kMaxSubsteps ? kMaxSubsteps : static_cast<int>(needed);
}

Matrix riccati_rhs(const Matrix& cov, const Matrix& generator, const Matrix& process_cov,
                   const Matrix& output_vectors, const Vector& noise_vars) {
  const auto n = cov.rows();
  if (cov.cols() != n || generator.rows() != n || generator.cols() != n ||
      process_cov.rows() != n || process_cov.cols() != n ||
      (output_vectors.cols() > 0 && output_vectors.rows() != n) ||
      noise_vars.size() != output_vectors.cols()) {
    throw std::invalid_argument("riccati_rhs: dimension mismatch");
  }
  if ((noise_vars.array() <= 0.0).any()) {
    throw std::invalid_argument("riccati_rhs: noise variances must be > 0");
  }
  return riccati_rhs<Matrix>(cov, generator, process_cov, output_vectors,
                             Vector(noise_vars.cwiseInverse()));
}

Vector CovarianceTrajectory::traces() const {
  Vector t(matrices.size());
  for (std::size_t k = 0; k < matrices.size(); ++k) t(k) = matrices[k].trace();
  return t;
}

namespace {

template <typename GeneratorType>
CovarianceTrajectory propagate_rk4(const GeneratorType& generator, const Matrix& process_cov,
                                   const Matrix& initial, const SensingSchedule& sensing,
                                   const TimeGrid& grid) {
  if (static_cast<int>(sensing.nodes.size()) != grid.nodes() ||
      static_cast<int>(sensing.midpoints.size()) != grid.count) {
    throw std::invalid_argument("propagate_covariance: sensing schedule does not match grid");
  }
  const double h = grid.step;
  CovarianceTrajectory out;
  out.grid = grid;
  out.matrices.reserve(grid.nodes());
  out.matrices.push_back(0.5 * (initial + initial.transpose()));
  const Vector& rinv = sensing.inv_noise;
  out.substeps.assign(grid.count, 1);
  for (int k = 0; k < grid.count; ++k) {
    const Matrix& p = out.matrices.back();
    const int m = sensing.between
                      ? riccati_substeps(p, sensing.nodes[k], sensing.nodes[k + 1], rinv, h)
                      : 1;
    Matrix next;
    if (m == 1) {
      next = riccati_rk4_step(p, generator, process_cov, sensing.nodes[k], sensing.midpoints[k],
                              sensing.nodes[k + 1], rinv, h);
    } else {
      out.substeps[k] = m;
      next = p;
      Matrix c0 = sensing.nodes[k];
      for (int j = 0; j < m; ++j) {
        const Matrix cm = sensing.between(k, (j + 0.5) / m);
        Matrix c1 = j + 1 == m ? sensing.nodes[k + 1] : sensing.between(k, double(j + 1) / m);
        next = riccati_rk4_step(next, generator, process_cov, c0, cm, c1, rinv, h / m);
        c0 = std::move(c1);
      }
    }
    if (!next.allFinite()) {
      throw std::runtime_error("propagate_covariance: non-finite covariance at step " +
                               std::to_string(k + 1));
    }
    out.matrices.push_back(std::move(next));
  }
  return out;
}

}  // namespace

CovarianceTrajectory propagate_covariance(const SparseMatrix& generator, const Matrix& process_cov,
                                          const Matrix& initial, const SensingSchedule& sensing,
                                          const TimeGrid& grid) {
  return propagate_rk4(generator, process_cov, initial, sensing, grid);
}

CovarianceTrajectory propagate_covariance(const KroneckerGenerator& generator,
                                          const Matrix& process_cov, const Matrix& initial,
                                          const SensingSchedule& sensing, const TimeGrid& grid) {
  return propagate_rk4(generator, process_cov, initial, sensing, grid);
}

CovarianceTrajectory propagate_covariance(const SpectralModel& model, const SensingSchedule& sensing,
                                          const TimeGrid& grid) {
  if (model.generator_kron) {
    return propagate_rk4(*model.generator_kron, model.process_cov, model.init_cov, sensing, grid);
  }
  return propagate_rk4(model.generator_sparse, model.process_cov, model.init_cov, sensing, grid);
}

CovarianceTrajectory propagate_covariance(const SpectralModel& model, const TimeSeries& positions,
                                          const SensorFootprints& footprints, const TimeGrid& grid) {
  const SensingSchedule sensing = make_sensing_schedule(model.order, positions, footprints);
  return propagate_covariance(model, sensing, grid);
}

double uncertainty_cost(const CovarianceTrajectory& trajectory) {
  double total = 0.0;
  const auto n = static_cast<int>(trajectory.matrices.size());
  for (int k = 0; k < n; ++k) {
    const double w = (k == 0 || k == n - 1) ? 0.5 * trajectory.grid.step : trajectory.grid.step;
    total += w * trajectory.matrices[k].trace();
  }
  return total;
}

double scalar_riccati_closed_form(double a_coef, double q, double s, double p0, double t) {
  if (s < 0.0) throw std::invalid_argument("scalar_riccati_closed_form: s must be >= 0");
  if (s == 0.0) {
    if (a_coef == 0.0) return p0 + q * t;
    const double shift = q / (2.0 * a_coef);
    return (p0 + shift) * std::exp(2.0 * a_coef * t) - shift;
  }
  // p' = -s (p - a/s)^2 + disc / s with disc = a^2 + s q.
  const double center = a_coef / s;
  const double u0 = p0 - center;
  const double disc = a_coef * a_coef + s * q;
  if (disc > 0.0) {
    const double root = std::sqrt(disc);
    const double equilibrium = root / s;  // u' = -s (u - e)(u + e)
    if (u0 == -equilibrium) return center + u0;
    const double decay = std::exp(-2.0 * root * t);
    const double ratio = (u0 - equilibrium) / (u0 + equilibrium);
    return center + equilibrium * (1.0 + ratio * decay) / (1.0 - ratio * decay);
  }
  if (disc == 0.0) return center + u0 / (1.0 + s * u0 * t);
  const double omega = std::sqrt(-disc);
  return center + (omega / s) * std::tan(std::atan(s * u0 / omega) - omega * t);
}

}  // namespace mobsense
