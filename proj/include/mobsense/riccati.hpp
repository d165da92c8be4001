#pragma once

#include <functional>
#include <vector>

#include "mobsense/spectral.hpp"
#include "mobsense/types.hpp"

namespace mobsense {

/// Uniform grid t_k = k * step, k = 0..count, with count * step == horizon.
struct TimeGrid {
  double horizon = 2.0;
  double step = 0.01;
  int count = 200;

  /// Throws std::invalid_argument naming "grid.step" if step does not divide horizon.
  static TimeGrid make(double horizon, double step);

  double time(int k) const { return k * step; }
  int nodes() const { return count + 1; }
  /// Trapezoidal quadrature weight of node k.
  double weight(int k) const { return (k == 0 || k == count) ? 0.5 * step : step; }
  void validate() const;
};

/// Output vectors (columns) and inverse noise variances of the active sensors,
/// evaluated at every node and every step midpoint of a grid.
struct SensingSchedule {
  std::vector<Matrix> nodes;      // K+1 entries, each N^2 x m_s
  std::vector<Matrix> midpoints;  // K entries
  Vector inv_noise;               // m_s
  /// Output vectors at fraction tau of interval k. When set, stiff intervals
  /// are split into substeps; otherwise every interval is a single RK4 step.
  std::function<Matrix(int, double)> between;
};

/// Footprint radii and noise variances, one per sensor.
struct SensorFootprints {
  std::vector<double> radii;
  Vector noise_vars;

  int size() const { return static_cast<int>(radii.size()); }
};

/// Stacked sensor positions (2 m_s rows) at every node -> sensing schedule.
/// Midpoint positions are the linear interpolation of neighbouring nodes.
SensingSchedule make_sensing_schedule(int order, const TimeSeries& positions,
                                      const SensorFootprints& footprints);

/// (1 - tau) x_k + tau x_{k+1}.
Vector interpolate_positions(const TimeSeries& positions, int k, double tau);

/// A Pi + Pi A^T + Q - Pi (sum_i c_i c_i^T / sigma_i^2) Pi, symmetrized.
/// `generator` may be dense or sparse.
template <typename GeneratorType>
Matrix riccati_rhs(const Matrix& cov, const GeneratorType& generator, const Matrix& process_cov,
                   const Matrix& output_vectors, const Vector& inv_noise) {
  Matrix out = generator * cov;
  out += out.transpose().eval();
  out += process_cov;
  if (output_vectors.cols() > 0) {
    const Matrix pc = cov * output_vectors;
    out.noalias() -= pc * inv_noise.asDiagonal() * pc.transpose();
  }
  return 0.5 * (out + out.transpose());
}

/// Checked entry point with per-sensor noise variances.
Matrix riccati_rhs(const Matrix& cov, const Matrix& generator, const Matrix& process_cov,
                   const Matrix& output_vectors, const Vector& noise_vars);

/// One classical RK4 step of length h with outputs c0, cm, c1 at the start,
/// middle and end, followed by symmetrization.
template <typename GeneratorType>
Matrix riccati_rk4_step(const Matrix& p, const GeneratorType& generator, const Matrix& process_cov,
                        const Matrix& c0, const Matrix& cm, const Matrix& c1,
                        const Vector& inv_noise, double h) {
  const Matrix k1 = riccati_rhs(p, generator, process_cov, c0, inv_noise);
  const Matrix k2 = riccati_rhs(Matrix(p + 0.5 * h * k1), generator, process_cov, cm, inv_noise);
  const Matrix k3 = riccati_rhs(Matrix(p + 0.5 * h * k2), generator, process_cov, cm, inv_noise);
  const Matrix k4 = riccati_rhs(Matrix(p + h * k3), generator, process_cov, c1, inv_noise);
  Matrix next = p + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  return 0.5 * (next + next.transpose());
}

/// Number of equal RK4 substeps for an interval of length h starting at Pi.
/// The measurement term linearizes to rate 2 sum_i c_i^T Pi c_i / sigma_i^2;
/// substeps keep rate * h / m at or below 0.2 (capped at 4096).
int riccati_substeps(const Matrix& cov, const Matrix& c0, const Matrix& c1, const Vector& inv_noise,
                     double h);

struct CovarianceTrajectory {
  TimeGrid grid;
  std::vector<Matrix> matrices;
  std::vector<int> substeps;  // per interval; empty means one step each

  Vector traces() const;
};

/// Classical RK4 with per-step symmetrization, substepping stiff intervals when the
/// schedule can resample outputs. Throws std::runtime_error on non-finite values.
CovarianceTrajectory propagate_covariance(const SparseMatrix& generator, const Matrix& process_cov,
                                          const Matrix& initial, const SensingSchedule& sensing,
                                          const TimeGrid& grid);

CovarianceTrajectory propagate_covariance(const KroneckerGenerator& generator,
                                          const Matrix& process_cov, const Matrix& initial,
                                          const SensingSchedule& sensing, const TimeGrid& grid);
/// Uses the model's Kronecker form when available.
CovarianceTrajectory propagate_covariance(const SpectralModel& model, const SensingSchedule& sensing,
                                          const TimeGrid& grid);
CovarianceTrajectory propagate_covariance(const SpectralModel& model, const TimeSeries& positions,
                                          const SensorFootprints& footprints, const TimeGrid& grid);

/// Trapezoidal integral of tr(Pi(t)).
double uncertainty_cost(const CovarianceTrajectory& trajectory);

/// Closed-form solution of p' = 2 a p + q - s p^2 with constant coefficients.
double scalar_riccati_closed_form(double a_coef, double q, double s, double p0, double t);

}  // namespace mobsense
