#pragma once

#include <vector>

#include "mobsense/riccati.hpp"
#include "mobsense/rng.hpp"
#include "mobsense/spectral.hpp"

namespace mobsense {

/// Square-root factor L with L L^T = cov, from a pivoted LDL^T factorization.
/// Throws std::runtime_error when cov has a pivot below -1e-10 * max|diag|.
Matrix covariance_factor(const Matrix& cov);

Vector sample_gaussian_field(const Matrix& cov, RngStream& rng);

/// Precomputed square-root factors of the initial and process covariances.
struct PlantNoise {
  Matrix init_factor;
  Matrix process_factor;

  static PlantNoise from_model(const SpectralModel& model);
};

/// Galerkin coefficients at each grid node (N^2 x (K+1)), integrated by Euler-Maruyama.
TimeSeries simulate_truth(const SpectralModel& model, const PlantNoise& noise, const TimeGrid& grid,
                          RngStream& rng);
TimeSeries simulate_truth(const SpectralModel& model, const TimeGrid& grid, RngStream& rng);

struct Measurement {
  double time = 0.0;
  Vector values;
};

/// y_i = c_i^T z + sigma_i eta_i.
Measurement measure(const Vector& truth, const Matrix& output_vectors, const Vector& noise_vars,
                    RngStream& rng, double time = 0.0);

/// Euler discretization of the Kalman-Bucy estimator driven by a precomputed
/// covariance trajectory. `noise_vars` are the continuous-time intensities R.
TimeSeries run_filter(const SpectralModel& model, const TimeGrid& grid,
                      const SensingSchedule& sensing, const Vector& noise_vars,
                      const std::vector<Measurement>& measurements,
                      const CovarianceTrajectory& covariance);

/// sum_k coeffs_k phi_k(point) for each column of `points` (2 x P).
Vector reconstruct_field(const Vector& coeffs, const Eigen::Matrix2Xd& points);

/// Cell-centered uniform grid coordinates (s + 0.5) / G, s = 0..G-1.
Vector uniform_axis(int grid_points);

/// Unbiased pointwise sample variance of reconstructed error fields on the
/// G x G cell-centered grid; entry (a, b) is at (x_a, y_b).
Matrix pointwise_variance(const std::vector<Vector>& error_samples, int grid_points);

}  // namespace mobsense
