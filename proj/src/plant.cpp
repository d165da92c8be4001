#include "mobsense/plant.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace mobsense {

namespace {

using RowMajorMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

int order_of(const Vector& coeffs) {
  const int order = static_cast<int>(std::lround(std::sqrt(double(coeffs.size()))));
  if (order * order != coeffs.size()) {
    throw std::invalid_argument("coefficient vector length is not a perfect square");
  }
  return order;
}

Matrix sine_table(const Vector& axis, int order) {
  Matrix s(axis.size(), order);
  for (Eigen::Index a = 0; a < axis.size(); ++a) {
    for (int i = 0; i < order; ++i) s(a, i) = std::sin(std::numbers::pi * (i + 1) * axis(a));
  }
  return s;
}

}  // namespace

Matrix covariance_factor(const Matrix& cov) {
  const auto n = cov.rows();
  if (cov.cols() != n) throw std::invalid_argument("covariance_factor: matrix must be square");
  if (n == 0) return Matrix(0, 0);
  const double scale = cov.diagonal().cwiseAbs().maxCoeff();
  if (scale == 0.0) return Matrix::Zero(n, n);
  // Symmetric eigendecomposition tolerates the roundoff-negative tail of smooth kernels.
  const Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (cov + cov.transpose()));
  if (es.info() != Eigen::Success) {
    throw std::runtime_error("covariance_factor: factorization failed");
  }
  const Vector& lambda = es.eigenvalues();
  if (lambda.minCoeff() < -1e-10 * scale) {
    throw std::runtime_error("covariance_factor: matrix is not positive semidefinite (eigenvalue " +
                             std::to_string(lambda.minCoeff()) + ")");
  }
  return es.eigenvectors() * lambda.cwiseMax(0.0).cwiseSqrt().asDiagonal();
}

Vector sample_gaussian_field(const Matrix& cov, RngStream& rng) {
  return covariance_factor(cov) * rng.normal(cov.rows());
}

PlantNoise PlantNoise::from_model(const SpectralModel& model) {
  return PlantNoise{covariance_factor(model.init_cov), covariance_factor(model.process_cov)};
}

TimeSeries simulate_truth(const SpectralModel& model, const PlantNoise& noise, const TimeGrid& grid,
                          RngStream& rng) {
  const int dim = model.dim();
  const double h = grid.step;
  const double root_h = std::sqrt(h);
  TimeSeries z(dim, grid.nodes());
  z.col(0) = model.initial_mean + noise.init_factor * rng.normal(dim);
  for (int k = 0; k < grid.count; ++k) {
    const Vector drift = model.generator_sparse * z.col(k);
    z.col(k + 1) = z.col(k) + h * drift + root_h * (noise.process_factor * rng.normal(dim));
    if (!z.col(k + 1).allFinite()) {
      throw std::runtime_error("simulate_truth: non-finite state at step " + std::to_string(k + 1));
    }
  }
  return z;
}

TimeSeries simulate_truth(const SpectralModel& model, const TimeGrid& grid, RngStream& rng) {
  return simulate_truth(model, PlantNoise::from_model(model), grid, rng);
}

Measurement measure(const Vector& truth, const Matrix& output_vectors, const Vector& noise_vars,
                    RngStream& rng, double time) {
  if (output_vectors.rows() != truth.size() || output_vectors.cols() != noise_vars.size()) {
    throw std::invalid_argument("measure: dimension mismatch");
  }
  Measurement y;
  y.time = time;
  y.values = output_vectors.transpose() * truth;
  for (Eigen::Index i = 0; i < noise_vars.size(); ++i) {
    y.values(i) += std::sqrt(noise_vars(i)) * rng.normal();
  }
  return y;
}

TimeSeries run_filter(const SpectralModel& model, const TimeGrid& grid,
                      const SensingSchedule& sensing, const Vector& noise_vars,
                      const std::vector<Measurement>& measurements,
                      const CovarianceTrajectory& covariance) {
  if (covariance.grid.count != grid.count ||
      static_cast<int>(covariance.matrices.size()) != grid.nodes() ||
      static_cast<int>(sensing.nodes.size()) != grid.nodes() ||
      static_cast<int>(measurements.size()) < grid.count) {
    throw std::invalid_argument("run_filter: grid mismatch");
  }
  const Vector rinv = noise_vars.cwiseInverse();
  const double h = grid.step;
  TimeSeries estimate(model.dim(), grid.nodes());
  estimate.col(0) = model.initial_mean;
  for (int k = 0; k < grid.count; ++k) {
    const Matrix& c = sensing.nodes[k];
    Vector rate = model.generator_sparse * estimate.col(k);
    if (c.cols() > 0) {
      const Vector innovation = measurements[k].values - c.transpose() * estimate.col(k);
      rate.noalias() += covariance.matrices[k] * (c * rinv.cwiseProduct(innovation));
    }
    estimate.col(k + 1) = estimate.col(k) + h * rate;
  }
  return estimate;
}

Vector reconstruct_field(const Vector& coeffs, const Eigen::Matrix2Xd& points) {
  const int order = order_of(coeffs);
  const Eigen::Map<const RowMajorMatrix> c(coeffs.data(), order, order);
  const Matrix sx = sine_table(points.row(0).transpose(), order);
  const Matrix sy = sine_table(points.row(1).transpose(), order);
  return 2.0 * (sx * c).cwiseProduct(sy).rowwise().sum();
}

Vector uniform_axis(int grid_points) {
  return (Vector::LinSpaced(grid_points, 0.0, grid_points - 1.0).array() + 0.5) / grid_points;
}

Matrix pointwise_variance(const std::vector<Vector>& error_samples, int grid_points) {
  if (error_samples.size() < 2) {
    throw std::invalid_argument("pointwise_variance: at least 2 samples required");
  }
  const int order = order_of(error_samples.front());
  const Matrix s = sine_table(uniform_axis(grid_points), order);
  Matrix mean = Matrix::Zero(grid_points, grid_points);
  Matrix m2 = Matrix::Zero(grid_points, grid_points);
  double n = 0.0;
  for (const Vector& e : error_samples) {
    const Eigen::Map<const RowMajorMatrix> c(e.data(), order, order);
    const Matrix field = 2.0 * s * c * s.transpose();
    n += 1.0;
    const Matrix delta = field - mean;
    mean += delta / n;
    m2 += delta.cwiseProduct(field - mean);
  }
  return m2 / (n - 1.0);
}

}  // namespace mobsense
