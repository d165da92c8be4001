#pragma once

#include <cmath>
#include <numbers>
#include <optional>
#include <utility>

#include "mobsense/types.hpp"

namespace mobsense {

/// Gaussian-type covariance kernel
///   amplitude * exp(-|x1-x2|^2 / pair_length_sq - |x1-c|^2 / center_length_sq - |x2-c|^2 / center_length_sq)
/// where the center terms are dropped for the homogeneous form.
struct KernelSpec {
  double amplitude = 1.0;
  double pair_length_sq = 1.0;
  std::optional<double> center_length_sq;

  template <typename Scalar>
  Scalar operator()(const Eigen::Matrix<Scalar, 2, 1>& x1, const Eigen::Matrix<Scalar, 2, 1>& x2,
                    const Eigen::Matrix<Scalar, 2, 1>& center) const {
    Scalar exponent = -(x1 - x2).squaredNorm() / Scalar(pair_length_sq);
    if (center_length_sq) {
      exponent -= ((x1 - center).squaredNorm() + (x2 - center).squaredNorm()) /
                  Scalar(*center_length_sq);
    }
    return Scalar(amplitude) * std::exp(exponent);
  }

  /// One-axis factor of the kernel; the full kernel is amplitude * axis(x) * axis(y).
  double axis_factor(double s1, double s2, double center) const;

  void validate() const;
};

/// Field physics on the unit square with zero Dirichlet boundary.
struct FieldSpec {
  double diffusion_coeff = 0.01;
  Vec2 flow{0.1, -0.1};
  Vector initial_mean_coeffs;  // empty means all-zero
  KernelSpec init_kernel{9.0, 200.0, 10.0};
  KernelSpec process_kernel{1.0, 2000.0, std::nullopt};
  Vec2 uncertainty_peak{0.75, 0.25};
  double kernel_scale = 1.0;

  void validate() const;
};

/// Bijection between the flat index k = (i-1)N + j and the mode pair (i, j).
/// Both sides are 1-based to match the usual mode numbering; storage uses k-1.
class ModeIndex {
 public:
  explicit ModeIndex(int order);

  int order() const { return order_; }
  int size() const { return order_ * order_; }
  int flat(int i, int j) const;
  std::pair<int, int> modes(int k) const;

 private:
  int order_;
};

/// Orthonormal Laplacian eigenfunction 2 sin(pi i x) sin(pi j y).
template <typename Scalar>
Scalar basis_eval(int i, int j, const Eigen::Matrix<Scalar, 2, 1>& point) {
  using std::sin;
  const Scalar pi = std::numbers::pi_v<Scalar>;
  return Scalar(2) * sin(pi * Scalar(i) * point.x()) * sin(pi * Scalar(j) * point.y());
}

/// Galerkin matrix of a*Laplacian - flow.grad on the first N x N sine modes.
Matrix build_generator(int order, const FieldSpec& field);

/// 1D advection coupling <sqrt2 sin(pi i s), d/ds sqrt2 sin(pi l s)> for modes 1..N.
Matrix derivative_coupling(int order);

/// Projects scale * kernel onto the basis with `points_per_axis` Gauss-Legendre nodes.
Matrix project_covariance_kernel(const KernelSpec& kernel, const Vec2& center, double scale,
                                 int order, int points_per_axis);

/// Same projection, cross-checked against doubled resolution; throws
/// std::runtime_error when the two differ by more than 1e-6 relative.
Matrix project_covariance_kernel(const KernelSpec& kernel, const Vec2& center, double scale,
                                 int order);

/// Basis coefficients of the square-average output kernel 1/(4r^2) on the
/// 2r x 2r square centered at `location`, clipped to the unit square.
Vector output_vector(const Vec2& location, double radius, int order);

/// d(output_vector)/d(location), N^2 x 2. Where a footprint edge sits outside
/// the domain, that edge contributes nothing (one-sided derivative from inside).
Eigen::Matrix<double, Eigen::Dynamic, 2> output_jacobian(const Vec2& location, double radius,
                                                         int order);

/// True if the footprint square touches or crosses the domain boundary.
bool footprint_clipped(const Vec2& location, double radius);

/// Generator in Kronecker-sum form diag + Ax (x) I + I (x) Ay, applied with
/// dense N x N products instead of an N^2 x N^2 sparse product.
struct KroneckerGenerator {
  int order = 0;
  Vector diag;
  Matrix ax;
  Matrix ay;

  /// Recovers the factors from a dense generator; empty if it is not a Kronecker sum.
  static std::optional<KroneckerGenerator> from_dense(const Matrix& generator, int order);

  KroneckerGenerator transpose() const;
  Matrix dense() const;
  void apply(const Matrix& x, Matrix& out) const;
  Matrix operator*(const Matrix& x) const {
    Matrix out;
    apply(x, out);
    return out;
  }
};

/// Immutable finite-dimensional representation of the field.
struct SpectralModel {
  int order = 0;
  Matrix generator;
  SparseMatrix generator_sparse;
  SparseMatrix generator_sparse_t;
  std::optional<KroneckerGenerator> generator_kron;
  std::optional<KroneckerGenerator> generator_kron_t;
  Matrix process_cov;
  Matrix init_cov;
  Vector initial_mean;
  FieldSpec field;

  int dim() const { return order * order; }
  ModeIndex index() const { return ModeIndex(order); }

  /// Refreshes the sparse and Kronecker copies after `generator` was edited.
  void sync_operators();
};

SpectralModel build_spectral_model(int order, const FieldSpec& field);

}  // namespace mobsense
