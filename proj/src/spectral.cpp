#include "mobsense/spectral.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

#include "mobsense/quadrature.hpp"

namespace mobsense {

namespace {

constexpr double kPi = std::numbers::pi;

bool inside_open_unit_square(const Vec2& p) {
  return p.x() > 0.0 && p.x() < 1.0 && p.y() > 0.0 && p.y() < 1.0;
}

// Integral of sin(pi i s) over [lo, hi] clipped to [0, 1].
// cos(a) - cos(b) is evaluated as 2 sin((a+b)/2) sin((b-a)/2) to survive tiny widths.
double clipped_sine_integral(int i, double lo, double hi) {
  lo = std::max(lo, 0.0);
  hi = std::min(hi, 1.0);
  if (hi <= lo) return 0.0;
  const double w = kPi * i;
  return 2.0 * std::sin(0.5 * w * (lo + hi)) * std::sin(0.5 * w * (hi - lo)) / w;
}

// d/dc of the clipped integral over [c - r, c + r].
double clipped_sine_integral_derivative(int i, double c, double r) {
  const double lo = c - r;
  const double hi = c + r;
  if (std::min(hi, 1.0) <= std::max(lo, 0.0)) return 0.0;
  const double w = kPi * i;
  double d = 0.0;
  if (hi < 1.0) d += std::sin(w * hi);
  if (lo > 0.0) d -= std::sin(w * lo);
  return d;
}

// P[i][l] = sum_ab w_a w_b sqrt2 sin(pi i s_a) f(s_a, s_b) sqrt2 sin(pi l s_b)
Matrix project_axis(const KernelSpec& kernel, double center, int order,
                    const QuadratureRule& rule) {
  const int q = static_cast<int>(rule.nodes.size());
  Matrix basis(order, q);
  for (int i = 0; i < order; ++i) {
    for (int a = 0; a < q; ++a) {
      basis(i, a) = std::sqrt(2.0) * std::sin(kPi * (i + 1) * rule.nodes(a)) * rule.weights(a);
    }
  }
  Matrix gram(q, q);
  for (int a = 0; a < q; ++a) {
    for (int b = 0; b < q; ++b) {
      gram(a, b) = kernel.axis_factor(rule.nodes(a), rule.nodes(b), center);
    }
  }
  return basis * gram * basis.transpose();
}

}  // namespace

double KernelSpec::axis_factor(double s1, double s2, double center) const {
  double exponent = -(s1 - s2) * (s1 - s2) / pair_length_sq;
  if (center_length_sq) {
    exponent -= ((s1 - center) * (s1 - center) + (s2 - center) * (s2 - center)) /
                *center_length_sq;
  }
  return std::exp(exponent);
}

void KernelSpec::validate() const {
  if (!(amplitude >= 0.0)) throw std::invalid_argument("kernel amplitude must be >= 0");
  if (!(pair_length_sq > 0.0)) throw std::invalid_argument("kernel pair_length_sq must be > 0");
  if (center_length_sq && !(*center_length_sq > 0.0)) {
    throw std::invalid_argument("kernel center_length_sq must be > 0");
  }
}

void FieldSpec::validate() const {
  if (!(diffusion_coeff > 0.0)) throw std::invalid_argument("field.diffusion must be > 0");
  if (!flow.allFinite()) throw std::invalid_argument("field.flow must be finite");
  if (!inside_open_unit_square(uncertainty_peak)) {
    throw std::invalid_argument("field.peak must lie inside the open unit square");
  }
  if (!(kernel_scale > 0.0)) throw std::invalid_argument("field.kernel_scale must be > 0");
  init_kernel.validate();
  process_kernel.validate();
}

ModeIndex::ModeIndex(int order) : order_(order) {
  if (order < 1) throw std::invalid_argument("spectral order must be >= 1");
}

int ModeIndex::flat(int i, int j) const {
  if (i < 1 || i > order_ || j < 1 || j > order_) {
    throw std::out_of_range("mode (" + std::to_string(i) + "," + std::to_string(j) +
                            ") outside order " + std::to_string(order_));
  }
  return (i - 1) * order_ + j;
}

std::pair<int, int> ModeIndex::modes(int k) const {
  if (k < 1 || k > size()) {
    throw std::out_of_range("flat mode index " + std::to_string(k) + " outside 1.." +
                            std::to_string(size()));
  }
  return {(k - 1) / order_ + 1, (k - 1) % order_ + 1};
}

Matrix derivative_coupling(int order) {
  Matrix d = Matrix::Zero(order, order);
  for (int i = 1; i <= order; ++i) {
    for (int l = 1; l <= order; ++l) {
      if ((i + l) % 2 == 1) d(i - 1, l - 1) = 4.0 * i * l / double(i * i - l * l);
    }
  }
  return d;
}

Matrix build_generator(int order, const FieldSpec& field) {
  const ModeIndex index(order);
  const int dim = index.size();
  const Matrix d = derivative_coupling(order);
  Matrix a = Matrix::Zero(dim, dim);
  for (int i = 1; i <= order; ++i) {
    for (int j = 1; j <= order; ++j) {
      const int row = index.flat(i, j) - 1;
      a(row, row) = -field.diffusion_coeff * kPi * kPi * double(i * i + j * j);
      for (int l = 1; l <= order; ++l) {
        // x-advection couples (i,j) with (l,j); y-advection couples (i,j) with (i,l).
        if (d(i - 1, l - 1) != 0.0) a(row, index.flat(l, j) - 1) -= field.flow.x() * d(i - 1, l - 1);
        if (d(j - 1, l - 1) != 0.0) a(row, index.flat(i, l) - 1) -= field.flow.y() * d(j - 1, l - 1);
      }
    }
  }
  return a;
}

Matrix project_covariance_kernel(const KernelSpec& kernel, const Vec2& center, double scale,
                                 int order, int points_per_axis) {
  if (!(scale > 0.0)) throw std::invalid_argument("kernel scale must be > 0");
  if (!(kernel.pair_length_sq > 0.0) ||
      (kernel.center_length_sq && !(*kernel.center_length_sq > 0.0))) {
    throw std::invalid_argument("kernel length scales must be > 0");
  }
  const ModeIndex index(order);
  const QuadratureRule rule = gauss_legendre(points_per_axis);
  const Matrix px = project_axis(kernel, center.x(), order, rule);
  const Matrix py = project_axis(kernel, center.y(), order, rule);
  const int dim = index.size();
  Matrix q(dim, dim);
  // Separable kernel: Q = scale * amplitude * (Px kron Py) under k = (i-1)N + j.
  for (int i = 0; i < order; ++i) {
    for (int l = 0; l < order; ++l) {
      q.block(i * order, l * order, order, order) = (scale * kernel.amplitude * px(i, l)) * py;
    }
  }
  return 0.5 * (q + q.transpose());
}

Matrix project_covariance_kernel(const KernelSpec& kernel, const Vec2& center, double scale,
                                 int order) {
  constexpr int kPoints = 32;
  Matrix coarse = project_covariance_kernel(kernel, center, scale, order, kPoints);
  const Matrix fine = project_covariance_kernel(kernel, center, scale, order, 2 * kPoints);
  const double ref = std::max(fine.cwiseAbs().maxCoeff(), 1e-300);
  const double diff = (coarse - fine).cwiseAbs().maxCoeff();
  if (diff > 1e-6 * ref) {
    throw std::runtime_error("kernel projection quadrature not converged: relative difference " +
                             std::to_string(diff / ref));
  }
  return coarse;
}

bool footprint_clipped(const Vec2& location, double radius) {
  return location.x() - radius <= 0.0 || location.x() + radius >= 1.0 ||
         location.y() - radius <= 0.0 || location.y() + radius >= 1.0;
}

Vector output_vector(const Vec2& location, double radius, int order) {
  if (!(radius > 0.0)) throw std::invalid_argument("footprint radius must be > 0");
  const ModeIndex index(order);
  Vector ix(order), iy(order);
  for (int i = 1; i <= order; ++i) {
    ix(i - 1) = clipped_sine_integral(i, location.x() - radius, location.x() + radius);
    iy(i - 1) = clipped_sine_integral(i, location.y() - radius, location.y() + radius);
  }
  const double norm = 2.0 / (4.0 * radius * radius);
  Vector c(index.size());
  for (int i = 0; i < order; ++i) c.segment(i * order, order) = (norm * ix(i)) * iy;
  return c;
}

Eigen::Matrix<double, Eigen::Dynamic, 2> output_jacobian(const Vec2& location, double radius,
                                                         int order) {
  if (!(radius > 0.0)) throw std::invalid_argument("footprint radius must be > 0");
  const ModeIndex index(order);
  Vector ix(order), iy(order), dx(order), dy(order);
  for (int i = 1; i <= order; ++i) {
    ix(i - 1) = clipped_sine_integral(i, location.x() - radius, location.x() + radius);
    iy(i - 1) = clipped_sine_integral(i, location.y() - radius, location.y() + radius);
    dx(i - 1) = clipped_sine_integral_derivative(i, location.x(), radius);
    dy(i - 1) = clipped_sine_integral_derivative(i, location.y(), radius);
  }
  const double norm = 2.0 / (4.0 * radius * radius);
  Eigen::Matrix<double, Eigen::Dynamic, 2> jac(index.size(), 2);
  for (int i = 0; i < order; ++i) {
    jac.col(0).segment(i * order, order) = (norm * dx(i)) * iy;
    jac.col(1).segment(i * order, order) = (norm * ix(i)) * dy;
  }
  return jac;
}

std::optional<KroneckerGenerator> KroneckerGenerator::from_dense(const Matrix& generator,
                                                                 int order) {
  const int dim = order * order;
  if (generator.rows() != dim || generator.cols() != dim) return std::nullopt;
  KroneckerGenerator g;
  g.order = order;
  g.ax.resize(order, order);
  g.ay.resize(order, order);
  for (int i = 0; i < order; ++i) {
    for (int l = 0; l < order; ++l) {
      g.ax(i, l) = i == l ? 0.0 : generator(i * order, l * order);
      g.ay(i, l) = i == l ? 0.0 : generator(i, l);
    }
  }
  g.diag = generator.diagonal();
  const double scale = generator.cwiseAbs().maxCoeff();
  if ((g.dense() - generator).cwiseAbs().maxCoeff() > 1e-13 * scale) return std::nullopt;
  return g;
}

KroneckerGenerator KroneckerGenerator::transpose() const {
  KroneckerGenerator t = *this;
  t.ax.transposeInPlace();
  t.ay.transposeInPlace();
  return t;
}

Matrix KroneckerGenerator::dense() const {
  Matrix a = diag.asDiagonal();
  for (int i = 0; i < order; ++i) {
    for (int l = 0; l < order; ++l) {
      a.block(i * order, l * order, order, order).diagonal().array() += ax(i, l);
    }
    a.block(i * order, i * order, order, order) += ay;
  }
  return a;
}

void KroneckerGenerator::apply(const Matrix& x, Matrix& out) const {
  const int n = order;
  const Eigen::Index cols = x.cols();
  out.noalias() = diag.asDiagonal() * x;
  // I (x) Ay contracts the fast index j: one product on the N x (N cols) view.
  Eigen::Map<const Matrix> xv(x.data(), n, n * cols);
  Eigen::Map<Matrix> ov(out.data(), n, n * cols);
  ov.noalias() += ay * xv;
  // Ax (x) I contracts i: transpose every N x N column block, multiply, transpose back.
  Matrix shuffled(n, n * cols);
  for (Eigen::Index c = 0; c < cols; ++c) {
    shuffled.middleCols(c * n, n) = xv.middleCols(c * n, n).transpose();
  }
  const Matrix mixed = ax * shuffled;
  for (Eigen::Index c = 0; c < cols; ++c) {
    ov.middleCols(c * n, n) += mixed.middleCols(c * n, n).transpose();
  }
}

void SpectralModel::sync_operators() {
  generator_sparse = generator.sparseView();
  generator_sparse.makeCompressed();
  generator_sparse_t = generator_sparse.transpose();
  generator_sparse_t.makeCompressed();
  generator_kron = KroneckerGenerator::from_dense(generator, order);
  if (generator_kron) {
    generator_kron_t = generator_kron->transpose();
  } else {
    generator_kron_t.reset();
  }
}

SpectralModel build_spectral_model(int order, const FieldSpec& field) {
  field.validate();
  const ModeIndex index(order);
  SpectralModel model;
  model.order = order;
  model.field = field;
  model.generator = build_generator(order, field);
  model.sync_operators();
  model.process_cov =
      project_covariance_kernel(field.process_kernel, field.uncertainty_peak, field.kernel_scale, order);
  model.init_cov =
      project_covariance_kernel(field.init_kernel, field.uncertainty_peak, field.kernel_scale, order);
  if (field.initial_mean_coeffs.size() == 0) {
    model.initial_mean = Vector::Zero(index.size());
  } else if (field.initial_mean_coeffs.size() == index.size()) {
    model.initial_mean = field.initial_mean_coeffs;
  } else {
    throw std::invalid_argument("field.initial_mean must have N^2 = " +
                                std::to_string(index.size()) + " coefficients");
  }
  return model;
}

}  // namespace mobsense
