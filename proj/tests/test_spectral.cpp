#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include <Eigen/Eigenvalues>

#include "mobsense/quadrature.hpp"
#include "mobsense/spectral.hpp"
#include "oracles.hpp"

using namespace mobsense;
using oracle::kPi;

TEST(Quadrature, IntegratesPolynomialsExactly) {
  const QuadratureRule r = gauss_legendre(8);
  for (int p = 0; p <= 15; ++p) {
    double s = 0.0;
    for (int i = 0; i < 8; ++i) s += r.weights(i) * std::pow(r.nodes(i), p);
    EXPECT_NEAR(s, 1.0 / (p + 1), 1e-14) << "degree " << p;
  }
}

TEST(Quadrature, AgreesWithNewtonNodes) {
  const QuadratureRule r = gauss_legendre(64);
  auto [x, w] = oracle::gauss_legendre(64);
  std::vector<std::pair<double, double>> ours, theirs;
  for (int i = 0; i < 64; ++i) {
    ours.emplace_back(r.nodes(i), r.weights(i));
    theirs.emplace_back(x[i], w[i]);
  }
  std::sort(ours.begin(), ours.end());
  std::sort(theirs.begin(), theirs.end());
  for (int i = 0; i < 64; ++i) {
    EXPECT_NEAR(ours[i].first, theirs[i].first, 1e-13);
    EXPECT_NEAR(ours[i].second, theirs[i].second, 1e-13);
  }
}

TEST(Basis, PointValues) {
  EXPECT_NEAR(basis_eval(1, 1, Vec2(0.5, 0.5)), 2.0, 1e-15);
  EXPECT_NEAR(basis_eval(3, 7, Vec2(0.0, 0.42)), 0.0, 1e-15);
  EXPECT_NEAR(basis_eval(2, 1, Vec2(0.25, 0.5)), 2.0, 1e-15);
}

TEST(ModeIndex, FlatAndInverse) {
  const ModeIndex idx(12);
  EXPECT_EQ(idx.flat(1, 1), 1);
  EXPECT_EQ(idx.flat(2, 3), 15);
  EXPECT_EQ(idx.modes(144), std::make_pair(12, 12));
  for (int k = 1; k <= 144; ++k) {
    auto [i, j] = idx.modes(k);
    EXPECT_EQ(idx.flat(i, j), k);
  }
  EXPECT_THROW(idx.flat(0, 1), std::out_of_range);
  EXPECT_THROW(idx.modes(145), std::out_of_range);
}

namespace {

// <phi_row, (a Lap - v . grad) phi_col> by tensor Gauss quadrature.
Matrix generator_by_quadrature(int order, double a, Vec2 v, int points) {
  auto [x, w] = oracle::gauss_legendre(points);
  const int dim = order * order;
  Matrix out = Matrix::Zero(dim, dim);
  for (int r = 0; r < dim; ++r) {
    const int i = r / order + 1, j = r % order + 1;
    for (int c = 0; c < dim; ++c) {
      const int l = c / order + 1, m = c % order + 1;
      double s = 0.0;
      for (int p = 0; p < points; ++p) {
        for (int q = 0; q < points; ++q) {
          const double px = x[p], py = x[q];
          const double f = oracle::phi(l, m, px, py);
          const double lap = -kPi * kPi * (l * l + m * m) * f;
          const double gx = oracle::dphi1(l, px) * oracle::phi1(m, py);
          const double gy = oracle::phi1(l, px) * oracle::dphi1(m, py);
          s += w[p] * w[q] * oracle::phi(i, j, px, py) * (a * lap - v.x() * gx - v.y() * gy);
        }
      }
      out(r, c) = s;
    }
  }
  return out;
}

}  // namespace

TEST(Generator, DiffusionDiagonal) {
  FieldSpec f;
  f.diffusion_coeff = 0.01;
  f.flow = Vec2::Zero();
  const Matrix a = build_generator(2, f);
  EXPECT_NEAR(a(0, 0), -0.197392, 1e-6);
  for (int i = 1; i <= 2; ++i) {
    for (int j = 1; j <= 2; ++j) {
      const int k = (i - 1) * 2 + j - 1;
      EXPECT_NEAR(a(k, k), -0.01 * kPi * kPi * (i * i + j * j), 1e-10);
    }
  }
  Matrix off = a;
  off.diagonal().setZero();
  EXPECT_EQ(off.cwiseAbs().maxCoeff(), 0.0);
  EXPECT_LT((a - generator_by_quadrature(2, 0.01, Vec2::Zero(), 64)).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(Generator, AdvectionCoupling) {
  FieldSpec f;
  f.diffusion_coeff = 0.0;
  f.flow = Vec2(0.1, 0.0);
  const Matrix a = build_generator(2, f);
  const ModeIndex idx(2);
  // Row (i=2, j=1), column (l=1, j=1).
  EXPECT_NEAR(a(idx.flat(2, 1) - 1, idx.flat(1, 1) - 1), -0.266667, 1e-6);
  EXPECT_NEAR(a(idx.flat(2, 1) - 1, idx.flat(1, 1) - 1), -0.1 * 8.0 / 3.0, 1e-14);
}

TEST(Generator, MatchesTensorQuadrature) {
  FieldSpec f;
  const Matrix a = build_generator(5, f);
  const Matrix oracle_a = generator_by_quadrature(5, f.diffusion_coeff, f.flow, 64);
  EXPECT_LT((a - oracle_a).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(Generator, KroneckerFormReproducesDense) {
  const SpectralModel m = build_spectral_model(6, FieldSpec{});
  ASSERT_TRUE(m.generator_kron.has_value());
  EXPECT_LT((m.generator_kron->dense() - m.generator).cwiseAbs().maxCoeff(), 1e-15);
  std::mt19937_64 gen(3);
  std::normal_distribution<double> nd;
  Matrix x(36, 36);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = nd(gen);
  EXPECT_LT(((*m.generator_kron) * x - m.generator * x).cwiseAbs().maxCoeff(), 1e-13);
  EXPECT_LT(((*m.generator_kron_t) * x - m.generator.transpose() * x).cwiseAbs().maxCoeff(), 1e-13);
  Matrix bent = m.generator;
  bent(0, 35) = 1.0;
  EXPECT_FALSE(KroneckerGenerator::from_dense(bent, 6).has_value());
}

namespace {

// Brute-force 4D quadrature: Phi^T K Phi over all point pairs, no separability used.
Matrix kernel_by_brute_force(const KernelSpec& k, Vec2 center, double scale, int order,
                             int points) {
  auto [x, w] = oracle::gauss_legendre(points);
  const int n2 = points * points;
  const int dim = order * order;
  Matrix phiw(n2, dim);
  std::vector<Vec2> pts(n2);
  for (int p = 0; p < points; ++p) {
    for (int q = 0; q < points; ++q) {
      const int s = p * points + q;
      pts[s] = Vec2(x[p], x[q]);
      for (int c = 0; c < dim; ++c) {
        phiw(s, c) = w[p] * w[q] * oracle::phi(c / order + 1, c % order + 1, x[p], x[q]);
      }
    }
  }
  Matrix kern(n2, n2);
  for (int s = 0; s < n2; ++s) {
    for (int t = 0; t < n2; ++t) kern(s, t) = scale * k(pts[s], pts[t], center);
  }
  return phiw.transpose() * kern * phiw;
}

}  // namespace

TEST(KernelProjection, InitialKernelMatchesBruteForce) {
  const FieldSpec f;
  const Matrix q = project_covariance_kernel(f.init_kernel, Vec2(0.75, 0.25), 1.0, 4);
  const Matrix oracle_q = kernel_by_brute_force(f.init_kernel, Vec2(0.75, 0.25), 1.0, 4, 64);
  EXPECT_LT((q - oracle_q).cwiseAbs().maxCoeff() / oracle_q.cwiseAbs().maxCoeff(), 1e-6);
  EXPECT_EQ((q - q.transpose()).cwiseAbs().maxCoeff(), 0.0);
}

TEST(KernelProjection, HomogeneousNearConstantLimit) {
  const FieldSpec f;
  const Matrix q = project_covariance_kernel(f.process_kernel, f.uncertainty_peak, 1.0, 3);
  const double limit = std::pow(8.0 / (kPi * kPi), 2);
  EXPECT_NEAR(q(0, 0), 0.65692, 1e-5 + 0.02 * limit);
  EXPECT_NEAR(q(0, 0) / limit, 1.0, 0.02);
  const Matrix oracle_q = kernel_by_brute_force(f.process_kernel, f.uncertainty_peak, 1.0, 3, 48);
  EXPECT_LT((q - oracle_q).cwiseAbs().maxCoeff() / oracle_q.cwiseAbs().maxCoeff(), 1e-6);
}

TEST(KernelProjection, DoubledResolutionAgreement) {
  const FieldSpec f;
  for (const KernelSpec& k : {f.init_kernel, f.process_kernel}) {
    const Matrix lo = project_covariance_kernel(k, f.uncertainty_peak, 8.0, 8, 32);
    const Matrix hi = project_covariance_kernel(k, f.uncertainty_peak, 8.0, 8, 64);
    EXPECT_LT((lo - hi).cwiseAbs().maxCoeff() / hi.cwiseAbs().maxCoeff(), 1e-6);
  }
}

TEST(KernelProjection, ScaleIsLinear) {
  const FieldSpec f;
  const Matrix a = project_covariance_kernel(f.init_kernel, f.uncertainty_peak, 1.0, 4);
  const Matrix b = project_covariance_kernel(f.init_kernel, f.uncertainty_peak, 8.0, 4);
  EXPECT_LT((b - 8.0 * a).cwiseAbs().maxCoeff(), 1e-12 * b.cwiseAbs().maxCoeff());
}

TEST(KernelProjection, RejectsBadInput) {
  KernelSpec k;
  k.pair_length_sq = -1.0;
  EXPECT_THROW(project_covariance_kernel(k, Vec2(0.5, 0.5), 1.0, 2), std::invalid_argument);
  EXPECT_THROW(project_covariance_kernel(KernelSpec{}, Vec2(0.5, 0.5), 0.0, 2),
               std::invalid_argument);
}

namespace {

double output_by_quadrature(Vec2 c, double r, int i, int j) {
  // Clipped square average, quadrature per axis on the clipped interval.
  auto [x, w] = oracle::gauss_legendre(40);
  auto axis = [&](double center, int mode) {
    const double lo = std::max(0.0, center - r), hi = std::min(1.0, center + r);
    if (hi <= lo) return 0.0;
    double s = 0.0;
    for (int p = 0; p < 40; ++p) s += w[p] * (hi - lo) * oracle::phi1(mode, lo + (hi - lo) * x[p]);
    return s;
  };
  return axis(c.x(), i) * axis(c.y(), j) / (4.0 * r * r);
}

}  // namespace

TEST(OutputVector, ClosedFormValues) {
  const Vector c = output_vector(Vec2(0.5, 0.5), 0.05, 4);
  const double expected =
      (1.0 / (4 * 0.05 * 0.05)) * 2.0 *
      std::pow((std::cos(0.45 * kPi) - std::cos(0.55 * kPi)) / kPi, 2);
  EXPECT_NEAR(c(0), expected, 1e-12);
  EXPECT_NEAR(c(0), 1.983605, 1e-6);
  EXPECT_NEAR(c(ModeIndex(4).flat(2, 1) - 1), 0.0, 1e-14);
  EXPECT_NEAR(output_vector(Vec2(0.5, 0.5), 1e-6, 2)(0), 2.0, 1e-6);
}

TEST(OutputVector, MatchesQuadratureIncludingClipping) {
  for (const Vec2& c : {Vec2(0.4, 0.5), Vec2(0.02, 0.3), Vec2(0.99, 0.97), Vec2(0.5, -0.02),
                        Vec2(1.2, 0.5)}) {
    const Vector v = output_vector(c, 0.05, 4);
    for (int k = 0; k < 16; ++k) {
      EXPECT_NEAR(v(k), output_by_quadrature(c, 0.05, k / 4 + 1, k % 4 + 1), 1e-10)
          << c.transpose() << " mode " << k;
    }
  }
  EXPECT_TRUE(footprint_clipped(Vec2(0.02, 0.5), 0.05));
  EXPECT_FALSE(footprint_clipped(Vec2(0.5, 0.5), 0.05));
}

TEST(OutputJacobian, FiniteDifferences) {
  const double h = 1e-6;
  for (const Vec2& c : {Vec2(0.4, 0.5), Vec2(0.5, 0.5), Vec2(0.03, 0.7), Vec2(0.3, 0.97)}) {
    const auto jac = output_jacobian(c, 0.05, 5);
    for (int d = 0; d < 2; ++d) {
      Vec2 up = c, dn = c;
      up(d) += h;
      dn(d) -= h;
      const Vector fd = (output_vector(up, 0.05, 5) - output_vector(dn, 0.05, 5)) / (2 * h);
      const double scale = std::max(1.0, fd.cwiseAbs().maxCoeff());
      EXPECT_LT((jac.col(d) - fd).cwiseAbs().maxCoeff(), 1e-6 * scale) << c.transpose();
    }
  }
  const auto center = output_jacobian(Vec2(0.5, 0.5), 0.05, 3);
  EXPECT_NEAR(center(0, 0), 0.0, 1e-12);
  EXPECT_NEAR(center(0, 1), 0.0, 1e-12);
  EXPECT_GT(std::abs(center(ModeIndex(3).flat(2, 1) - 1, 0)), 1e-3);
}

TEST(SpectralModel, BuildsConsistentOperators) {
  const SpectralModel m = build_spectral_model(4, FieldSpec{});
  EXPECT_EQ(m.dim(), 16);
  EXPECT_LT((Matrix(m.generator_sparse) - m.generator).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_LT((Matrix(m.generator_sparse_t) - m.generator.transpose()).cwiseAbs().maxCoeff(), 1e-15);
  Eigen::SelfAdjointEigenSolver<Matrix> es(m.init_cov);
  EXPECT_GT(es.eigenvalues().minCoeff(), -1e-10);
  EXPECT_EQ(m.initial_mean.size(), 16);
  FieldSpec bad;
  bad.initial_mean_coeffs = Vector::Ones(3);
  EXPECT_THROW(build_spectral_model(4, bad), std::invalid_argument);
}
