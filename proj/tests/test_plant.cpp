#include <gtest/gtest.h>

#include <cmath>

#include "mobsense/plant.hpp"
#include "oracles.hpp"

using namespace mobsense;

namespace {

SensingSchedule schedule_at(int order, const Vec2& where, double radius, double noise,
                            const TimeGrid& grid) {
  TimeSeries pos(2, grid.nodes());
  pos.colwise() = where;
  SensorFootprints fp;
  fp.radii = {radius};
  fp.noise_vars = Vector::Constant(1, noise);
  return make_sensing_schedule(order, pos, fp);
}

}  // namespace

TEST(Rng, StreamsAreIndependentOfCreationOrder) {
  RngStream a(7, 3), b(7, 4);
  const Vector a1 = a.normal(5);
  RngStream b2(7, 4), a2(7, 3);
  EXPECT_EQ(a1, a2.normal(5));
  EXPECT_EQ(b.normal(5), b2.normal(5));
  EXPECT_NE(RngStream(7, 3).normal(5), RngStream(8, 3).normal(5));
}

TEST(CovarianceFactor, ZeroAndRankDeficient) {
  EXPECT_EQ(covariance_factor(Matrix::Zero(4, 4)).cwiseAbs().maxCoeff(), 0.0);
  const Vector v(Vector::LinSpaced(5, 1.0, 2.0));
  const Matrix rank1 = v * v.transpose();
  const Matrix f = covariance_factor(rank1);
  EXPECT_LT((f * f.transpose() - rank1).cwiseAbs().maxCoeff(), 1e-12);
  Matrix indefinite = Matrix::Identity(3, 3);
  indefinite(2, 2) = -1.0;
  EXPECT_THROW(covariance_factor(indefinite), std::runtime_error);
}

TEST(CovarianceFactor, FullOrderKernels) {
  const SpectralModel m = build_spectral_model(12, FieldSpec{});
  for (const Matrix* cov : {&m.init_cov, &m.process_cov}) {
    const Matrix f = covariance_factor(*cov);
    EXPECT_LT((f * f.transpose() - *cov).cwiseAbs().maxCoeff(), 1e-12 * cov->cwiseAbs().maxCoeff());
  }
}

TEST(Sampling, IdentityCovariance) {
  RngStream rng(11, 0);
  const int n = 3, draws = 100000;
  Matrix acc = Matrix::Zero(n, n);
  const Matrix eye = Matrix::Identity(n, n);
  for (int d = 0; d < draws; ++d) {
    const Vector x = sample_gaussian_field(eye, rng);
    acc += x * x.transpose();
  }
  acc /= draws;
  EXPECT_LT((acc - eye).cwiseAbs().maxCoeff(), 0.02);
}

TEST(Sampling, InitialCovarianceStatistics) {
  const SpectralModel m = build_spectral_model(3, FieldSpec{});
  const Matrix f = covariance_factor(m.init_cov);
  RngStream rng(5, 0);
  const int draws = 10000;
  Matrix acc = Matrix::Zero(9, 9);
  for (int d = 0; d < draws; ++d) {
    const Vector x = f * rng.normal(9);
    acc += x * x.transpose();
  }
  acc /= draws;
  for (int i = 0; i < 9; ++i) {
    for (int j = 0; j < 9; ++j) {
      const double p = m.init_cov(i, j);
      const double sd = std::sqrt((p * p + m.init_cov(i, i) * m.init_cov(j, j)) / draws);
      EXPECT_LT(std::abs(acc(i, j) - p), 5 * sd + 1e-12) << i << "," << j;
    }
  }
}

TEST(Truth, ZeroNoiseGivesZeroTrajectory) {
  const SpectralModel m = build_spectral_model(3, FieldSpec{});
  PlantNoise noise{Matrix::Zero(9, 9), Matrix::Zero(9, 9)};
  RngStream rng(1, 0);
  const TimeSeries z = simulate_truth(m, noise, TimeGrid::make(1.0, 0.01), rng);
  EXPECT_EQ(z.cwiseAbs().maxCoeff(), 0.0);
}

TEST(Truth, EulerConvergesFirstOrder) {
  FieldSpec f;
  f.flow = Vec2::Zero();
  f.initial_mean_coeffs = Vector::Ones(4);
  const SpectralModel m = build_spectral_model(2, f);
  PlantNoise noise{Matrix::Zero(4, 4), Matrix::Zero(4, 4)};
  auto error_at = [&](double dt) {
    RngStream rng(1, 0);
    const TimeGrid g = TimeGrid::make(1.0, dt);
    const TimeSeries z = simulate_truth(m, noise, g, rng);
    const Vector exact = (m.generator.diagonal().array()).exp().matrix();
    return (z.col(g.count) - exact).cwiseAbs().maxCoeff();
  };
  const double e1 = error_at(0.02), e2 = error_at(0.01);
  EXPECT_NEAR(e1 / e2, 2.0, 0.5);
}

TEST(Truth, BitwiseRepeatable) {
  const SpectralModel m = build_spectral_model(4, FieldSpec{});
  const TimeGrid g = TimeGrid::make(0.5, 0.01);
  RngStream a(42, 9), b(42, 9);
  EXPECT_EQ(simulate_truth(m, g, a), simulate_truth(m, g, b));
}

TEST(Measure, ValuesAndNoise) {
  const Matrix c = output_vector(Vec2(0.5, 0.5), 0.05, 3);
  RngStream rng(3, 0);
  EXPECT_EQ(measure(Vector::Zero(9), c, Vector::Zero(1), rng).values(0), 0.0);
  Vector e1 = Vector::Zero(9);
  e1(0) = 1.0;
  EXPECT_NEAR(measure(e1, c, Vector::Zero(1), rng).values(0), 1.983605, 1e-6);
  std::vector<double> ys;
  for (int d = 0; d < 100000; ++d) {
    ys.push_back(measure(Vector::Zero(9), c, Vector::Constant(1, 0.2), rng).values(0));
  }
  const double mu = oracle::mean(ys);
  double v = 0.0;
  for (double y : ys) v += (y - mu) * (y - mu);
  v /= ys.size() - 1;
  EXPECT_NEAR(v / 0.2, 1.0, 0.01);
}

TEST(Filter, ZeroInnovationTracksTruth) {
  FieldSpec f;
  f.initial_mean_coeffs = Vector::LinSpaced(9, -1.0, 1.0);
  const SpectralModel m = build_spectral_model(3, f);
  const TimeGrid g = TimeGrid::make(1.0, 0.01);
  PlantNoise noise{Matrix::Zero(9, 9), Matrix::Zero(9, 9)};
  RngStream rng(2, 0);
  const TimeSeries truth = simulate_truth(m, noise, g, rng);
  const SensingSchedule s = schedule_at(3, Vec2(0.4, 0.6), 0.1, 0.2, g);
  const auto cov = propagate_covariance(m.generator_sparse, m.process_cov, m.init_cov, s, g);
  std::vector<Measurement> ys;
  for (int k = 0; k < g.count; ++k) ys.push_back(measure(truth.col(k), s.nodes[k], Vector::Zero(1), rng));
  const TimeSeries est = run_filter(m, g, s, Vector::Constant(1, 0.2), ys, cov);
  EXPECT_LT((est - truth).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(Filter, HugeNoiseFollowsUnforcedDynamics) {
  FieldSpec f;
  f.flow = Vec2::Zero();
  f.initial_mean_coeffs = Vector::Ones(4);
  const SpectralModel m = build_spectral_model(2, f);
  const TimeGrid g = TimeGrid::make(1.0, 0.001);
  const SensingSchedule s = schedule_at(2, Vec2(0.5, 0.5), 0.1, 1e12, g);
  const auto cov = propagate_covariance(m.generator_sparse, m.process_cov, m.init_cov, s, g);
  std::vector<Measurement> ys(g.count, Measurement{0.0, Vector::Constant(1, 5.0)});
  const TimeSeries est = run_filter(m, g, s, Vector::Constant(1, 1e12), ys, cov);
  const Vector exact = m.generator.diagonal().array().exp().matrix();
  EXPECT_LT((est.col(g.count) - exact).cwiseAbs().maxCoeff(), 1e-3);
  // Removing the Euler discretization error leaves the gain contribution, which must be tiny.
  Vector euler = f.initial_mean_coeffs;
  for (int k = 0; k < g.count; ++k) euler += g.step * (m.generator * euler);
  EXPECT_LT((est.col(g.count) - euler).cwiseAbs().maxCoeff(), 1e-6);
}

TEST(Reconstruct, ValuesAndParseval) {
  Vector e1 = Vector::Zero(9);
  e1(0) = 1.0;
  Eigen::Matrix2Xd pts(2, 2);
  pts << 0.5, 0.0, 0.5, 0.3;
  const Vector v = reconstruct_field(e1, pts);
  EXPECT_NEAR(v(0), 2.0, 1e-15);
  EXPECT_NEAR(v(1), 0.0, 1e-15);

  const Vector coeffs = Vector::LinSpaced(16, -0.8, 1.3);
  auto [x, w] = oracle::gauss_legendre(40);
  Eigen::Matrix2Xd grid(2, 1600);
  for (int a = 0; a < 40; ++a) {
    for (int b = 0; b < 40; ++b) grid.col(a * 40 + b) << x[a], x[b];
  }
  const Vector field = reconstruct_field(coeffs, grid);
  double integral = 0.0;
  for (int a = 0; a < 40; ++a) {
    for (int b = 0; b < 40; ++b) integral += w[a] * w[b] * field(a * 40 + b) * field(a * 40 + b);
  }
  EXPECT_NEAR(integral, coeffs.squaredNorm(), 1e-6);
}

TEST(PointwiseVariance, ArithmeticCases) {
  std::vector<Vector> same(5, Vector::LinSpaced(4, 0.0, 1.0));
  EXPECT_LT(pointwise_variance(same, 6).cwiseAbs().maxCoeff(), 1e-14);
  std::vector<Vector> alt;
  for (int i = 0; i < 100; ++i) {
    Vector e = Vector::Zero(4);
    e(0) = i % 2 == 0 ? 1.0 : -1.0;
    alt.push_back(e);
  }
  // G = 3 puts a cell center at (0.5, 0.5).
  const Matrix var = pointwise_variance(alt, 3);
  EXPECT_NEAR(var(1, 1), 4.0 * 100.0 / 99.0, 1e-12);
  EXPECT_NEAR(var(1, 1), 4.0404, 1e-4);
}

TEST(PointwiseVariance, PeakedAtUncertaintyCenter) {
  const SpectralModel m = build_spectral_model(6, FieldSpec{});
  const Matrix f = covariance_factor(m.init_cov);
  RngStream rng(17, 0);
  std::vector<Vector> samples;
  for (int d = 0; d < 400; ++d) samples.push_back(f * rng.normal(36));
  const int g = 144;
  const Matrix var = pointwise_variance(samples, g);
  const Vector axis = uniform_axis(g);
  auto nearest = [&](double t) { return static_cast<int>(std::floor(t * g)); };
  const double at_peak = var(nearest(0.75), nearest(0.25));
  const double opposite = var(nearest(0.25), nearest(0.75));
  EXPECT_NEAR(axis(nearest(0.75)), 0.75, 1.0 / g);
  EXPECT_GT(at_peak, opposite);
}
