#include "mobsense/quadrature.hpp"

#include <Eigen/Eigenvalues>
#include <stdexcept>

namespace mobsense {

// Golub-Welsch: nodes are eigenvalues of the Jacobi matrix of the Legendre
// recurrence, weights come from the first eigenvector components.
QuadratureRule gauss_legendre(int points, double lower, double upper) {
  if (points < 1) throw std::invalid_argument("gauss_legendre: points must be >= 1");
  Eigen::MatrixXd jacobi = Eigen::MatrixXd::Zero(points, points);
  for (int k = 1; k < points; ++k) {
    const double b = k / std::sqrt(4.0 * k * k - 1.0);
    jacobi(k, k - 1) = b;
    jacobi(k - 1, k) = b;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(jacobi);
  const double half = 0.5 * (upper - lower);
  const double mid = 0.5 * (upper + lower);
  QuadratureRule rule;
  rule.nodes = mid + half * es.eigenvalues().array();
  rule.weights = 2.0 * half * es.eigenvectors().row(0).transpose().array().square();
  return rule;
}

}  // namespace mobsense
