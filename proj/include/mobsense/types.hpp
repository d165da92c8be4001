#pragma once

#include <Eigen/Core>
#include <Eigen/SparseCore>

namespace mobsense {

using Vec2 = Eigen::Vector2d;
using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using SparseMatrix = Eigen::SparseMatrix<double>;

/// Columns are time nodes; rows are components (n x (K+1)).
using TimeSeries = Eigen::MatrixXd;

}  // namespace mobsense
