#pragma once

#include "mobsense/types.hpp"

namespace mobsense {

struct QuadratureRule {
  Vector nodes;
  Vector weights;
};

/// Gauss-Legendre rule with `points` nodes mapped to [lower, upper].
QuadratureRule gauss_legendre(int points, double lower = 0.0, double upper = 1.0);

}  // namespace mobsense
