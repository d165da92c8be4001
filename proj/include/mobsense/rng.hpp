#pragma once

#include <cstdint>
#include <random>

#include "mobsense/types.hpp"

namespace mobsense {

/// splitmix64 finalizer; used to derive independent stream seeds.
std::uint64_t mix64(std::uint64_t x);

/// Per-trial random stream keyed by (master seed, stream index). Streams do
/// not depend on the order in which they are created or consumed.
class RngStream {
 public:
  RngStream(std::uint64_t master_seed, std::uint64_t stream_index);

  double normal() { return normal_(engine_); }
  Vector normal(Eigen::Index n);

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_;
};

}  // namespace mobsense
