#pragma once

#include <cstdint>
#include <random>

#include <Eigen/Core>

namespace kgrec {

using Rng = std::mt19937_64;

// Stage sub-seeds are fixed offsets from the run seed.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stage) {
  return seed + 0x9E3779B97F4A7C15ULL * stage;
}

inline Eigen::VectorXd gaussian_vector(Eigen::Index n, double stddev, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = stddev * normal(rng);
  return v;
}

inline double uniform(double lo, double hi, Rng& rng) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

}  // namespace kgrec
