#pragma once

// Independent reference computations for the mixture head, shared by the
// unit tests and the acceptance runner.

#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include "strokeforge/mixture.hpp"

namespace sf_test {

using namespace strokeforge;

/// Random head whose sigmas stay in [0.4, 1.6] and correlations in (-0.6, 0.6).
inline std::vector<float> random_head(int m, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> u(-1.0f, 1.0f);
  std::vector<float> h(static_cast<std::size_t>(head_size(m)));
  for (int j = 0; j < m; ++j) {
    const auto k = static_cast<std::size_t>(j), mm = static_cast<std::size_t>(m);
    h[k] = u(rng);
    h[mm + k] = 1.5f * u(rng);
    h[2 * mm + k] = 1.5f * u(rng);
    h[3 * mm + k] = 0.45f * u(rng);
    h[4 * mm + k] = 0.45f * u(rng);
    h[5 * mm + k] = 0.7f * u(rng);
  }
  for (int k = 0; k < 3; ++k) h[static_cast<std::size_t>(6 * m + k)] = u(rng);
  return h;
}

/// Importance-sampled integral of the mixture density over the plane, with a
/// wide isotropic Gaussian proposal.
inline double monte_carlo_mass(const MixtureParams& p, int samples, std::uint64_t seed,
                               double proposal_sigma = 3.0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, proposal_sigma);
  const double two_pi = 2.0 * std::numbers::pi;
  double acc = 0.0;
  for (int i = 0; i < samples; ++i) {
    const double x = n(rng), y = n(rng);
    const double q = std::exp(-(x * x + y * y) / (2 * proposal_sigma * proposal_sigma)) /
                     (two_pi * proposal_sigma * proposal_sigma);
    acc += mixture_density(p, x, y) / q;
  }
  return acc / samples;
}

}  // namespace sf_test
