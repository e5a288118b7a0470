#pragma once

// Central finite-difference oracle for the autograd engine.

#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "strokeforge/autograd.hpp"

namespace sf_test {

using namespace strokeforge;

struct GradCheck {
  double rel_error = 0.0;  // ||analytic - numeric|| / max(||analytic||, ||numeric||)
  double analytic_norm = 0.0;
  double numeric_norm = 0.0;
};

/// `loss` must rebuild the graph from the current values of `leaves` each
/// time it is called. Leaves are perturbed in place and restored.
inline GradCheck gradcheck(const std::function<Var()>& loss, std::vector<Var> leaves, double eps = 1e-3) {
  for (auto& l : leaves) l.zero_grad();
  backward(loss());
  std::vector<double> analytic, numeric;
  for (auto& l : leaves) {
    const Tensor g = l.grad();
    for (std::size_t i = 0; i < l.size(); ++i) analytic.push_back(g[i]);
  }
  NoGradGuard guard;
  for (auto& l : leaves) {
    Tensor& v = l.mutable_value();
    for (std::size_t i = 0; i < v.size(); ++i) {
      const float orig = v[i];
      v[i] = static_cast<float>(orig + eps);
      const double up = loss().value().item();
      v[i] = static_cast<float>(orig - eps);
      const double down = loss().value().item();
      v[i] = orig;
      // Divide by the step actually taken in float precision.
      const double h = static_cast<double>(static_cast<float>(orig + eps)) -
                       static_cast<double>(static_cast<float>(orig - eps));
      numeric.push_back((up - down) / h);
    }
  }
  double diff = 0.0, na = 0.0, nn = 0.0;
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    diff += (analytic[i] - numeric[i]) * (analytic[i] - numeric[i]);
    na += analytic[i] * analytic[i];
    nn += numeric[i] * numeric[i];
  }
  GradCheck r;
  r.analytic_norm = std::sqrt(na);
  r.numeric_norm = std::sqrt(nn);
  const double denom = std::max(r.analytic_norm, r.numeric_norm);
  r.rel_error = denom > 0.0 ? std::sqrt(diff) / denom : 0.0;
  return r;
}

/// Uniform values in [lo, hi], nudged at least `gap` away from zero (keeps
/// kinked ops like relu/elu off their kink).
inline Tensor random_tensor(Shape shape, std::uint64_t seed, float lo = -1.0f, float hi = 1.0f, float gap = 0.0f) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> u(lo, hi);
  Tensor t(std::move(shape));
  for (std::size_t i = 0; i < t.size(); ++i) {
    float v = u(rng);
    if (gap > 0.0f && std::abs(v) < gap) v = v < 0 ? v - gap : v + gap;
    t[i] = v;
  }
  return t;
}

/// sum(x * w) with fixed random weights, so every output element gets a
/// distinct upstream gradient.
inline Var weighted_sum(const Var& x, std::uint64_t seed) {
  return sum_all(x * constant(random_tensor(x.shape(), seed)));
}

}  // namespace sf_test
