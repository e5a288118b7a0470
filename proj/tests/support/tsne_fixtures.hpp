#pragma once

#include <random>

#include "strokeforge/tsne.hpp"

namespace sf_test {

using namespace strokeforge;

/// Two isotropic 64-D Gaussian blobs, unit variance, centers 10 apart along
/// every axis.
inline FeatureMatrix two_clusters(int per_cluster, std::uint64_t seed, std::vector<int>& labels) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, 1.0);
  FeatureMatrix x;
  labels.clear();
  for (int c = 0; c < 2; ++c)
    for (int i = 0; i < per_cluster; ++i) {
      std::vector<double> row(64);
      for (auto& v : row) v = n(rng) + 10.0 * c;
      x.push_back(std::move(row));
      labels.push_back(c);
    }
  return x;
}

/// Silhouette from first principles, used as the oracle for silhouette_score.
inline double silhouette_oracle(const Embedding2D& pts, const std::vector<int>& labels) {
  const std::size_t n = pts.size();
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double in_sum = 0.0, out_sum = 0.0;
    int in_n = 0, out_n = 0;
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      const double d = std::sqrt(std::pow(pts[i][0] - pts[j][0], 2) + std::pow(pts[i][1] - pts[j][1], 2));
      if (labels[j] == labels[i]) in_sum += d, ++in_n;
      else out_sum += d, ++out_n;
    }
    const double a = in_sum / in_n, b = out_sum / out_n;
    total += (b - a) / std::max(a, b);
  }
  return total / static_cast<double>(n);
}

}  // namespace sf_test
