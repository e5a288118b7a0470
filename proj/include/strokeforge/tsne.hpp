#pragma once

// Exact O(N^2) t-SNE plus the statistics used to read its scatter plots.

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "strokeforge/discriminator.hpp"
#include "strokeforge/raster.hpp"

namespace strokeforge {

using FeatureMatrix = std::vector<std::vector<double>>;
using Embedding2D = std::vector<std::array<double, 2>>;

struct TsneOptions {
  double perplexity = 30.0;
  int iterations = 1000;
  double learning_rate = 200.0;
  std::uint64_t seed = 1;
  int exaggeration_iters = 100;
  double exaggeration = 4.0;
  int momentum_switch = 250;
  double initial_momentum = 0.5;
  double final_momentum = 0.8;
};

struct EmbeddingRun {
  double perplexity = 0.0;
  int iterations = 0;
  double learning_rate = 0.0;
  Embedding2D points;
  /// KL(P || Q) with the un-exaggerated P after each iteration's update.
  std::vector<double> kl_trace;
  /// Rows whose bandwidth search hit the iteration cap.
  int bandwidth_fallbacks = 0;
};

struct Affinities {
  std::size_t n = 0;
  std::vector<double> p;  // row-major n x n
  std::vector<double> entropies;  // achieved per-row entropy (nats)
  int fallbacks = 0;
};

/// Per-row Gaussian conditionals with bandwidths binary-searched so each
/// row's entropy equals log(perplexity) within 1e-4.
Affinities conditional_affinities(const FeatureMatrix& x, double perplexity);
/// (P_cond + P_cond^T) / 2n: symmetric, sums to 1.
Affinities joint_affinities(const FeatureMatrix& x, double perplexity);
/// Student-t similarities of an embedding, normalized to sum to 1.
std::vector<double> student_t_affinities(const Embedding2D& y);
double kl_divergence(const std::vector<double>& p, const std::vector<double>& q);

/// Adds tiny deterministic jitter to exact duplicate rows.
FeatureMatrix jitter_duplicates(FeatureMatrix x, std::uint64_t seed, double amount = 1e-8);

/// Throws DataError for N < 10, D < 2 or perplexity >= N / 3.
EmbeddingRun tsne(const FeatureMatrix& features, const TsneOptions& opts);

/// Mean silhouette coefficient over all points (Euclidean).
double silhouette_score(const Embedding2D& points, const std::vector<int>& labels);
/// Mean Euclidean distance over distinct pairs within class `cls`; 0 when
/// the class has fewer than two points.
double mean_pairwise_distance(const Embedding2D& points, const std::vector<int>& labels, int cls);

// ---------------------------------------------------------------------------

enum class FeatureMode { Flat, DiscriminatorPenultimate };

/// Flat: the raster values (D = size^2). Discriminator mode: penultimate
/// dense activations; requires `model`.
FeatureMatrix feature_extract(const std::vector<RasterImage>& images, FeatureMode mode,
                              const Discriminator* model = nullptr);

struct ScatterStats {
  std::vector<std::string> class_names;
  std::vector<int> class_counts;
  std::vector<double> mean_pairwise_distance;
};

/// Writes an SVG scatter (one color per label) and returns the per-class
/// concentration statistics.
ScatterStats scatter_export(const EmbeddingRun& run, const std::vector<int>& labels,
                            const std::vector<std::string>& class_names,
                            const std::filesystem::path& svg_path);
std::string scatter_svg(const EmbeddingRun& run, const std::vector<int>& labels,
                        const std::vector<std::string>& class_names);

}  // namespace strokeforge
