#include "strokeforge/tsne.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <random>
#include <sstream>

namespace strokeforge {

namespace {

std::vector<double> squared_distances(const FeatureMatrix& x) {
  const std::size_t n = x.size();
  std::vector<double> d(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < x[i].size(); ++k) {
        const double diff = x[i][k] - x[j][k];
        s += diff * diff;
      }
      d[i * n + j] = d[j * n + i] = s;
    }
  return d;
}

constexpr int kMaxBandwidthSteps = 200;
constexpr double kEntropyTolerance = 1e-4;

}  // namespace

Affinities conditional_affinities(const FeatureMatrix& x, double perplexity) {
  const std::size_t n = x.size();
  const std::vector<double> dist = squared_distances(x);
  const double target = std::log(perplexity);
  Affinities a;
  a.n = n;
  a.p.assign(n * n, 0.0);
  a.entropies.assign(n, 0.0);
  std::vector<double> row(n);
  for (std::size_t i = 0; i < n; ++i) {
    // Search over the precision beta = 1 / (2 sigma^2).
    double beta = 1.0, lo = 0.0, hi = std::numeric_limits<double>::infinity();
    double min_d = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < n; ++j)
      if (j != i) min_d = std::min(min_d, dist[i * n + j]);
    bool converged = false;
    double entropy = 0.0;
    for (int step = 0; step < kMaxBandwidthSteps; ++step) {
      double sum = 0.0, weighted = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        // Shift by the nearest distance so the largest term is exp(0).
        row[j] = j == i ? 0.0 : std::exp(-beta * (dist[i * n + j] - min_d));
        sum += row[j];
        weighted += row[j] * (dist[i * n + j] - min_d);
      }
      entropy = std::log(sum) + beta * weighted / sum;
      for (std::size_t j = 0; j < n; ++j) row[j] /= sum;
      const double diff = entropy - target;
      if (std::abs(diff) < kEntropyTolerance) {
        converged = true;
        break;
      }
      if (diff > 0.0) {
        lo = beta;
        beta = std::isinf(hi) ? beta * 2.0 : (beta + hi) / 2.0;
      } else {
        hi = beta;
        beta = (beta + lo) / 2.0;
      }
    }
    if (!converged) ++a.fallbacks;
    a.entropies[i] = entropy;
    std::copy(row.begin(), row.end(), a.p.begin() + static_cast<std::ptrdiff_t>(i * n));
  }
  return a;
}

Affinities joint_affinities(const FeatureMatrix& x, double perplexity) {
  Affinities a = conditional_affinities(x, perplexity);
  const std::size_t n = a.n;
  std::vector<double> sym(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      sym[i * n + j] = (a.p[i * n + j] + a.p[j * n + i]) / (2.0 * static_cast<double>(n));
  a.p = std::move(sym);
  return a;
}

std::vector<double> student_t_affinities(const Embedding2D& y) {
  const std::size_t n = y.size();
  std::vector<double> q(n * n, 0.0);
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      const double dx = y[i][0] - y[j][0], dy = y[i][1] - y[j][1];
      const double v = 1.0 / (1.0 + dx * dx + dy * dy);
      q[i * n + j] = q[j * n + i] = v;
      sum += 2.0 * v;
    }
  for (double& v : q) v /= sum;
  return q;
}

double kl_divergence(const std::vector<double>& p, const std::vector<double>& q) {
  double kl = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i)
    if (p[i] > 0.0) kl += p[i] * std::log(p[i] / std::max(q[i], 1e-300));
  return kl;
}

FeatureMatrix jitter_duplicates(FeatureMatrix x, std::uint64_t seed, double amount) {
  Rng rng(seed);
  std::uniform_real_distribution<double> u(-amount, amount);
  std::map<std::vector<double>, int> seen;
  for (auto& row : x) {
    if (seen[row]++ > 0) {
      for (double& v : row) v += u(rng);
    }
  }
  return x;
}

EmbeddingRun tsne(const FeatureMatrix& features, const TsneOptions& opts) {
  const std::size_t n = features.size();
  if (n < 10) throw DataError("t-SNE needs at least 10 points, got " + std::to_string(n));
  const std::size_t dims = features.front().size();
  if (dims < 2) throw DataError("t-SNE needs at least 2 feature dimensions");
  for (const auto& row : features)
    if (row.size() != dims) throw DataError("feature rows have inconsistent lengths");
  if (!(opts.perplexity > 0.0) || opts.perplexity >= static_cast<double>(n) / 3.0) {
    throw DataError("perplexity " + std::to_string(opts.perplexity) + " must be in (0, N/3) for N=" +
                    std::to_string(n));
  }
  if (opts.iterations < 1) throw DataError("t-SNE needs at least one iteration");

  const Affinities aff = joint_affinities(jitter_duplicates(features, opts.seed), opts.perplexity);
  const std::vector<double>& p = aff.p;

  EmbeddingRun run;
  run.perplexity = opts.perplexity;
  run.iterations = opts.iterations;
  run.learning_rate = opts.learning_rate;
  run.bandwidth_fallbacks = aff.fallbacks;

  Rng rng(opts.seed);
  std::normal_distribution<double> normal(0.0, 1e-4);
  Embedding2D y(n);
  for (auto& pt : y) pt = {normal(rng), normal(rng)};
  Embedding2D velocity(n, {0.0, 0.0});
  Embedding2D gains(n, {1.0, 1.0});
  std::vector<double> num(n * n);

  for (int it = 0; it < opts.iterations; ++it) {
    const double exag = it < opts.exaggeration_iters ? opts.exaggeration : 1.0;
    const double momentum = it < opts.momentum_switch ? opts.initial_momentum : opts.final_momentum;
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) {
        const double dx = y[i][0] - y[j][0], dy = y[i][1] - y[j][1];
        const double v = 1.0 / (1.0 + dx * dx + dy * dy);
        num[i * n + j] = num[j * n + i] = v;
        sum += 2.0 * v;
      }
    for (std::size_t i = 0; i < n; ++i) {
      std::array<double, 2> grad{0.0, 0.0};
      for (std::size_t j = 0; j < n; ++j) {
        if (j == i) continue;
        const double w = (exag * p[i * n + j] - num[i * n + j] / sum) * num[i * n + j];
        grad[0] += w * (y[i][0] - y[j][0]);
        grad[1] += w * (y[i][1] - y[j][1]);
      }
      for (int k = 0; k < 2; ++k) {
        const auto uk = static_cast<std::size_t>(k);
        const double g = 4.0 * grad[uk];
        gains[i][uk] = (g > 0.0) != (velocity[i][uk] > 0.0) ? gains[i][uk] + 0.2
                                                             : std::max(gains[i][uk] * 0.8, 0.01);
        velocity[i][uk] = momentum * velocity[i][uk] - opts.learning_rate * gains[i][uk] * g;
      }
    }
    std::array<double, 2> mean{0.0, 0.0};
    for (std::size_t i = 0; i < n; ++i) {
      y[i][0] += velocity[i][0];
      y[i][1] += velocity[i][1];
      mean[0] += y[i][0];
      mean[1] += y[i][1];
    }
    for (auto& pt : y) {
      pt[0] -= mean[0] / static_cast<double>(n);
      pt[1] -= mean[1] / static_cast<double>(n);
    }
    run.kl_trace.push_back(kl_divergence(p, student_t_affinities(y)));
    if (!std::isfinite(run.kl_trace.back())) {
      throw NonFiniteError("t-SNE diverged at iteration " + std::to_string(it));
    }
  }
  run.points = std::move(y);
  return run;
}

double silhouette_score(const Embedding2D& points, const std::vector<int>& labels) {
  const std::size_t n = points.size();
  if (labels.size() != n) throw DataError("silhouette: label count mismatch");
  std::map<int, int> sizes;
  for (int l : labels) ++sizes[l];
  if (sizes.size() < 2) throw DataError("silhouette needs at least two clusters");
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    std::map<int, double> sums;
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      sums[labels[j]] += std::hypot(points[i][0] - points[j][0], points[i][1] - points[j][1]);
    }
    const int own = labels[i];
    if (sizes[own] < 2) continue;  // singleton clusters score 0
    const double a = sums[own] / (sizes[own] - 1);
    double b = std::numeric_limits<double>::infinity();
    for (const auto& [l, s] : sums)
      if (l != own) b = std::min(b, s / sizes[l]);
    total += (b - a) / std::max(a, b);
  }
  return total / static_cast<double>(n);
}

double mean_pairwise_distance(const Embedding2D& points, const std::vector<int>& labels, int cls) {
  double sum = 0.0;
  std::size_t pairs = 0;
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (labels[i] != cls) continue;
    for (std::size_t j = i + 1; j < points.size(); ++j) {
      if (labels[j] != cls) continue;
      sum += std::hypot(points[i][0] - points[j][0], points[i][1] - points[j][1]);
      ++pairs;
    }
  }
  return pairs ? sum / static_cast<double>(pairs) : 0.0;
}

// ---------------------------------------------------------------------------

FeatureMatrix feature_extract(const std::vector<RasterImage>& images, FeatureMode mode,
                              const Discriminator* model) {
  if (mode == FeatureMode::DiscriminatorPenultimate && model == nullptr) {
    throw DataError("discriminator feature mode needs a trained discriminator checkpoint");
  }
  FeatureMatrix out;
  out.reserve(images.size());
  for (const auto& img : images) {
    if (mode == FeatureMode::Flat) {
      out.emplace_back(img.values().begin(), img.values().end());
    } else {
      const auto f = model->features(img);
      out.emplace_back(f.begin(), f.end());
    }
  }
  return out;
}

namespace {

constexpr std::array<const char*, 8> kPalette{"#d62728", "#ff7f0e", "#1f77b4", "#2ca02c",
                                              "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"};

std::string xml_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

}  // namespace

std::string scatter_svg(const EmbeddingRun& run, const std::vector<int>& labels,
                        const std::vector<std::string>& class_names) {
  if (labels.size() != run.points.size()) throw DataError("scatter: label count mismatch");
  double min_x = 0, max_x = 1, min_y = 0, max_y = 1;
  if (!run.points.empty()) {
    min_x = max_x = run.points[0][0];
    min_y = max_y = run.points[0][1];
    for (const auto& p : run.points) {
      min_x = std::min(min_x, p[0]);
      max_x = std::max(max_x, p[0]);
      min_y = std::min(min_y, p[1]);
      max_y = std::max(max_y, p[1]);
    }
  }
  const double size = 600.0, pad = 20.0;
  const double extent = std::max({max_x - min_x, max_y - min_y, 1e-12});
  const double s = (size - 2 * pad) / extent;
  std::ostringstream os;
  os << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
     << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << size << "\" height=\"" << size + 30
     << "\" viewBox=\"0 0 " << size << ' ' << size + 30 << "\">\n"
     << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  for (std::size_t i = 0; i < run.points.size(); ++i) {
    const int l = labels[i];
    os << "<circle cx=\"" << pad + (run.points[i][0] - min_x) * s << "\" cy=\""
       << pad + (run.points[i][1] - min_y) * s << "\" r=\"2.5\" fill=\""
       << kPalette[static_cast<std::size_t>(l) % kPalette.size()] << "\"/>\n";
  }
  for (std::size_t c = 0; c < class_names.size(); ++c) {
    os << "<text x=\"" << pad + 150.0 * static_cast<double>(c) << "\" y=\"" << size + 20
       << "\" font-size=\"14\" fill=\"" << kPalette[c % kPalette.size()] << "\">"
       << xml_escape(class_names[c]) << "</text>\n";
  }
  os << "</svg>\n";
  return os.str();
}

ScatterStats scatter_export(const EmbeddingRun& run, const std::vector<int>& labels,
                            const std::vector<std::string>& class_names,
                            const std::filesystem::path& svg_path) {
  const std::string svg = scatter_svg(run, labels, class_names);
  if (svg_path.has_parent_path()) std::filesystem::create_directories(svg_path.parent_path());
  std::ofstream out(svg_path);
  if (!out) throw Error("cannot write " + svg_path.string());
  out << svg;

  ScatterStats stats;
  stats.class_names = class_names;
  for (std::size_t c = 0; c < class_names.size(); ++c) {
    const int cls = static_cast<int>(c);
    stats.class_counts.push_back(static_cast<int>(std::count(labels.begin(), labels.end(), cls)));
    stats.mean_pairwise_distance.push_back(mean_pairwise_distance(run.points, labels, cls));
  }
  return stats;
}

}  // namespace strokeforge
