#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "strokeforge/tsne.hpp"
#include "support/tsne_fixtures.hpp"

using namespace strokeforge;
using namespace sf_test;

TEST_CASE("bandwidth search hits the target entropy") {
  std::vector<int> labels;
  const FeatureMatrix x = two_clusters(30, 1, labels);
  const Affinities a = conditional_affinities(x, 10.0);
  CHECK(a.fallbacks == 0);
  for (double h : a.entropies) CHECK(std::abs(h - std::log(10.0)) < 1e-4);
  // Independent entropy from the returned conditional rows.
  for (std::size_t i = 0; i < a.n; ++i) {
    double sum = 0.0, h = 0.0;
    for (std::size_t j = 0; j < a.n; ++j) {
      const double p = a.p[i * a.n + j];
      sum += p;
      if (p > 0) h -= p * std::log(p);
    }
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(std::abs(h - std::log(10.0)) < 1e-4);
    CHECK(a.p[i * a.n + i] == 0.0);
  }
}

TEST_CASE("joint P and Student-t Q are symmetric, nonnegative and normalized") {
  std::vector<int> labels;
  const FeatureMatrix x = two_clusters(15, 2, labels);
  const Affinities a = joint_affinities(x, 5.0);
  Embedding2D y;
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n;
  for (std::size_t i = 0; i < x.size(); ++i) y.push_back({n(rng), n(rng)});
  const auto q = student_t_affinities(y);
  for (const auto* m : {&a.p, &q}) {
    double s = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i)
      for (std::size_t j = 0; j < x.size(); ++j) {
        CHECK((*m)[i * x.size() + j] >= 0.0);
        CHECK((*m)[i * x.size() + j] == doctest::Approx((*m)[j * x.size() + i]));
        s += (*m)[i * x.size() + j];
      }
    CHECK(s == doctest::Approx(1.0).epsilon(1e-9));
  }
}

TEST_CASE("two separated clusters stay separated") {
  std::vector<int> labels;
  const FeatureMatrix x = two_clusters(50, 4, labels);
  TsneOptions o;
  o.perplexity = 20;
  o.iterations = 400;
  o.seed = 5;
  const EmbeddingRun run = tsne(x, o);
  CHECK(run.points.size() == 100);
  const double s = silhouette_score(run.points, labels);
  CHECK(s == doctest::Approx(silhouette_oracle(run.points, labels)).epsilon(1e-9));
  CHECK(s > 0.5);
  CHECK(run.kl_trace.back() < run.kl_trace[100]);
  CHECK(run.kl_trace.size() == 400);
}

TEST_CASE("same seed gives the same embedding") {
  std::vector<int> labels;
  const FeatureMatrix x = two_clusters(12, 6, labels);
  TsneOptions o;
  o.perplexity = 5;
  o.iterations = 150;
  const auto a = tsne(x, o), b = tsne(x, o);
  CHECK(a.points == b.points);
  o.seed = 2;
  CHECK(tsne(x, o).points != a.points);
}

TEST_CASE("identical rows are jittered and the output stays finite") {
  const FeatureMatrix x(10, std::vector<double>{1.0, 2.0, 3.0});
  TsneOptions o;
  o.perplexity = 3;
  o.iterations = 200;
  const EmbeddingRun run = tsne(x, o);
  for (const auto& p : run.points) CHECK((std::isfinite(p[0]) && std::isfinite(p[1])));
}

TEST_CASE("argument checks") {
  std::vector<int> labels;
  const FeatureMatrix x = two_clusters(15, 7, labels);
  TsneOptions o;
  o.perplexity = 10;  // N / 3 = 10
  CHECK_THROWS_AS(tsne(x, o), DataError);
  o.perplexity = 5;
  CHECK_THROWS_AS(tsne(FeatureMatrix(x.begin(), x.begin() + 9), o), DataError);
  CHECK_THROWS_AS(tsne(FeatureMatrix(12, std::vector<double>{1.0}), o), DataError);
}

TEST_CASE("feature extraction") {
  std::vector<RasterImage> imgs(2);
  FeatureMatrix f = feature_extract(imgs, FeatureMode::Flat);
  CHECK(f[0].size() == 16384);
  for (double v : f[0]) CHECK(v == 0.0);
  CHECK(f[0] == f[1]);
  CHECK_THROWS_AS(feature_extract(imgs, FeatureMode::DiscriminatorPenultimate), DataError);
  Discriminator d(DiscriminatorConfig{}, 1);
  CHECK(feature_extract({imgs[0]}, FeatureMode::DiscriminatorPenultimate, &d)[0].size() == 128);
}

TEST_CASE("scatter export: concentration statistic and svg output") {
  // Tight cluster around (0,0), spread cluster around (10,10).
  std::mt19937_64 rng(8);
  std::normal_distribution<double> n;
  EmbeddingRun run;
  std::vector<int> labels;
  for (int i = 0; i < 40; ++i) {
    run.points.push_back({0.2 * n(rng), 0.2 * n(rng)});
    labels.push_back(0);
    run.points.push_back({10 + 3 * n(rng), 10 + 3 * n(rng)});
    labels.push_back(1);
  }
  const auto path = std::filesystem::temp_directory_path() / "strokeforge_test_tsne" / "scatter.svg";
  const ScatterStats st = scatter_export(run, labels, {"tight", "spread"}, path);
  CHECK(st.mean_pairwise_distance[0] < st.mean_pairwise_distance[1]);
  CHECK(st.class_counts[0] == 40);
  std::ifstream in(path);
  std::stringstream s;
  s << in.rdbuf();
  CHECK(s.str().find("<svg") != std::string::npos);
  CHECK(s.str().find("</svg>") != std::string::npos);

  // An empty second class does not break the plot.
  std::vector<int> all_zero(run.points.size(), 0);
  const ScatterStats st2 = scatter_export(run, all_zero, {"only", "empty"}, path);
  CHECK(st2.class_counts[1] == 0);
  CHECK(st2.mean_pairwise_distance[1] == 0.0);
}
