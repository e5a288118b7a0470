// Acceptance runner: one PASS/FAIL line per criterion, non-zero exit if any fail.

#include <bit>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <numbers>
#include <sstream>
#include <string>

#include "strokeforge/checkpoint.hpp"
#include "strokeforge/discriminator.hpp"
#include "strokeforge/mixture.hpp"
#include "strokeforge/raster.hpp"
#include "strokeforge/refiner.hpp"
#include "strokeforge/sketch_vae.hpp"
#include "strokeforge/synthetic.hpp"
#include "strokeforge/tsne.hpp"
#include "support/fixtures.hpp"
#include "support/mixture_oracles.hpp"
#include "support/primitive_checks.hpp"
#include "support/tsne_fixtures.hpp"

using namespace strokeforge;
using namespace sf_test;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

// Shared by criteria 5 and 11: the baseline trained on eight sketches.
struct Trained {
  Normalized data;
  std::optional<SketchVae> baseline;
  std::optional<CnnRefiner> refiner;
};
Trained g_trained;

// ---------------------------------------------------------------------------

Outcome gradient_correctness() {
  const auto t0 = Clock::now();
  double worst = 0.0;
  std::string worst_name;
  int n = 0;
  for (const auto& c : primitive_checks()) {
    ++n;
    if (c.result.rel_error > worst || c.result.analytic_norm == 0.0) {
      worst = c.result.analytic_norm == 0.0 ? 1.0 : c.result.rel_error;
      worst_name = c.name;
    }
  }
  const double composite = refiner_composite_check().rel_error;
  const double secs = seconds_since(t0);
  const bool ok = worst < 1e-3 && composite < 1e-3 && secs < 120.0;
  return {ok, std::to_string(n) + " primitives, worst " + worst_name + " rel err " + fmt("%.2e", worst) +
                  "; refine() rel err " + fmt("%.2e", composite) + "; " + fmt("%.1f", secs) + " s"};
}

Outcome loss_analytics() {
  std::vector<float> zero_head(static_cast<std::size_t>(head_size(1)), 0.0f);
  const MixtureParams std_normal = parameterize(zero_head, 1);
  const double nll = gmm_nll(std_normal, 0.0, 0.0);
  const double nll_err = std::abs(nll - std::log(2.0 * std::numbers::pi));

  const double kl = loss_kl(std::vector<float>(16, 0.0f), std::vector<float>(16, 1.0f));

  const int s_max = 20;
  StrokeSequence t;
  for (int i = 0; i < 7; ++i) t.points.push_back({0.5f, -0.25f, i == 6 ? Pen::SketchEnd : Pen::Down});
  const double lp = loss_pen(std::vector<MixtureParams>(s_max, std_normal), t, s_max);
  const double lp_err = std::abs(lp - std::log(3.0));

  std::vector<MixtureParams> steps;
  for (int i = 0; i < s_max; ++i) steps.push_back(parameterize(random_head(3, 200 + i), 3));
  const double base = loss_offsets(steps, t, s_max);
  auto perturbed = steps;
  for (int i = t.stop_index(); i < s_max; ++i)
    perturbed[static_cast<std::size_t>(i)] = parameterize(random_head(3, 900 + i), 3);
  const double delta = loss_offsets(perturbed, t, s_max) - base;

  const bool ok = nll_err < 1e-5 && std::abs(kl) < 1e-9 && lp_err < 1e-6 && delta == 0.0;
  return {ok, "|nll-log2pi|=" + fmt("%.1e", nll_err) + " KL=" + fmt("%.1e", kl) + " |L_P-log3|=" +
                  fmt("%.1e", lp_err) + " truncation delta=" + fmt("%g", delta)};
}

Outcome mixture_normalization() {
  const MixtureParams p = parameterize(random_head(3, 31), 3);
  const double mass = monte_carlo_mass(p, 100000, 32);
  return {std::abs(mass - 1.0) < 0.02, "integral " + fmt("%.4f", mass) + " from 1e5 samples"};
}

Outcome baseline_recovery() {
  SketchVae vae(desk_vae(48), 41);
  CnnRefiner refiner(RefinerConfig::desk(), 42);
  int identical = 0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    Rng a(seed), b(seed);
    const auto z = sample_prior(vae.config().latent, a);
    sample_prior(vae.config().latent, b);
    const StrokeSequence plain = sample_sketch(vae, z, a);
    const StrokeSequence refined = refined_sample(vae, refiner, z, 1.0, 1.0f, b);
    bool same_bytes = plain.size() == refined.size();
    for (std::size_t i = 0; same_bytes && i < plain.size(); ++i) {
      const auto &p = plain.points[i], &q = refined.points[i];
      same_bytes = std::bit_cast<std::uint32_t>(p.dx) == std::bit_cast<std::uint32_t>(q.dx) &&
                   std::bit_cast<std::uint32_t>(p.dy) == std::bit_cast<std::uint32_t>(q.dy) && p.pen == q.pen;
    }
    identical += same_bytes;
  }
  return {identical == 20, std::to_string(identical) + "/20 seeds bit-identical (dx, dy, pen)"};
}

Outcome overfit_regression() {
  auto& T = g_trained;
  T.data = cat_set(8, 51);
  T.baseline.emplace(desk_vae(48), 52);
  T.baseline->set_offset_scale(T.data.offset_scale);

  auto t0 = Clock::now();
  BaselineTrainer bt(*T.baseline, {500, 8, 3e-3f, 53});
  const LossRecord b_before = bt.evaluate(T.data.sequences, 54);
  bt.run(T.data.sequences);
  const LossRecord b_after = bt.evaluate(T.data.sequences, 54);
  const double b_secs = seconds_since(t0);
  // Mixture NLL can go negative, so the drop is measured against |initial|.
  const double b_drop = ((b_before.offset + b_before.pen) - (b_after.offset + b_after.pen)) /
                        std::abs(b_before.offset + b_before.pen);

  const auto frozen_params = T.baseline->params().snapshot();
  T.refiner.emplace(RefinerConfig::desk(), 55);
  t0 = Clock::now();
  RefinerTrainer rt(*T.refiner, *T.baseline, {500, 8, 1e-3f, 56});
  const LossRecord r_before = rt.evaluate(T.data.sequences, 57);
  rt.run(T.data.sequences);
  const LossRecord r_after = rt.evaluate(T.data.sequences, 57);
  const double r_secs = seconds_since(t0);
  const double r_drop = (r_before.total - r_after.total) / std::abs(r_before.total);
  const bool frozen = T.baseline->params().snapshot() == frozen_params;

  const bool ok = b_drop >= 0.5 && r_drop >= 0.3 && frozen && b_secs < 600 && r_secs < 600;
  return {ok, "baseline L_S+L_P " + fmt("%.3f", b_before.offset + b_before.pen) + " -> " +
                  fmt("%.3f", b_after.offset + b_after.pen) + " (" + fmt("%.0f", 100 * b_drop) + "% of |initial| removed, " +
                  fmt("%.0f", b_secs) + " s); refiner blended " + fmt("%.3f", r_before.total) + " -> " +
                  fmt("%.3f", r_after.total) + " (" + fmt("%.0f", 100 * r_drop) + "% of |initial| removed, " +
                  fmt("%.0f", r_secs) + " s); baseline " + (frozen ? "bit-identical" : "CHANGED")};
}

Outcome discriminator_sanity() {
  const auto t0 = Clock::now();
  const auto data = shape_fixture(100, 61);
  std::vector<LabeledImage> train(data.begin(), data.begin() + 240), val(data.begin() + 240, data.end());
  Discriminator d(DiscriminatorConfig::desk(), 62);
  const auto log = train_discriminator(d, train, val, {10, 16, 1e-3f, 63});
  const ConfusionMatrix cm = confusion(d, val);
  double worst_row = 0.0;
  for (const auto& row : cm.percent) {
    double s = 0.0;
    for (double v : row) s += v;
    worst_row = std::max(worst_row, std::abs(s - 100.0));
  }
  const double secs = seconds_since(t0);
  const double acc = log.back().val_accuracy;
  return {acc >= 90.0 && worst_row <= 0.1 && secs < 300,
          "validation accuracy " + fmt("%.1f", acc) + "% on 60 held-out of 300; max row-sum error " +
              fmt("%.1e", worst_row) + "; " + fmt("%.0f", secs) + " s"};
}

Outcome table_golden() {
  const auto preds = read_predictions_csv(read_file(SF_FIXTURE_DIR "/reference_predictions.csv"));
  const std::string table = confusion_from_predictions(preds).to_table();
  const std::string expected = read_file(SF_FIXTURE_DIR "/reference_table.txt");
  return {table == expected, table == expected ? "printed matrix matches the stored table"
                                               : "printed matrix differs:\n" + table};
}

Outcome tsne_criterion() {
  std::vector<int> labels;
  const FeatureMatrix x = two_clusters(50, 71, labels);
  TsneOptions o;
  o.perplexity = 30;
  o.iterations = 1000;
  o.seed = 72;
  const EmbeddingRun a = tsne(x, o);
  const EmbeddingRun b = tsne(x, o);
  const double sil = silhouette_score(a.points, labels);
  const double kl100 = a.kl_trace[100], kl_final = a.kl_trace.back();
  const bool ok = sil > 0.5 && kl_final < kl100 && a.points == b.points;
  return {ok, "silhouette " + fmt("%.3f", sil) + "; KL iter100 " + fmt("%.4f", kl100) + " -> final " +
                  fmt("%.4f", kl_final) + "; rerun " + (a.points == b.points ? "identical" : "DIFFERS")};
}

Outcome rasterizer() {
  int exact = 0;
  for (int v = 0; v <= 255; ++v) {
    const float f = normalize_channel(v);
    const long double want = static_cast<long double>(255 - v) / 255.0L;
    const long double err = std::fabs(static_cast<long double>(f) - want);
    const bool nearest = std::fabs(static_cast<long double>(std::nextafter(f, -1.0f)) - want) >= err &&
                         std::fabs(static_cast<long double>(std::nextafter(f, 2.0f)) - want) >= err;
    exact += nearest;
  }
  StrokeSequence single;
  single.points = {{0, 0, Pen::SketchEnd}};
  const std::size_t lit = render(single, 1.0).ink_count();

  Rng rng(81);
  int invariant = 0;
  for (int i = 0; i < 20; ++i) {
    Drawing d = cat_doodle(rng), moved = d;
    for (auto& s : moved)
      for (auto& p : s) p = {p[0] - 53.0, p[1] + 91.0};
    const auto a = parse_ndjson_text(drawing_to_ndjson(d, "a", "cat")).sequences.at(0);
    const auto b = parse_ndjson_text(drawing_to_ndjson(moved, "b", "cat")).sequences.at(0);
    invariant += render(a, 1.0) == render(b, 1.0);
  }
  return {exact == 256 && lit == 1 && invariant == 20,
          std::to_string(exact) + "/256 gray levels exact; single point lights " + std::to_string(lit) +
              " pixel; " + std::to_string(invariant) + "/20 translated drawings identical"};
}

Outcome data_roundtrip() {
  const ParseResult r = parse_ndjson(SF_FIXTURE_DIR "/cats100.ndjson");
  int exact = 0, one_hot_bad = 0;
  std::size_t points = 0;
  const Normalized n = normalize_offsets(r.sequences);
  for (std::size_t i = 0; i < r.sequences.size(); ++i) {
    const auto& s = r.sequences[i];
    exact += from_absolute(to_absolute(s)).points == s.points &&
             from_absolute(to_absolute(n.sequences[i])).points == n.sequences[i].points;
    for (const auto& p : s.points) {
      const auto a = p.as_array();
      one_hot_bad += !(a[2] + a[3] + a[4] == 1.0f && (a[2] == 0 || a[2] == 1) && (a[3] == 0 || a[3] == 1));
      ++points;
    }
  }
  return {exact == 100 && one_hot_bad == 0 && r.sequences.size() == 100,
          std::to_string(exact) + "/100 sketches round-trip exactly (raw and normalized); " +
              std::to_string(one_hot_bad) + " one-hot violations in " + std::to_string(points) + " points"};
}

Outcome performance_ratio() {
  auto& T = g_trained;
  if (!T.baseline || !T.refiner) return {false, "trained models unavailable"};
  double t_base = 0.0, t_ref = 0.0;
  std::size_t pts_base = 0, pts_ref = 0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    Rng a(seed), b(seed);
    const auto z = sample_prior(T.baseline->config().latent, a);
    sample_prior(T.baseline->config().latent, b);
    auto t0 = Clock::now();
    pts_base += sample_sketch(*T.baseline, z, a).size();
    t_base += seconds_since(t0);
    t0 = Clock::now();
    pts_ref += refined_sample(*T.baseline, *T.refiner, z, 1.0, 0.5f, b).size();
    t_ref += seconds_since(t0);
  }
  // Per generated point, so that differing sketch lengths do not skew the ratio.
  const double ratio = (t_ref / static_cast<double>(pts_ref)) / (t_base / static_cast<double>(pts_base));
  return {ratio > 1.0, "refined/baseline time per point = " + fmt("%.1f", ratio) + "x (" +
                           fmt("%.3f", t_ref) + " s vs " + fmt("%.3f", t_base) + " s over 20 seeds)"};
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
      {"gradient correctness", gradient_correctness},
      {"loss analytics", loss_analytics},
      {"mixture normalization", mixture_normalization},
      {"baseline recovery at alpha=1", baseline_recovery},
      {"overfit regression", overfit_regression},
      {"discriminator sanity", discriminator_sanity},
      {"confusion table golden", table_golden},
      {"t-SNE", tsne_criterion},
      {"rasterizer", rasterizer},
      {"data round-trip", data_roundtrip},
      {"performance sanity", performance_ratio},
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failures += !o.pass;
    std::printf("[%s] %2zu %s: %s\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first, o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%zu/%zu criteria passed\n", criteria.size() - static_cast<std::size_t>(failures), criteria.size());
  return failures == 0 ? 0 : 1;
}
