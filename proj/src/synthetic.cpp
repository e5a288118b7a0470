#include "strokeforge/synthetic.hpp"

#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include "json.hpp"
#include "strokeforge/raster.hpp"

namespace strokeforge {

std::string drawing_to_ndjson(const Drawing& d, const std::string& key_id, const std::string& word) {
  nlohmann::json strokes = nlohmann::json::array();
  for (const auto& s : d) {
    nlohmann::json xs = nlohmann::json::array(), ys = nlohmann::json::array();
    for (const auto& p : s) {
      xs.push_back(std::lround(p[0]));
      ys.push_back(std::lround(p[1]));
    }
    strokes.push_back({xs, ys});
  }
  return nlohmann::json{{"word", word}, {"key_id", key_id}, {"drawing", strokes}}.dump();
}

namespace {

using Pt = std::array<double, 2>;

std::vector<Pt> arc(Pt c, double rx, double ry, double a0, double a1, int n, Rng& rng, double jitter) {
  std::normal_distribution<double> j(0.0, jitter);
  std::vector<Pt> out;
  for (int i = 0; i <= n; ++i) {
    const double a = a0 + (a1 - a0) * i / n;
    out.push_back({c[0] + rx * std::cos(a) + j(rng), c[1] + ry * std::sin(a) + j(rng)});
  }
  return out;
}

}  // namespace

Drawing cat_doodle(Rng& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const double pi = std::numbers::pi;
  const Pt c{128.0 + 10 * u(rng), 140.0 + 10 * u(rng)};
  const double r = 70.0 + 10 * u(rng);
  const double squash = 0.85 + 0.1 * u(rng);
  Drawing d;
  d.push_back(arc(c, r, r * squash, 0.0, 2 * pi, 12, rng, 2.0));
  for (double side : {-1.0, 1.0}) {
    const double base = side * (0.45 + 0.05 * u(rng));
    const Pt left{c[0] + r * std::sin(base - 0.25), c[1] - r * squash * std::cos(base - 0.25)};
    const Pt right{c[0] + r * std::sin(base + 0.25), c[1] - r * squash * std::cos(base + 0.25)};
    const Pt tip{c[0] + r * 1.35 * std::sin(base), c[1] - r * squash * (1.45 + 0.1 * u(rng))};
    d.push_back({left, tip, right});
  }
  for (double side : {-1.0, 1.0}) {
    const Pt e{c[0] + side * r * 0.38, c[1] - r * 0.2};
    d.push_back({{e[0] - 4, e[1] + 2 * u(rng)}, {e[0] + 4, e[1] + 2 * u(rng)}});
  }
  d.push_back({{c[0] - 6, c[1] + r * 0.15}, {c[0], c[1] + r * 0.25}, {c[0] + 6, c[1] + r * 0.15}});
  for (double side : {-1.0, 1.0})
    for (double tilt : {-0.15, 0.15}) {
      const Pt s{c[0] + side * r * 0.2, c[1] + r * 0.25};
      const Pt e{c[0] + side * r * (1.1 + 0.1 * u(rng)), c[1] + r * (0.25 + tilt + 0.05 * u(rng))};
      d.push_back({s, e});
    }
  return d;
}

std::string cat_ndjson(int count, std::uint64_t seed) {
  Rng rng(seed);
  std::ostringstream os;
  for (int i = 0; i < count; ++i) os << drawing_to_ndjson(cat_doodle(rng), "cat" + std::to_string(i), "cat") << '\n';
  return os.str();
}

Drawing shape_doodle(int label, Rng& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const double pi = std::numbers::pi;
  const double angle = pi * u(rng);
  const Pt c{128.0, 128.0};
  auto segment = [&](double a, double len) {
    return std::vector<Pt>{{c[0] - len * std::cos(a) + 3 * u(rng), c[1] - len * std::sin(a) + 3 * u(rng)},
                           {c[0] + len * std::cos(a) + 3 * u(rng), c[1] + len * std::sin(a) + 3 * u(rng)}};
  };
  switch (label) {
    case 0: {
      const double r = 60.0 + 20 * u(rng);
      return {arc(c, r, r * (0.8 + 0.2 * u(rng)), angle, angle + 2 * pi, 16, rng, 1.5)};
    }
    case 1:
      return {segment(angle, 60.0 + 20 * u(rng))};
    case 2:
      return {segment(angle, 60.0), segment(angle + pi / 2 + 0.2 * u(rng), 60.0 + 10 * u(rng))};
    default:
      throw DataError("shape label must be 0, 1 or 2");
  }
}

std::vector<LabeledImage> shape_fixture(int per_class, std::uint64_t seed, int size) {
  Rng rng(seed);
  std::vector<LabeledImage> out;
  for (int i = 0; i < per_class; ++i)
    for (int label = 0; label < kNumClasses; ++label) {
      const auto parsed = parse_ndjson_text(drawing_to_ndjson(shape_doodle(label, rng), "s", "shape"));
      if (parsed.sequences.size() != 1) throw Error("shape fixture produced an unusable drawing");
      out.push_back({render(parsed.sequences[0], 1.0, size), label});
    }
  return out;
}

}  // namespace strokeforge
