#pragma once

// Procedural sketches for demos and tests: cat-like doodles in QuickDraw's
// ndjson layout, and a three-shape raster set for classifier checks.

#include <cstdint>
#include <string>
#include <vector>

#include "strokeforge/discriminator.hpp"
#include "strokeforge/stroke.hpp"

namespace strokeforge {

/// One drawing: strokes of absolute (x, y) points.
using Drawing = std::vector<std::vector<std::array<double, 2>>>;

std::string drawing_to_ndjson(const Drawing& d, const std::string& key_id, const std::string& word);

/// Head outline, ears, eyes and whiskers with per-sketch jitter; every
/// drawing yields 20-40 stroke-5 points.
Drawing cat_doodle(Rng& rng);
std::string cat_ndjson(int count, std::uint64_t seed);

/// label 0: circle, 1: single line, 2: cross. Random rotation and jitter.
Drawing shape_doodle(int label, Rng& rng);
/// `per_class` rendered images of each label, interleaved by label.
std::vector<LabeledImage> shape_fixture(int per_class, std::uint64_t seed, int size = kRasterSize);

}  // namespace strokeforge
