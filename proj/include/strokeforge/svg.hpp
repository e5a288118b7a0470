#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "strokeforge/stroke.hpp"

namespace strokeforge {

/// Pen-down runs of a sketch in absolute coordinates (origin anchor included).
std::vector<std::vector<AbsolutePoint>> pen_runs(const StrokeSequence& seq, double offset_scale);

/// One <polyline> per pen-down run, stroke width 2, viewBox from the bbox.
std::string sketch_to_svg(const StrokeSequence& seq, double offset_scale);
/// Sketches laid out on a grid of `columns`, each cell fitted to its own bbox.
std::string grid_svg(const std::vector<StrokeSequence>& seqs, double offset_scale, int columns = 10,
                     double cell = 100.0);

void write_text_file(const std::filesystem::path& path, const std::string& text);

}  // namespace strokeforge
