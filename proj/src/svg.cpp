#include "strokeforge/svg.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "strokeforge/raster.hpp"

namespace strokeforge {

std::vector<std::vector<AbsolutePoint>> pen_runs(const StrokeSequence& seq, double offset_scale) {
  std::vector<std::vector<AbsolutePoint>> runs;
  std::vector<AbsolutePoint> cur;
  for (const auto& p : anchored_points(seq, offset_scale)) {
    cur.push_back(p);
    if (p.pen != Pen::Down) {
      runs.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) runs.push_back(std::move(cur));
  return runs;
}

namespace {

struct Box {
  double min_x, min_y, max_x, max_y;
};

Box bbox(const std::vector<std::vector<AbsolutePoint>>& runs) {
  Box b{0, 0, 0, 0};
  bool first = true;
  for (const auto& run : runs)
    for (const auto& p : run) {
      if (first) {
        b = {p.x, p.y, p.x, p.y};
        first = false;
      }
      b.min_x = std::min(b.min_x, p.x);
      b.min_y = std::min(b.min_y, p.y);
      b.max_x = std::max(b.max_x, p.x);
      b.max_y = std::max(b.max_y, p.y);
    }
  return b;
}

void emit_runs(std::ostringstream& os, const std::vector<std::vector<AbsolutePoint>>& runs,
               double scale, double tx, double ty) {
  for (const auto& run : runs) {
    os << "<polyline fill=\"none\" stroke=\"black\" stroke-width=\"2\" "
          "stroke-linecap=\"round\" stroke-linejoin=\"round\" points=\"";
    for (std::size_t i = 0; i < run.size(); ++i) {
      if (i) os << ' ';
      os << run[i].x * scale + tx << ',' << run[i].y * scale + ty;
    }
    // A lone dot still needs two vertices to be visible.
    if (run.size() == 1) os << ' ' << run[0].x * scale + tx << ',' << run[0].y * scale + ty;
    os << "\"/>\n";
  }
}

}  // namespace

std::string sketch_to_svg(const StrokeSequence& seq, double offset_scale) {
  const auto runs = pen_runs(seq, offset_scale);
  const Box b = bbox(runs);
  const double pad = 2.0;
  const double w = b.max_x - b.min_x + 2 * pad, h = b.max_y - b.min_y + 2 * pad;
  std::ostringstream os;
  os << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
     << "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"" << b.min_x - pad << ' '
     << b.min_y - pad << ' ' << w << ' ' << h << "\" width=\"" << w << "\" height=\"" << h
     << "\">\n";
  emit_runs(os, runs, 1.0, 0.0, 0.0);
  os << "</svg>\n";
  return os.str();
}

std::string grid_svg(const std::vector<StrokeSequence>& seqs, double offset_scale, int columns,
                     double cell) {
  columns = std::max(columns, 1);
  const int rows = (static_cast<int>(seqs.size()) + columns - 1) / columns;
  const double width = cell * columns, height = cell * std::max(rows, 1);
  std::ostringstream os;
  os << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
     << "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 " << width << ' ' << height
     << "\" width=\"" << width << "\" height=\"" << height << "\">\n"
     << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  const double margin = cell * 0.08;
  for (std::size_t i = 0; i < seqs.size(); ++i) {
    const auto runs = pen_runs(seqs[i], offset_scale);
    const Box b = bbox(runs);
    const double extent = std::max({b.max_x - b.min_x, b.max_y - b.min_y, 1e-9});
    const double s = (cell - 2 * margin) / extent;
    const double cx = static_cast<double>(static_cast<int>(i) % columns) * cell;
    const double cy = static_cast<double>(static_cast<int>(i) / columns) * cell;
    const double tx = cx + (cell - (b.max_x - b.min_x) * s) / 2 - b.min_x * s;
    const double ty = cy + (cell - (b.max_y - b.min_y) * s) / 2 - b.min_y * s;
    os << "<g>\n";
    emit_runs(os, runs, s, tx, ty);
    os << "</g>\n";
  }
  os << "</svg>\n";
  return os.str();
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
  if (!out) throw Error("write failed: " + path.string());
}

}  // namespace strokeforge
