#include "strokeforge/raster.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <limits>

namespace strokeforge {

std::size_t RasterImage::ink_count() const {
  return static_cast<std::size_t>(
      std::count_if(values_.begin(), values_.end(), [](float v) { return v > 0.0f; }));
}

Tensor RasterImage::to_tensor(int channels) const {
  Tensor t({1, channels, size_, size_});
  auto d = t.data();
  for (int c = 0; c < channels; ++c)
    std::copy(values_.begin(), values_.end(), d.begin() + static_cast<std::ptrdiff_t>(c) * size_ * size_);
  return t;
}

float normalize_channel(int v) {
  if (v < 0 || v > 255) throw DataError("channel value " + std::to_string(v) + " outside [0, 255]");
  return static_cast<float>(static_cast<double>(255 - v) / 255.0);
}

std::array<float, 3> normalize_rgb(int r, int g, int b) {
  return {normalize_channel(r), normalize_channel(g), normalize_channel(b)};
}

float normalize_gray(int r, int g, int b) {
  const auto c = normalize_rgb(r, g, b);
  return static_cast<float>((static_cast<double>(c[0]) + c[1] + c[2]) / 3.0);
}

std::array<int, 2> Viewport::to_pixel(double x, double y) const {
  return {static_cast<int>(std::lround(offset_x + (x - min_x) * scale)),
          static_cast<int>(std::lround(offset_y + (y - min_y) * scale))};
}

std::vector<AbsolutePoint> anchored_points(const StrokeSequence& seq, double offset_scale) {
  std::vector<AbsolutePoint> pts{{0.0, 0.0, kStartToken.pen}};
  auto rest = to_absolute(seq, offset_scale);
  pts.insert(pts.end(), rest.begin(), rest.end());
  return pts;
}

Viewport fit_viewport(const std::vector<AbsolutePoint>& pts, int size) {
  double min_x = std::numeric_limits<double>::infinity(), min_y = min_x;
  double max_x = -min_x, max_y = -min_x;
  for (const auto& p : pts) {
    min_x = std::min(min_x, p.x);
    min_y = std::min(min_y, p.y);
    max_x = std::max(max_x, p.x);
    max_y = std::max(max_y, p.y);
  }
  if (pts.empty()) min_x = min_y = max_x = max_y = 0.0;
  const double span = size - 2 * kRasterMargin - 1;
  const double w = max_x - min_x, h = max_y - min_y;
  const double extent = std::max(w, h);
  Viewport vp;
  vp.size = size;
  vp.min_x = min_x;
  vp.min_y = min_y;
  vp.scale = extent > 0.0 ? span / extent : 1.0;
  vp.offset_x = kRasterMargin + (span - w * vp.scale) / 2.0;
  vp.offset_y = kRasterMargin + (span - h * vp.scale) / 2.0;
  return vp;
}

void draw_line(RasterImage& img, int x0, int y0, int x1, int y1) {
  const int dx = std::abs(x1 - x0), sx = x0 < x1 ? 1 : -1;
  const int dy = -std::abs(y1 - y0), sy = y0 < y1 ? 1 : -1;
  int err = dx + dy;
  const int n = img.size();
  for (;;) {
    if (x0 >= 0 && x0 < n && y0 >= 0 && y0 < n) img.set(x0, y0, 1.0f);
    if (x0 == x1 && y0 == y1) break;
    const int e2 = 2 * err;
    if (e2 >= dy) {
      err += dy;
      x0 += sx;
    }
    if (e2 <= dx) {
      err += dx;
      y0 += sy;
    }
  }
}

namespace {

void draw_points(RasterImage& img, const std::vector<AbsolutePoint>& pts, const Viewport& vp) {
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const auto a = vp.to_pixel(pts[i].x, pts[i].y);
    if (i > 0 && pts[i - 1].pen == Pen::Down) {
      const auto b = vp.to_pixel(pts[i - 1].x, pts[i - 1].y);
      draw_line(img, b[0], b[1], a[0], a[1]);
    } else {
      draw_line(img, a[0], a[1], a[0], a[1]);
    }
  }
}

}  // namespace

RasterImage render(const StrokeSequence& seq, double offset_scale, int size) {
  const auto pts = anchored_points(seq, offset_scale);
  RasterImage img(size);
  draw_points(img, pts, fit_viewport(pts, size));
  return img;
}

RasterImage render_in_viewport(const StrokeSequence& seq, double offset_scale,
                               const Viewport& viewport) {
  RasterImage img(viewport.size);
  draw_points(img, anchored_points(seq, offset_scale), viewport);
  return img;
}

// ---------------------------------------------------------------------------

IncrementalRaster::IncrementalRaster(double offset_scale, int size)
    : offset_scale_(offset_scale), size_(size), image_(size) {
  rerender();
}

void IncrementalRaster::rerender() {
  pts_ = anchored_points(seq_, offset_scale_);
  viewport_ = fit_viewport(pts_, size_);
  image_ = RasterImage(size_);
  draw_points(image_, pts_, viewport_);
  since_full_ = 0;
}

void IncrementalRaster::push(const Stroke5Point& p) {
  seq_.points.push_back(p);
  const AbsolutePoint& last = pts_.back();
  const AbsolutePoint next{last.x + static_cast<double>(p.dx) * offset_scale_,
                           last.y + static_cast<double>(p.dy) * offset_scale_, p.pen};
  pts_.push_back(next);
  const Viewport vp = fit_viewport(pts_, size_);
  if (vp != viewport_ || ++since_full_ >= 32) {
    rerender();
    return;
  }
  const auto a = viewport_.to_pixel(next.x, next.y);
  if (last.pen == Pen::Down) {
    const auto b = viewport_.to_pixel(last.x, last.y);
    draw_line(image_, b[0], b[1], a[0], a[1]);
  } else {
    draw_line(image_, a[0], a[1], a[0], a[1]);
  }
}

}  // namespace strokeforge
