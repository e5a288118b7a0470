#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "strokeforge/stroke.hpp"

namespace strokeforge {

inline constexpr int kRasterSize = 128;
inline constexpr int kRasterMargin = 5;

/// Square single-channel image; 1 = ink, 0 = background.
class RasterImage {
 public:
  explicit RasterImage(int size = kRasterSize) : size_(size), values_(static_cast<std::size_t>(size) * size, 0.0f) {}

  int size() const { return size_; }
  float at(int x, int y) const { return values_[static_cast<std::size_t>(y) * size_ + x]; }
  void set(int x, int y, float v) { values_[static_cast<std::size_t>(y) * size_ + x] = v; }
  std::span<const float> values() const { return values_; }
  std::size_t ink_count() const;
  /// [1, channels, size, size] with the image replicated per channel.
  Tensor to_tensor(int channels = 1) const;

  friend bool operator==(const RasterImage&, const RasterImage&) = default;

 private:
  int size_;
  std::vector<float> values_;
};

/// Channel normalization: 1 - v / 255. Throws DataError outside [0, 255].
float normalize_channel(int v);
std::array<float, 3> normalize_rgb(int r, int g, int b);
/// Mean of the three normalized channels.
float normalize_gray(int r, int g, int b);

/// Maps absolute sketch coordinates to pixel coordinates: the bounding box
/// is scaled uniformly into the square inside the margin and centered.
struct Viewport {
  double min_x = 0.0, min_y = 0.0;
  double scale = 1.0;
  double offset_x = 0.0, offset_y = 0.0;
  int size = kRasterSize;

  std::array<int, 2> to_pixel(double x, double y) const;
  friend bool operator==(const Viewport&, const Viewport&) = default;
};

/// Absolute locations of a sequence including the origin anchor, which
/// carries the start token's pen-down state.
std::vector<AbsolutePoint> anchored_points(const StrokeSequence& seq, double offset_scale);

Viewport fit_viewport(const std::vector<AbsolutePoint>& pts, int size = kRasterSize);

/// Renders with the bounding-box fit of the sequence itself. An empty
/// sequence renders only the origin anchor.
RasterImage render(const StrokeSequence& seq, double offset_scale, int size = kRasterSize);
/// Renders into a caller-supplied viewport (pixels outside are clipped).
RasterImage render_in_viewport(const StrokeSequence& seq, double offset_scale,
                               const Viewport& viewport);

/// Integer line from (x0,y0) to (x1,y1) inclusive, clipped to the image.
void draw_line(RasterImage& img, int x0, int y0, int x1, int y1);

/// Raster that follows a growing sequence point by point. New segments are
/// drawn in place while the bounding box is unchanged; any growth of the box
/// (and every 32 points) triggers a full re-render.
class IncrementalRaster {
 public:
  explicit IncrementalRaster(double offset_scale, int size = kRasterSize);

  void push(const Stroke5Point& p);
  const RasterImage& image() const { return image_; }
  const StrokeSequence& sequence() const { return seq_; }

 private:
  void rerender();

  double offset_scale_;
  int size_;
  StrokeSequence seq_;
  std::vector<AbsolutePoint> pts_;
  Viewport viewport_;
  RasterImage image_;
  int since_full_ = 0;
};

}  // namespace strokeforge
