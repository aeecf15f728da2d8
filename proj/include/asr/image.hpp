// RGB raster grids with box overlays, written as PNG.
#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "asr/scene.hpp"
#include "asr/trajectory.hpp"

namespace asr {

using Rgb = std::array<std::uint8_t, 3>;

struct RgbImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> data;  // row-major RGB

  RgbImage() = default;
  RgbImage(int w, int h, Rgb fill = {0, 0, 0});
  Rgb at(int x, int y) const;
  void set(int x, int y, Rgb c);
  /// Copies `src` with its top-left corner at (x0, y0), clipped.
  void blit(const RgbImage& src, int x0, int y0);
};

/// Overlay color of step t.
Rgb step_color(int t);

/// Grayscale canvas (values clamped to [0, 1]) magnified by an integer zoom.
RgbImage canvas_to_rgb(const Canvas& c, int zoom);

/// Pixel rectangle of a box outline on a canvas magnified by `zoom`:
/// columns [x0, x1] and rows [y0, y1], inclusive.
struct PixelRect {
  int x0 = 0, y0 = 0, x1 = 0, y1 = 0;
  friend bool operator==(const PixelRect&, const PixelRect&) = default;
};
PixelRect box_outline(const BoundingBox& b, int zoom);

/// Draws the outline of `b` (clipped to the image).
void draw_box(RgbImage& img, const BoundingBox& b, int zoom, Rgb color);

/// `left` and `right` next to each other, `gap` columns apart.
RgbImage side_by_side(const RgbImage& left, const RgbImage& right, int gap, Rgb background = {64, 64, 64});

/// Tiles equally sized cells left to right, top to bottom with a gap.
RgbImage tile(std::span<const RgbImage> cells, int columns, int gap, Rgb background = {64, 64, 64});

void write_png(const std::string& path, const RgbImage& img);
RgbImage read_png(const std::string& path);

}  // namespace asr
