#include "asr/image.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstring>

#include "asr/errors.hpp"

namespace asr {

RgbImage::RgbImage(int w, int h, Rgb fill) : width(w), height(h) {
  if (w < 0 || h < 0) throw ContractViolation("RgbImage: negative size");
  data.resize(static_cast<std::size_t>(w) * static_cast<std::size_t>(h) * 3);
  for (std::size_t i = 0; i < data.size(); i += 3) std::memcpy(&data[i], fill.data(), 3);
}

Rgb RgbImage::at(int x, int y) const {
  if (x < 0 || y < 0 || x >= width || y >= height) throw ContractViolation("RgbImage::at: out of range");
  const std::size_t i = (static_cast<std::size_t>(y) * static_cast<std::size_t>(width) + static_cast<std::size_t>(x)) * 3;
  return {data[i], data[i + 1], data[i + 2]};
}

void RgbImage::set(int x, int y, Rgb c) {
  if (x < 0 || y < 0 || x >= width || y >= height) return;
  const std::size_t i = (static_cast<std::size_t>(y) * static_cast<std::size_t>(width) + static_cast<std::size_t>(x)) * 3;
  std::memcpy(&data[i], c.data(), 3);
}

void RgbImage::blit(const RgbImage& src, int x0, int y0) {
  for (int y = 0; y < src.height; ++y)
    for (int x = 0; x < src.width; ++x) set(x0 + x, y0 + y, src.at(x, y));
}

Rgb step_color(int t) {
  static const Rgb colors[] = {{230, 40, 40}, {40, 200, 40}, {60, 120, 255}, {240, 220, 30}, {220, 60, 220}};
  return colors[static_cast<std::size_t>(t) % 5];
}

RgbImage canvas_to_rgb(const Canvas& c, int zoom) {
  if (zoom < 1) throw ContractViolation("canvas_to_rgb: zoom must be >= 1");
  const int S = c.size();
  RgbImage img(S * zoom, S * zoom);
  for (int r = 0; r < S; ++r) {
    for (int col = 0; col < S; ++col) {
      const double v = std::clamp(static_cast<double>(c.pixels(r, col)), 0.0, 1.0);
      const auto g = static_cast<std::uint8_t>(std::lround(v * 255.0));
      for (int dy = 0; dy < zoom; ++dy)
        for (int dx = 0; dx < zoom; ++dx) img.set(col * zoom + dx, r * zoom + dy, {g, g, g});
    }
  }
  return img;
}

PixelRect box_outline(const BoundingBox& b, int zoom) {
  auto px = [zoom](double v) { return static_cast<int>(std::lround(v * zoom)); };
  return {px(b.left()), px(b.top()), px(b.right()) - 1, px(b.bottom()) - 1};
}

void draw_box(RgbImage& img, const BoundingBox& b, int zoom, Rgb color) {
  const PixelRect r = box_outline(b, zoom);
  if (r.x1 < r.x0 || r.y1 < r.y0) return;
  for (int x = r.x0; x <= r.x1; ++x) {
    img.set(x, r.y0, color);
    img.set(x, r.y1, color);
  }
  for (int y = r.y0; y <= r.y1; ++y) {
    img.set(r.x0, y, color);
    img.set(r.x1, y, color);
  }
}

RgbImage side_by_side(const RgbImage& left, const RgbImage& right, int gap, Rgb background) {
  RgbImage out(left.width + gap + right.width, std::max(left.height, right.height), background);
  out.blit(left, 0, 0);
  out.blit(right, left.width + gap, 0);
  return out;
}

RgbImage tile(std::span<const RgbImage> cells, int columns, int gap, Rgb background) {
  if (cells.empty()) return RgbImage(0, 0);
  if (columns < 1) throw ContractViolation("tile: columns must be >= 1");
  const int w = cells.front().width, h = cells.front().height;
  for (const auto& c : cells) {
    if (c.width != w || c.height != h) throw ContractViolation("tile: cells differ in size");
  }
  const int n = static_cast<int>(cells.size());
  const int cols = std::min(columns, n);
  const int rows = (n + cols - 1) / cols;
  RgbImage out(cols * w + (cols + 1) * gap, rows * h + (rows + 1) * gap, background);
  for (int i = 0; i < n; ++i) {
    out.blit(cells[static_cast<std::size_t>(i)], gap + (i % cols) * (w + gap), gap + (i / cols) * (h + gap));
  }
  return out;
}

void write_png(const std::string& path, const RgbImage& img) {
  png_image png;
  std::memset(&png, 0, sizeof(png));
  png.version = PNG_IMAGE_VERSION;
  png.width = static_cast<png_uint_32>(img.width);
  png.height = static_cast<png_uint_32>(img.height);
  png.format = PNG_FORMAT_RGB;
  if (!png_image_write_to_file(&png, path.c_str(), 0, img.data.data(), 0, nullptr)) {
    throw IoError("cannot write PNG " + path + ": " + png.message);
  }
}

RgbImage read_png(const std::string& path) {
  png_image png;
  std::memset(&png, 0, sizeof(png));
  png.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&png, path.c_str())) throw IoError("cannot read PNG " + path + ": " + png.message);
  png.format = PNG_FORMAT_RGB;
  RgbImage img(static_cast<int>(png.width), static_cast<int>(png.height));
  if (!png_image_finish_read(&png, nullptr, img.data.data(), 0, nullptr)) {
    png_image_free(&png);
    throw IoError("cannot decode PNG " + path + ": " + png.message);
  }
  return img;
}

}  // namespace asr
