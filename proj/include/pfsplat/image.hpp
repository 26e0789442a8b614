#pragma once

#include <filesystem>
#include <vector>

namespace pfsplat {

/// H x W x 3 image, row-major, channel-interleaved, doubles nominally in [0, 1].
struct ImageBuffer {
  int width = 0;
  int height = 0;
  std::vector<double> rgb;

  ImageBuffer() = default;
  ImageBuffer(int w, int h, double fill = 0.0)
      : width(w), height(h), rgb(static_cast<size_t>(w) * static_cast<size_t>(h) * 3, fill) {}

  [[nodiscard]] size_t index(int x, int y, int c) const {
    return (static_cast<size_t>(y) * static_cast<size_t>(width) + static_cast<size_t>(x)) * 3 + static_cast<size_t>(c);
  }
  double& at(int x, int y, int c) { return rgb[index(x, y, c)]; }
  [[nodiscard]] double at(int x, int y, int c) const { return rgb[index(x, y, c)]; }
  [[nodiscard]] size_t size() const { return rgb.size(); }
  [[nodiscard]] bool same_shape(const ImageBuffer& o) const { return width == o.width && height == o.height; }
};

/// 8-bit RGB PNG. Values are written as round(255 * clamp(v, 0, 1)) without any
/// gamma transform, so pixel values stay linear for loss computations.
void write_png(const ImageBuffer& image, const std::filesystem::path& path);
/// Reads 8-bit gray, RGB or RGBA PNGs (alpha is dropped); returns values v / 255.
[[nodiscard]] ImageBuffer read_png(const std::filesystem::path& path);

}  // namespace pfsplat
