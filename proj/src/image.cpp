#include "pfsplat/image.hpp"

#include "pfsplat/errors.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <memory>

namespace pfsplat {

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

}  // namespace

void write_png(const ImageBuffer& image, const std::filesystem::path& path) {
  if (image.width <= 0 || image.height <= 0 || image.size() != static_cast<size_t>(image.width) * image.height * 3) {
    throw InvalidArgument("write_png: malformed image buffer");
  }
  png_image img{};
  img.version = PNG_IMAGE_VERSION;
  img.width = static_cast<png_uint_32>(image.width);
  img.height = static_cast<png_uint_32>(image.height);
  img.format = PNG_FORMAT_RGB;
  std::vector<png_byte> bytes(image.size());
  for (size_t i = 0; i < bytes.size(); ++i) {
    bytes[i] = static_cast<png_byte>(std::lround(255.0 * std::clamp(image.rgb[i], 0.0, 1.0)));
  }
  if (!png_image_write_to_file(&img, path.c_str(), 0, bytes.data(), 0, nullptr)) {
    std::string msg = img.message;
    png_image_free(&img);
    throw IoError("write_png: " + path.string() + ": " + msg);
  }
}

ImageBuffer read_png(const std::filesystem::path& path) {
  png_image img{};
  img.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&img, path.c_str())) {
    throw IoError("read_png: " + path.string() + ": " + std::string(img.message));
  }
  img.format = PNG_FORMAT_RGB;
  std::vector<png_byte> bytes(PNG_IMAGE_SIZE(img));
  if (!png_image_finish_read(&img, nullptr, bytes.data(), 0, nullptr)) {
    std::string msg = img.message;
    png_image_free(&img);
    throw IoError("read_png: " + path.string() + ": " + msg);
  }
  ImageBuffer out(static_cast<int>(img.width), static_cast<int>(img.height));
  for (size_t i = 0; i < out.size(); ++i) {
    out.rgb[i] = bytes[i] / 255.0;
  }
  return out;
}

}  // namespace pfsplat
