#include "braindec/image.hpp"

#include <algorithm>
#include <cmath>

#include <png.h>

#include "braindec/errors.hpp"

namespace braindec::metrics {

ImageRgb::ImageRgb(int width, int height)
    : ImageRgb(width, height, std::vector<std::uint8_t>(static_cast<std::size_t>(std::max(width, 0)) *
                                                        static_cast<std::size_t>(std::max(height, 0)) * 3)) {}

ImageRgb::ImageRgb(int width, int height, std::vector<std::uint8_t> pixels)
    : width_(width), height_(height), pixels_(std::move(pixels)) {
  if (width < 0 || height < 0) throw ArgumentError("image dimensions must be non-negative");
  if (pixels_.size() != static_cast<std::size_t>(width) * static_cast<std::size_t>(height) * 3) {
    throw ArgumentError("pixel buffer of " + std::to_string(pixels_.size()) + " bytes does not match " +
                        std::to_string(width) + "x" + std::to_string(height) + " RGB");
  }
}

ImageRgb read_png(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw PathError("PNG '" + path.string() + "' does not exist");
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&image, path.c_str())) {
    throw ConsistencyError("cannot decode PNG '" + path.string() + "': " + image.message);
  }
  image.format = PNG_FORMAT_RGB;
  ImageRgb img(static_cast<int>(image.width), static_cast<int>(image.height));
  if (!png_image_finish_read(&image, nullptr, img.pixels().data(), 0, nullptr)) {
    png_image_free(&image);
    throw ConsistencyError("cannot decode PNG '" + path.string() + "': " + image.message);
  }
  return img;
}

void write_png(const ImageRgb& img, const std::filesystem::path& path) {
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(img.width());
  image.height = static_cast<png_uint_32>(img.height());
  image.format = PNG_FORMAT_RGB;
  if (!png_image_write_to_file(&image, path.c_str(), 0, img.pixels().data(), 0, nullptr)) {
    throw PathError("cannot write PNG '" + path.string() + "': " + image.message);
  }
}

ImageRgb resize_bilinear(const ImageRgb& img, int width, int height) {
  if (width < 1 || height < 1) throw ArgumentError("target size must be at least 1x1");
  if (img.width() < 1 || img.height() < 1) throw ArgumentError("cannot resize an empty image");
  if (width == img.width() && height == img.height()) return img;

  auto source_coord = [](int dst, int dst_size, int src_size) {
    const double s = (dst + 0.5) * static_cast<double>(src_size) / dst_size - 0.5;
    return std::clamp(s, 0.0, static_cast<double>(src_size - 1));
  };

  ImageRgb out(width, height);
  for (int y = 0; y < height; ++y) {
    const double sy = source_coord(y, height, img.height());
    const int y0 = static_cast<int>(std::floor(sy));
    const int y1 = std::min(y0 + 1, img.height() - 1);
    const double fy = sy - y0;
    for (int x = 0; x < width; ++x) {
      const double sx = source_coord(x, width, img.width());
      const int x0 = static_cast<int>(std::floor(sx));
      const int x1 = std::min(x0 + 1, img.width() - 1);
      const double fx = sx - x0;
      for (int c = 0; c < 3; ++c) {
        const double top = img.at(x0, y0, c) * (1.0 - fx) + img.at(x1, y0, c) * fx;
        const double bot = img.at(x0, y1, c) * (1.0 - fx) + img.at(x1, y1, c) * fx;
        const double v = top * (1.0 - fy) + bot * fy;
        out.at(x, y, c) = static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
      }
    }
  }
  return out;
}

std::vector<double> luminance(const ImageRgb& img) {
  std::vector<double> y(static_cast<std::size_t>(img.width()) * static_cast<std::size_t>(img.height()));
  const auto& px = img.pixels();
  for (std::size_t i = 0; i < y.size(); ++i) {
    y[i] = 0.299 * px[3 * i] + 0.587 * px[3 * i + 1] + 0.114 * px[3 * i + 2];
  }
  return y;
}

}  // namespace braindec::metrics
