#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

namespace braindec::metrics {

/// 8-bit interleaved RGB, row-major.
class ImageRgb {
 public:
  ImageRgb() = default;
  ImageRgb(int width, int height);
  ImageRgb(int width, int height, std::vector<std::uint8_t> pixels);

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  const std::vector<std::uint8_t>& pixels() const noexcept { return pixels_; }
  std::vector<std::uint8_t>& pixels() noexcept { return pixels_; }

  std::uint8_t at(int x, int y, int c) const { return pixels_[(static_cast<std::size_t>(y) * width_ + x) * 3 + c]; }
  std::uint8_t& at(int x, int y, int c) { return pixels_[(static_cast<std::size_t>(y) * width_ + x) * 3 + c]; }

  friend bool operator==(const ImageRgb&, const ImageRgb&) = default;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<std::uint8_t> pixels_;
};

/// Gray, gray+alpha, RGBA and 16-bit inputs are converted to 8-bit RGB.
ImageRgb read_png(const std::filesystem::path& path);
void write_png(const ImageRgb& img, const std::filesystem::path& path);

/// Bilinear resampling with pixel-center alignment and edge clamping:
/// source coordinate = (dst + 0.5) * src_size / dst_size - 0.5, clamped to
/// [0, src_size - 1]. Results are rounded to the nearest 8-bit value.
/// Same-size requests return the input unchanged.
ImageRgb resize_bilinear(const ImageRgb& img, int width, int height);

/// BT.601 luma (0.299 R + 0.587 G + 0.114 B), unrounded, row-major.
std::vector<double> luminance(const ImageRgb& img);

}  // namespace braindec::metrics
