#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "braindec/errors.hpp"
#include "braindec/image.hpp"
#include "test_support.hpp"

using namespace braindec;
using namespace braindec::metrics;

namespace {

ImageRgb random_image(int w, int h, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> d(0, 255);
  ImageRgb img(w, h);
  for (auto& p : img.pixels()) p = static_cast<std::uint8_t>(d(rng));
  return img;
}

}  // namespace

TEST(Image, ConstructorChecksBuffer) {
  EXPECT_THROW(ImageRgb(2, 2, std::vector<std::uint8_t>(11)), ArgumentError);
  EXPECT_NO_THROW(ImageRgb(2, 2, std::vector<std::uint8_t>(12)));
}

TEST(Resize, SameSizeIsIdentity) {
  const auto img = random_image(425, 425, 1);
  EXPECT_EQ(resize_bilinear(img, 425, 425), img);
}

TEST(Resize, ConstantStaysConstant) {
  ImageRgb img(7, 5);
  for (int y = 0; y < 5; ++y)
    for (int x = 0; x < 7; ++x) {
      img.at(x, y, 0) = 12;
      img.at(x, y, 1) = 200;
      img.at(x, y, 2) = 77;
    }
  for (auto [w, h] : {std::pair{3, 2}, {16, 13}, {1, 1}}) {
    const auto out = resize_bilinear(img, w, h);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        EXPECT_EQ(out.at(x, y, 0), 12);
        EXPECT_EQ(out.at(x, y, 1), 200);
        EXPECT_EQ(out.at(x, y, 2), 77);
      }
  }
}

TEST(Resize, GradientMatchesClosedForm) {
  // 4x4 horizontal/vertical gradient: value = 10x + 40y (+ channel offset)
  ImageRgb img(4, 4);
  for (int y = 0; y < 4; ++y)
    for (int x = 0; x < 4; ++x)
      for (int c = 0; c < 3; ++c) img.at(x, y, c) = static_cast<std::uint8_t>(10 * x + 40 * y + c);
  const int W = 7, H = 3;
  const auto out = resize_bilinear(img, W, H);
  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x) {
      // the image is affine, so bilinear reproduces the affine function at the clamped coordinate
      const double sx = std::clamp((x + 0.5) * 4.0 / W - 0.5, 0.0, 3.0);
      const double sy = std::clamp((y + 0.5) * 4.0 / H - 0.5, 0.0, 3.0);
      for (int c = 0; c < 3; ++c) {
        EXPECT_EQ(out.at(x, y, c), static_cast<int>(std::lround(10 * sx + 40 * sy + c))) << x << "," << y;
      }
    }
}

TEST(Resize, ZeroSizeRejected) {
  const auto img = random_image(4, 4, 2);
  EXPECT_THROW(resize_bilinear(img, 0, 4), ArgumentError);
  EXPECT_THROW(resize_bilinear(img, 4, 0), ArgumentError);
}

TEST(Luminance, Bt601Weights) {
  ImageRgb img(2, 1, {255, 0, 0, 10, 20, 30});
  const auto y = luminance(img);
  EXPECT_DOUBLE_EQ(y[0], 0.299 * 255);
  EXPECT_DOUBLE_EQ(y[1], 0.299 * 10 + 0.587 * 20 + 0.114 * 30);
}

TEST(Png, Roundtrip) {
  testsupport::TempDir dir;
  const auto img = random_image(13, 9, 3);
  write_png(img, dir / "a.png");
  EXPECT_EQ(read_png(dir / "a.png"), img);
  EXPECT_THROW(read_png(dir / "missing.png"), PathError);
  testsupport::spit(dir / "bad.png", "not a png");
  EXPECT_THROW(read_png(dir / "bad.png"), Error);
}
