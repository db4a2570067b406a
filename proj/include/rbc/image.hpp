#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "rbc/error.hpp"

namespace rbc {

struct Rgb {
  std::uint8_t r = 0, g = 0, b = 0;
  friend bool operator==(const Rgb&, const Rgb&) = default;
};

/// Row-major raster. The tag keeps grayscale and mask images distinct types
/// even though both store one byte per pixel.
template <class Pixel, class Tag = void>
class Image {
public:
  using pixel_type = Pixel;

  Image() = default;
  Image(int width, int height, Pixel fill = Pixel{})
      : width_(width), height_(height) {
    if (width <= 0 || height <= 0) throw_parameter("image dimensions must be positive");
    pixels_.assign(static_cast<std::size_t>(width) * height, fill);
  }
  Image(int width, int height, std::vector<Pixel> pixels)
      : width_(width), height_(height), pixels_(std::move(pixels)) {
    if (width <= 0 || height <= 0) throw_parameter("image dimensions must be positive");
    if (pixels_.size() != static_cast<std::size_t>(width) * height)
      throw_parameter("pixel count does not match width x height");
  }

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  bool empty() const noexcept { return pixels_.empty(); }
  std::size_t size() const noexcept { return pixels_.size(); }

  bool contains(int x, int y) const noexcept {
    return x >= 0 && y >= 0 && x < width_ && y < height_;
  }

  Pixel& at(int x, int y) { return pixels_[index(x, y)]; }
  const Pixel& at(int x, int y) const { return pixels_[index(x, y)]; }

  std::span<Pixel> pixels() noexcept { return pixels_; }
  std::span<const Pixel> pixels() const noexcept { return pixels_; }

  friend bool operator==(const Image&, const Image&) = default;

private:
  std::size_t index(int x, int y) const noexcept {
    return static_cast<std::size_t>(y) * width_ + x;
  }

  int width_ = 0;
  int height_ = 0;
  std::vector<Pixel> pixels_;
};

struct GrayTag;
struct MaskTag;

using RgbImage = Image<Rgb>;
using GrayImage = Image<std::uint8_t, GrayTag>;
/// Foreground mask; pixels hold 0 or 1.
using BinaryImage = Image<std::uint8_t, MaskTag>;

struct Rect {
  int x = 0, y = 0, width = 0, height = 0;
  friend bool operator==(const Rect&, const Rect&) = default;
};

/// ITU-R BT.601 luma, rounded to nearest.
GrayImage to_gray(const RgbImage& img);

std::size_t count_foreground(const BinaryImage& mask);

template <class P, class T>
Image<P, T> crop(const Image<P, T>& img, const Rect& r) {
  if (r.width <= 0 || r.height <= 0 || r.x < 0 || r.y < 0 ||
      r.x + r.width > img.width() || r.y + r.height > img.height())
    throw_parameter("crop rectangle outside image");
  Image<P, T> out(r.width, r.height);
  for (int y = 0; y < r.height; ++y)
    for (int x = 0; x < r.width; ++x) out.at(x, y) = img.at(r.x + x, r.y + y);
  return out;
}

/// Decodes PNG/JPEG/BMP into RGB. Throws Error(io) on unreadable files.
RgbImage read_image(const std::filesystem::path& path);
void write_png(const std::filesystem::path& path, const RgbImage& img);
void write_png(const std::filesystem::path& path, const GrayImage& img);

}  // namespace rbc
