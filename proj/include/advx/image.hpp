#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace advx {

struct Rgb {
  std::uint8_t r = 0, g = 0, b = 0;
  friend bool operator==(const Rgb&, const Rgb&) = default;
};

struct Lab {
  double l = 0.0, a = 0.0, b = 0.0;
};

class DimensionMismatch : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Dense row-major raster. Pixel (x, y) lives at index y * width + x.
template <typename Pixel>
class Raster {
 public:
  Raster() = default;
  Raster(int width, int height, Pixel fill = {})
      : width_(width), height_(height), pixels_(checked_area(width, height), fill) {}
  Raster(int width, int height, std::vector<Pixel> pixels)
      : width_(width), height_(height), pixels_(std::move(pixels)) {
    if (pixels_.size() != checked_area(width, height))
      throw DimensionMismatch("pixel buffer does not match width*height");
  }

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  std::size_t size() const noexcept { return pixels_.size(); }
  bool empty() const noexcept { return pixels_.empty(); }

  const Pixel& at(int x, int y) const { return pixels_[index(x, y)]; }
  Pixel& at(int x, int y) { return pixels_[index(x, y)]; }
  const Pixel& operator[](std::size_t i) const { return pixels_[i]; }
  Pixel& operator[](std::size_t i) { return pixels_[i]; }

  std::span<const Pixel> pixels() const noexcept { return pixels_; }
  std::span<Pixel> pixels() noexcept { return pixels_; }

  bool same_shape(int w, int h) const noexcept { return width_ == w && height_ == h; }
  template <typename Other>
  bool same_shape(const Raster<Other>& o) const noexcept {
    return same_shape(o.width(), o.height());
  }

  friend bool operator==(const Raster& a, const Raster& b) {
    return a.width_ == b.width_ && a.height_ == b.height_ && a.pixels_ == b.pixels_;
  }

 private:
  static std::size_t checked_area(int w, int h) {
    if (w < 0 || h < 0) throw std::invalid_argument("negative image dimension");
    return static_cast<std::size_t>(w) * static_cast<std::size_t>(h);
  }
  std::size_t index(int x, int y) const noexcept {
    return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) +
           static_cast<std::size_t>(x);
  }

  int width_ = 0;
  int height_ = 0;
  std::vector<Pixel> pixels_;
};

using RgbImage = Raster<Rgb>;
using LabImage = Raster<Lab>;
/// Single-channel real-valued map (attention, luma, local contrast).
using ScalarMap = Raster<double>;

void require_same_shape(int w1, int h1, int w2, int h2, const char* what);

// sRGB <-> CIELAB, D65 white, standard sRGB companding.
Lab rgb_to_lab(Rgb p) noexcept;
/// Out-of-gamut colors are clipped per channel; values are rounded to nearest.
Rgb lab_to_rgb(const Lab& p) noexcept;
LabImage to_lab(const RgbImage& img);
RgbImage to_rgb(const LabImage& img);

/// ITU-R BT.601 luma in [0, 255].
inline double luma(Rgb p) noexcept { return 0.299 * p.r + 0.587 * p.g + 0.114 * p.b; }
ScalarMap luma_map(const RgbImage& img);

inline std::uint8_t clamp_channel(double v) noexcept {
  if (!(v > 0.0)) return 0;
  if (v >= 255.0) return 255;
  return static_cast<std::uint8_t>(v + 0.5);
}

/// Bilinear resampling with half-pixel centers and edge clamping.
ScalarMap resize_bilinear(const ScalarMap& src, int width, int height);

}  // namespace advx
