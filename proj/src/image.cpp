#include "advx/image.hpp"

#include <algorithm>
#include <cmath>

namespace advx {
namespace {

constexpr double kWhiteX = 0.95047;
constexpr double kWhiteY = 1.00000;
constexpr double kWhiteZ = 1.08883;
constexpr double kEpsilon = 216.0 / 24389.0;
constexpr double kKappa = 24389.0 / 27.0;

double srgb_to_linear(double c) noexcept {
  return c <= 0.04045 ? c / 12.92 : std::pow((c + 0.055) / 1.055, 2.4);
}

double linear_to_srgb(double c) noexcept {
  return c <= 0.0031308 ? 12.92 * c : 1.055 * std::pow(c, 1.0 / 2.4) - 0.055;
}

double lab_f(double t) noexcept {
  return t > kEpsilon ? std::cbrt(t) : (kKappa * t + 16.0) / 116.0;
}

double lab_f_inv(double f) noexcept {
  const double f3 = f * f * f;
  return f3 > kEpsilon ? f3 : (116.0 * f - 16.0) / kKappa;
}

}  // namespace

void require_same_shape(int w1, int h1, int w2, int h2, const char* what) {
  if (w1 != w2 || h1 != h2)
    throw DimensionMismatch(std::string(what) + ": dimension mismatch (" + std::to_string(w1) +
                            "x" + std::to_string(h1) + " vs " + std::to_string(w2) + "x" +
                            std::to_string(h2) + ")");
}

Lab rgb_to_lab(Rgb p) noexcept {
  const double r = srgb_to_linear(p.r / 255.0);
  const double g = srgb_to_linear(p.g / 255.0);
  const double b = srgb_to_linear(p.b / 255.0);
  const double x = 0.4124564 * r + 0.3575761 * g + 0.1804375 * b;
  const double y = 0.2126729 * r + 0.7151522 * g + 0.0721750 * b;
  const double z = 0.0193339 * r + 0.1191920 * g + 0.9503041 * b;
  const double fx = lab_f(x / kWhiteX);
  const double fy = lab_f(y / kWhiteY);
  const double fz = lab_f(z / kWhiteZ);
  return {116.0 * fy - 16.0, 500.0 * (fx - fy), 200.0 * (fy - fz)};
}

Rgb lab_to_rgb(const Lab& p) noexcept {
  const double fy = (p.l + 16.0) / 116.0;
  const double fx = fy + p.a / 500.0;
  const double fz = fy - p.b / 200.0;
  const double x = kWhiteX * lab_f_inv(fx);
  const double y = p.l > kKappa * kEpsilon ? kWhiteY * fy * fy * fy : kWhiteY * p.l / kKappa;
  const double z = kWhiteZ * lab_f_inv(fz);
  const double r = 3.2404542 * x - 1.5371385 * y - 0.4985314 * z;
  const double g = -0.9692660 * x + 1.8760108 * y + 0.0415560 * z;
  const double b = 0.0556434 * x - 0.2040259 * y + 1.0572252 * z;
  auto encode = [](double c) {
    return clamp_channel(255.0 * linear_to_srgb(std::clamp(c, 0.0, 1.0)));
  };
  return {encode(r), encode(g), encode(b)};
}

LabImage to_lab(const RgbImage& img) {
  LabImage out(img.width(), img.height());
  for (std::size_t i = 0; i < img.size(); ++i) out[i] = rgb_to_lab(img[i]);
  return out;
}

RgbImage to_rgb(const LabImage& img) {
  RgbImage out(img.width(), img.height());
  for (std::size_t i = 0; i < img.size(); ++i) out[i] = lab_to_rgb(img[i]);
  return out;
}

ScalarMap luma_map(const RgbImage& img) {
  ScalarMap out(img.width(), img.height());
  for (std::size_t i = 0; i < img.size(); ++i) out[i] = luma(img[i]);
  return out;
}

ScalarMap resize_bilinear(const ScalarMap& src, int width, int height) {
  if (src.empty()) throw std::invalid_argument("resize_bilinear: empty source");
  ScalarMap out(width, height);
  const double sx = static_cast<double>(src.width()) / width;
  const double sy = static_cast<double>(src.height()) / height;
  for (int y = 0; y < height; ++y) {
    const double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, src.height() - 1.0);
    const int y0 = static_cast<int>(fy);
    const int y1 = std::min(y0 + 1, src.height() - 1);
    const double wy = fy - y0;
    for (int x = 0; x < width; ++x) {
      const double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, src.width() - 1.0);
      const int x0 = static_cast<int>(fx);
      const int x1 = std::min(x0 + 1, src.width() - 1);
      const double wx = fx - x0;
      const double top = src.at(x0, y0) * (1 - wx) + src.at(x1, y0) * wx;
      const double bottom = src.at(x0, y1) * (1 - wx) + src.at(x1, y1) * wx;
      out.at(x, y) = top * (1 - wy) + bottom * wy;
    }
  }
  return out;
}

}  // namespace advx
