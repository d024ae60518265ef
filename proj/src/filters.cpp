#include "advx/filters.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace advx {

std::string_view to_string(FilterId id) noexcept {
  switch (id) {
    case FilterId::saturation: return "saturation";
    case FilterId::contrast: return "contrast";
    case FilterId::brightness: return "brightness";
    case FilterId::sharpness: return "sharpness";
    case FilterId::edge_enhance: return "edge_enhance";
    case FilterId::gamma: return "gamma";
    case FilterId::soft_light_gradient: return "soft_light_gradient";
  }
  return "unknown";
}

FilterId parse_filter(std::string_view name) {
  for (FilterId id : kAllFilters)
    if (to_string(id) == name) return id;
  throw std::invalid_argument("unknown filter: " + std::string(name));
}

namespace {

struct Px {
  double r, g, b;
};

inline std::uint8_t truncate8(double v) noexcept {
  if (!(v > 0.0)) return 0;
  if (v >= 255.0) return 255;
  return static_cast<std::uint8_t>(v);
}

inline Rgb quantize(const Px& p) noexcept { return {truncate8(p.r), truncate8(p.g), truncate8(p.b)}; }

/// in + (factor - 1) * (in - degenerate): exact identity at factor 1.
template <typename Degenerate>
RgbImage enhance(const RgbImage& img, double factor, Degenerate degenerate) {
  RgbImage out(img.width(), img.height());
  const double k = factor - 1.0;
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      const Rgb p = img.at(x, y);
      const Px d = degenerate(x, y, p);
      out.at(x, y) = quantize({p.r + k * (p.r - d.r), p.g + k * (p.g - d.g), p.b + k * (p.b - d.b)});
    }
  }
  return out;
}

double soft_light(double base, double blend) noexcept {
  if (blend <= 0.5) return base - (1.0 - 2.0 * blend) * base * (1.0 - base);
  const double d = base <= 0.25 ? ((16.0 * base - 12.0) * base + 4.0) * base : std::sqrt(base);
  return base + (2.0 * blend - 1.0) * (d - base);
}

}  // namespace

RgbImage filter_image(const RgbImage& img, FilterId id, double beta) {
  beta = std::clamp(beta, 0.0, 1.0);
  const double f = filter_factor(beta);
  const int w = img.width(), h = img.height();
  switch (id) {
    case FilterId::saturation:
      return enhance(img, f, [](int, int, Rgb p) {
        const double y = luma(p);
        return Px{y, y, y};
      });
    case FilterId::contrast: {
      double mean = 0.0;
      for (const Rgb& p : img.pixels()) mean += luma(p);
      mean /= static_cast<double>(std::max<std::size_t>(1, img.size()));
      return enhance(img, f, [mean](int, int, Rgb) { return Px{mean, mean, mean}; });
    }
    case FilterId::brightness:
      return enhance(img, f, [](int, int, Rgb) { return Px{0, 0, 0}; });
    case FilterId::sharpness:
      // Degenerate image is the 3x3 smoothing [1 1 1; 1 5 1; 1 1 1] / 13; borders stay.
      return enhance(img, f, [&img, w, h](int x, int y, Rgb p) {
        if (x == 0 || y == 0 || x == w - 1 || y == h - 1) return Px{double(p.r), double(p.g), double(p.b)};
        Px s{0, 0, 0};
        for (int dy = -1; dy <= 1; ++dy)
          for (int dx = -1; dx <= 1; ++dx) {
            const Rgb q = img.at(x + dx, y + dy);
            const double wgt = (dx == 0 && dy == 0) ? 5.0 : 1.0;
            s.r += wgt * q.r;
            s.g += wgt * q.g;
            s.b += wgt * q.b;
          }
        return Px{s.r / 13.0, s.g / 13.0, s.b / 13.0};
      });
    case FilterId::edge_enhance: {
      RgbImage out(w, h);
      for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
          const Rgb c = img.at(x, y);
          const Rgb n[4] = {img.at(std::max(x - 1, 0), y), img.at(std::min(x + 1, w - 1), y),
                            img.at(x, std::max(y - 1, 0)), img.at(x, std::min(y + 1, h - 1))};
          auto lap = [&](auto ch) {
            double s = 4.0 * ch(c);
            for (const Rgb& q : n) s -= ch(q);
            return s;
          };
          out.at(x, y) = quantize({c.r + beta * lap([](Rgb q) { return double(q.r); }),
                                   c.g + beta * lap([](Rgb q) { return double(q.g); }),
                                   c.b + beta * lap([](Rgb q) { return double(q.b); })});
        }
      return out;
    }
    case FilterId::gamma: {
      std::array<std::uint8_t, 256> lut{};
      for (int v = 0; v < 256; ++v) lut[v] = truncate8(255.0 * std::pow(v / 255.0, f));
      RgbImage out(w, h);
      for (std::size_t i = 0; i < img.size(); ++i)
        out[i] = {lut[img[i].r], lut[img[i].g], lut[img[i].b]};
      return out;
    }
    case FilterId::soft_light_gradient: {
      RgbImage out(w, h);
      for (int y = 0; y < h; ++y) {
        // White at the top row, black at the bottom row.
        const double g = h > 1 ? 1.0 - static_cast<double>(y) / (h - 1) : 1.0;
        for (int x = 0; x < w; ++x) {
          const Rgb c = img.at(x, y);
          auto mix = [&](std::uint8_t ch) {
            const double base = ch / 255.0;
            return 255.0 * (base + beta * (soft_light(base, g) - base));
          };
          out.at(x, y) = quantize({mix(c.r), mix(c.g), mix(c.b)});
        }
      }
      return out;
    }
  }
  throw std::invalid_argument("filter_image: bad filter id");
}

RgbImage apply_filter(const RgbImage& image, const GrayImage& mask, const FilterSpec& spec) {
  require_same_shape(image.width(), image.height(), mask.width(), mask.height(), "apply_filter");
  const double alpha = std::clamp(spec.alpha, 0.0, 1.0);
  RgbImage out = image;
  if (alpha == 0.0) return out;
  const RgbImage filtered = filter_image(image, spec.id, spec.beta);
  for (std::size_t i = 0; i < image.size(); ++i) {
    if (!mask[i]) continue;
    const Rgb a = image[i], b = filtered[i];
    out[i] = quantize({a.r + alpha * (double(b.r) - a.r), a.g + alpha * (double(b.g) - a.g),
                       a.b + alpha * (double(b.b) - a.b)});
  }
  return out;
}

RgbImage apply_chain(const RgbImage& image, const GrayImage& mask, const FilterChain& chain) {
  RgbImage out = image;
  for (const FilterSpec& spec : chain) out = apply_filter(out, mask, spec);
  return out;
}

}  // namespace advx
