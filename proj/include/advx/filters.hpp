#pragma once

#include <array>
#include <string_view>
#include <vector>

#include "advx/image.hpp"
#include "advx/png_io.hpp"

namespace advx {

enum class FilterId {
  saturation,
  contrast,
  brightness,
  sharpness,
  edge_enhance,
  gamma,
  soft_light_gradient,
};

inline constexpr int kFilterCount = 7;
inline constexpr std::array<FilterId, kFilterCount> kAllFilters = {
    FilterId::saturation, FilterId::contrast,     FilterId::brightness,
    FilterId::sharpness,  FilterId::edge_enhance, FilterId::gamma,
    FilterId::soft_light_gradient};

std::string_view to_string(FilterId id) noexcept;
FilterId parse_filter(std::string_view name);

/// One alpha-blended parameterized filter. beta is the intensity, alpha the blend weight.
struct FilterSpec {
  FilterId id = FilterId::brightness;
  double alpha = 0.8;
  double beta = 0.5;
  friend bool operator==(const FilterSpec&, const FilterSpec&) = default;
};

/// Ordered chain, applied first to last.
using FilterChain = std::vector<FilterSpec>;

/// Enhancement factor / gamma exponent for an intensity: 0.5 + 1.5 * beta (1.0 at beta = 1/3).
inline constexpr double filter_factor(double beta) noexcept { return 0.5 + 1.5 * beta; }
inline constexpr double kNeutralBeta = 1.0 / 3.0;

/// Full-frame filter at intensity beta, before alpha blending. Intermediate values are
/// clipped to [0, 255] and truncated to 8 bits.
RgbImage filter_image(const RgbImage& image, FilterId id, double beta);

/// out = in + alpha * (filter_beta(in) - in) on pixels with mask != 0, truncated to
/// 8 bits; other pixels are copied unchanged.
RgbImage apply_filter(const RgbImage& image, const GrayImage& mask, const FilterSpec& spec);

RgbImage apply_chain(const RgbImage& image, const GrayImage& mask, const FilterChain& chain);

}  // namespace advx
