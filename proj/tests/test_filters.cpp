#include <doctest.h>

#include <cmath>

#include "advx/filters.hpp"
#include "advx/rng.hpp"

using namespace advx;

namespace {

RgbImage noise(Rng& rng, int w, int h) {
  RgbImage img(w, h);
  for (auto& p : img.pixels())
    p = {static_cast<std::uint8_t>(rng.below(256)), static_cast<std::uint8_t>(rng.below(256)),
         static_cast<std::uint8_t>(rng.below(256))};
  return img;
}

GrayImage full(int w, int h) { return GrayImage(w, h, 1); }

std::uint8_t trunc8(double v) { return v <= 0 ? 0 : (v >= 255 ? 255 : static_cast<std::uint8_t>(v)); }

}  // namespace

TEST_CASE("gamma lookup example") {
  RgbImage gray(3, 3, Rgb{128, 128, 128});
  // factor 0.5 at beta 0
  const RgbImage out = filter_image(gray, FilterId::gamma, 0.0);
  for (const Rgb& p : out.pixels()) CHECK(p == Rgb{180, 180, 180});
  for (int v = 0; v < 256; ++v) {
    RgbImage one(1, 1, Rgb{static_cast<std::uint8_t>(v), 0, 255});
    const Rgb g = filter_image(one, FilterId::gamma, 1.0).at(0, 0);
    CHECK(g.r == trunc8(255.0 * std::pow(v / 255.0, 2.0)));
    CHECK(g.b == 255);
  }
}

TEST_CASE("factor mapping") {
  CHECK(filter_factor(0.0) == 0.5);
  CHECK(filter_factor(1.0) == 2.0);
  CHECK(filter_factor(kNeutralBeta) == doctest::Approx(1.0));
}

TEST_CASE("neutral intensity is the identity for enhancement filters") {
  Rng rng(4);
  const RgbImage img = noise(rng, 12, 9);
  const double neutral = (1.0 - 0.5) / 1.5;
  for (FilterId id : {FilterId::saturation, FilterId::contrast, FilterId::brightness, FilterId::sharpness,
                      FilterId::gamma})
    CHECK(filter_image(img, id, neutral) == img);
  CHECK(filter_image(img, FilterId::edge_enhance, 0.0) == img);
  CHECK(filter_image(img, FilterId::soft_light_gradient, 0.0) == img);
}

TEST_CASE("enhancement filters against direct formulas") {
  Rng rng(8);
  const RgbImage img = noise(rng, 10, 10);
  const double beta = 0.8, f = 0.5 + 1.5 * beta;
  const RgbImage br = filter_image(img, FilterId::brightness, beta);
  const RgbImage sat = filter_image(img, FilterId::saturation, beta);
  const RgbImage con = filter_image(img, FilterId::contrast, beta);
  double mean = 0;
  for (const Rgb& p : img.pixels()) mean += 0.299 * p.r + 0.587 * p.g + 0.114 * p.b;
  mean /= 100.0;
  for (std::size_t i = 0; i < img.size(); ++i) {
    const Rgb p = img[i];
    CHECK(br[i].g == trunc8(f * p.g));
    const double y = 0.299 * p.r + 0.587 * p.g + 0.114 * p.b;
    CHECK(sat[i].r == trunc8(y + f * (p.r - y)));
    CHECK(con[i].b == trunc8(mean + f * (p.b - mean)));
  }
}

TEST_CASE("edge enhancement leaves flat images alone") {
  RgbImage flat(7, 7, Rgb{90, 100, 110});
  CHECK(filter_image(flat, FilterId::edge_enhance, 1.0) == flat);
  CHECK(filter_image(flat, FilterId::sharpness, 1.0) == flat);
  RgbImage dot = flat;
  dot.at(3, 3) = {150, 100, 110};
  const RgbImage e = filter_image(dot, FilterId::edge_enhance, 0.25);
  // 150 + 0.25 * (4*150 - 4*90), and 90 + 0.25 * (4*90 - 3*90 - 150)
  CHECK(e.at(3, 3).r == 210);
  CHECK(e.at(2, 3).r == 75);
  CHECK(e.at(3, 3).g == 100);
}

TEST_CASE("soft light gradient rows") {
  RgbImage mid(2, 5, Rgb{128, 128, 128});
  const RgbImage out = filter_image(mid, FilterId::soft_light_gradient, 1.0);
  const double base = 128.0 / 255.0;
  // Top row blends with white, bottom row with black.
  CHECK(out.at(0, 0).r == trunc8(255.0 * std::sqrt(base)));
  CHECK(out.at(0, 4).r == trunc8(255.0 * (base - base * (1 - base))));
  CHECK(out.at(0, 0).r > out.at(0, 2).r);
  CHECK(out.at(0, 2).r > out.at(0, 4).r);
}

TEST_CASE("chain order matters") {
  RgbImage gray(4, 4, Rgb{128, 128, 128});
  const GrayImage m = full(4, 4);
  const FilterSpec gamma{FilterId::gamma, 1.0, 0.0};                 // exponent 0.5
  const FilterSpec bright{FilterId::brightness, 1.0, 2.0 / 3.0};     // factor 1.5
  const RgbImage ab = apply_chain(gray, m, {gamma, bright});
  const RgbImage ba = apply_chain(gray, m, {bright, gamma});
  CHECK(ab.at(0, 0).r == 255);  // 180 * 1.5 clips
  CHECK(ba.at(0, 0).r == trunc8(255.0 * std::sqrt(192.0 / 255.0)));
  CHECK(ab != ba);
}

TEST_CASE("alpha blending") {
  Rng rng(13);
  const RgbImage img = noise(rng, 6, 6);
  const GrayImage m = full(6, 6);
  CHECK(apply_filter(img, m, {FilterId::brightness, 0.0, 1.0}) == img);
  const RgbImage filtered = filter_image(img, FilterId::brightness, 1.0);
  const RgbImage half = apply_filter(img, m, {FilterId::brightness, 0.5, 1.0});
  for (std::size_t i = 0; i < img.size(); ++i)
    CHECK(half[i].r == trunc8(img[i].r + 0.5 * (double(filtered[i].r) - img[i].r)));
  CHECK(apply_filter(img, m, {FilterId::brightness, 1.0, 1.0}) == filtered);
}

TEST_CASE("changes stay inside the mask") {
  Rng rng(21);
  for (int t = 0; t < 50; ++t) {
    const RgbImage img = noise(rng, 11, 8);
    GrayImage mask(11, 8);
    for (auto& v : mask.pixels()) v = rng.bernoulli(0.4) ? 1 : 0;
    FilterChain chain(4);
    for (auto& s : chain) s = {kAllFilters[rng.below(kFilterCount)], rng.uniform(), rng.uniform()};
    const RgbImage out = apply_chain(img, mask, chain);
    for (std::size_t i = 0; i < img.size(); ++i)
      if (!mask[i]) REQUIRE(out[i] == img[i]);
  }
  CHECK_THROWS_AS(apply_filter(RgbImage(3, 3), GrayImage(3, 4), {}), DimensionMismatch);
}

TEST_CASE("filter names") {
  for (FilterId id : kAllFilters) CHECK(parse_filter(to_string(id)) == id);
  CHECK_THROWS(parse_filter("blur"));
}
