#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <set>

#include "advx/corpus.hpp"
#include "advx/partition.hpp"
#include "advx/rng.hpp"

using namespace advx;
namespace fs = std::filesystem;

namespace {

// Pixel-exact coverage and disjointness, checked without the library's own validator.
void require_exact_cover(const Partition& p) {
  const std::size_t total = static_cast<std::size_t>(p.width) * p.height;
  std::vector<int> hits(total, 0);
  for (const auto& r : p.regions)
    for (auto px : r.pixels) {
      REQUIRE(px < total);
      ++hits[px];
    }
  for (int h : hits) REQUIRE(h == 1);
  CHECK_NOTHROW(p.check_invariants());
}

SemanticMask two_class_mask(int w, int h, int split_x) {
  SemanticMask m;
  m.labels = GrayImage(w, h, 0);
  m.class_names = {{0, "other"}, {1, "person"}};
  for (int y = 0; y < h; ++y)
    for (int x = split_x; x < w; ++x) m.labels.at(x, y) = 1;
  return m;
}

}  // namespace

TEST_CASE("coverage and disjointness on every fixture") {
  const auto items = load_corpus(ADVX_FIXTURES "/corpus");
  REQUIRE(items.size() == 4);
  for (const auto& item : items) {
    for (auto policy : {SensitivityPolicy::colorization, SensitivityPolicy::filter})
      for (int k : {0, 1, 3, 6, 12}) {
        const Partition p = build_partition(item.image, item.semantic, item.skin, k, policy);
        require_exact_cover(p);
        for (const auto& r : p.regions) {
          for (auto px : r.pixels) REQUIRE(p.label_map[px] == r.id);
          // Skin is sensitive under both policies.
          if ((*item.skin)[r.pixels.front()]) CHECK(r.skin);
          if (r.skin) CHECK(r.sensitive);
        }
      }
  }
}

TEST_CASE("coverage on random label maps") {
  Rng rng(31);
  for (int t = 0; t < 30; ++t) {
    const int w = 8 + static_cast<int>(rng.below(20)), h = 8 + static_cast<int>(rng.below(20));
    RgbImage img(w, h);
    SemanticMask sem;
    sem.labels = GrayImage(w, h);
    sem.class_names = {{0, "other"}, {1, "sky"}, {2, "person"}, {3, "road"}};
    GrayImage skin(w, h, 0);
    for (std::size_t i = 0; i < img.size(); ++i) {
      img[i] = {static_cast<std::uint8_t>(rng.below(256)), static_cast<std::uint8_t>(rng.below(256)),
                static_cast<std::uint8_t>(rng.below(256))};
      sem.labels[i] = static_cast<std::uint8_t>(rng.below(4));
      skin[i] = rng.bernoulli(0.05) ? 255 : 0;
    }
    try {
      require_exact_cover(build_partition(img, sem, skin, 1 + static_cast<int>(rng.below(5)),
                                          t % 2 ? SensitivityPolicy::filter : SensitivityPolicy::colorization));
    } catch (const EmptyNonSensitive&) {
    }
  }
}

TEST_CASE("person with skin and other region, filter policy, four superpixels") {
  const int w = 48, h = 32;
  RgbImage img(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      img.at(x, y) = x < 32 ? Rgb{static_cast<std::uint8_t>(60 + 4 * x), 90, static_cast<std::uint8_t>(40 + 5 * y)}
                            : Rgb{200, 150, 120};
  const SemanticMask sem = two_class_mask(w, h, 32);
  GrayImage skin(w, h, 0);
  for (int y = 4; y < 14; ++y)
    for (int x = 36; x < 44; ++x) skin.at(x, y) = 255;

  const Partition p = build_partition(img, sem, skin, 4, SensitivityPolicy::filter);
  require_exact_cover(p);
  int other = 0, skin_regions = 0;
  for (const auto& r : p.regions) {
    if (r.class_name == "other") ++other;
    if (r.skin) {
      ++skin_regions;
      CHECK(r.sensitive);
      CHECK(r.pixels.size() == 80);
    }
  }
  CHECK(skin_regions == 1);
  CHECK(other >= 3);
  CHECK(other <= 5);
}

TEST_CASE("colorization policy marks sky/person/vegetation/water sensitive") {
  RgbImage img(8, 8, Rgb{100, 100, 100});
  SemanticMask sem;
  sem.labels = GrayImage(8, 8, 0);
  sem.class_names = {{0, "other"}, {1, "sky"}, {2, "water"}, {3, "vegetation"}, {4, "person"}};
  for (int x = 0; x < 8; ++x) {
    sem.labels.at(x, 0) = 1;
    sem.labels.at(x, 1) = 2;
    sem.labels.at(x, 2) = 3;
    sem.labels.at(x, 3) = 4;
  }
  const Partition p = build_partition(img, sem, std::nullopt, 0, SensitivityPolicy::colorization);
  for (const auto& r : p.regions) CHECK(r.sensitive == (r.class_name != "other"));
  CHECK(p.non_sensitive_pixel_count() == 32);

  const Partition f = build_partition(img, sem, std::nullopt, 0, SensitivityPolicy::filter);
  for (const auto& r : f.regions) CHECK_FALSE(r.sensitive);
}

TEST_CASE("nothing alterable raises") {
  RgbImage img(6, 6, Rgb{10, 20, 30});
  SemanticMask sem;
  sem.labels = GrayImage(6, 6, 1);
  sem.class_names = {{1, "sky"}};
  CHECK_THROWS_AS(build_partition(img, sem, std::nullopt, 0, SensitivityPolicy::colorization), EmptyNonSensitive);
  GrayImage all_skin(6, 6, 255);
  CHECK_THROWS_AS(build_partition(img, sem, all_skin, 0, SensitivityPolicy::filter), EmptyNonSensitive);
}

TEST_CASE("oversegment splits a two-color square into its halves") {
  const int n = 16;
  RgbImage img(n, n);
  std::vector<std::uint32_t> all;
  for (int y = 0; y < n; ++y)
    for (int x = 0; x < n; ++x) {
      img.at(x, y) = y < n / 2 ? Rgb{220, 30, 30} : Rgb{30, 30, 220};
      all.push_back(static_cast<std::uint32_t>(y * n + x));
    }
  const auto parts = oversegment(img, all, 2);
  REQUIRE(parts.size() == 2);
  for (const auto& part : parts) {
    REQUIRE(part.size() == 128);
    const bool top = part.front() / n < static_cast<std::uint32_t>(n / 2);
    for (auto p : part) CHECK((p / n < static_cast<std::uint32_t>(n / 2)) == top);
  }
  CHECK(oversegment(img, all, 1) == std::vector<std::vector<std::uint32_t>>{all});
  CHECK_THROWS(oversegment(img, all, 0));
}

TEST_CASE("oversegment output is connected and deterministic") {
  const auto items = load_corpus(ADVX_FIXTURES "/corpus");
  const auto& item = items.front();
  // A connected block of rows spanning several scene parts.
  std::vector<std::uint32_t> region;
  for (std::uint32_t i = 20 * kSyntheticSize; i < 44 * kSyntheticSize; ++i) region.push_back(i);
  const auto a = oversegment(item.image, region, 8);
  CHECK(a == oversegment(item.image, region, 8));
  CHECK(a.size() <= 8);
  std::size_t covered = 0;
  for (const auto& part : a) covered += part.size();
  CHECK(covered == region.size());
}

TEST_CASE("default superpixel count") {
  CHECK(default_superpixels(1) == 1);
  CHECK(default_superpixels(4096) == 1);
  CHECK(default_superpixels(4097) == 2);
  CHECK(default_superpixels(640 * 480) == 75);
}

TEST_CASE("attention selection") {
  // 4x1 strip of regions, each 4x4 pixels on a 16x4 image.
  const int w = 16, h = 4;
  RgbImage img(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) img.at(x, y) = Rgb{static_cast<std::uint8_t>(x / 4 * 60), 40, 40};
  SemanticMask sem;
  sem.labels = GrayImage(w, h, 0);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) sem.labels.at(x, y) = static_cast<std::uint8_t>(x / 4);
  sem.class_names = {{0, "a"}, {1, "b"}, {2, "c"}, {3, "d"}};
  const Partition p = build_partition(img, sem, std::nullopt, 1, SensitivityPolicy::filter);
  REQUIRE(p.regions.size() == 4);

  ScalarMap att(w, h, 0.0);
  for (int y = 0; y < h; ++y) att.at(9, y) = 1.0;  // inside region 2
  const auto most = select_regions(p, att, AttentionMode::most_attended, 0.1);
  REQUIRE(most.size() == 1);
  CHECK(p.regions[static_cast<std::size_t>(most[0])].pixels.front() == 8);
  const auto least = select_regions(p, att, AttentionMode::least_attended, 0.5);
  CHECK(least.size() == 2);
  CHECK(std::find(least.begin(), least.end(), most[0]) == least.end());

  const auto all = select_regions(p, att, AttentionMode::most_attended, 1.0);
  CHECK(all.size() == 4);
  CHECK_THROWS(select_regions(p, att, AttentionMode::most_attended, 0.0));

  const Partition scored = score_regions(p, att);
  double sum = 0;
  for (const auto& r : scored.regions) sum += r.attention_score * static_cast<double>(r.pixels.size());
  CHECK(sum == doctest::Approx(1.0));
}

TEST_CASE("selection properties") {
  const auto items = load_corpus(ADVX_FIXTURES "/corpus");
  Rng rng(12);
  for (const auto& item : items) {
    const Partition p = build_partition(item.image, item.semantic, item.skin, 10, SensitivityPolicy::filter);
    const std::size_t total = p.non_sensitive_pixel_count();
    std::size_t largest = 0;
    for (const auto& r : p.regions)
      if (!r.sensitive) largest = std::max(largest, r.pixels.size());
    for (int t = 0; t < 40; ++t) {
      ScalarMap att(16, 16);
      for (auto& v : att.pixels()) v = rng.uniform();
      const double f = rng.uniform(0.01, 1.0);
      const auto sel = select_regions(p, att, AttentionMode::most_attended, f);
      std::size_t covered = 0;
      for (int id : sel) {
        const auto& r = p.regions[static_cast<std::size_t>(id)];
        REQUIRE_FALSE(r.sensitive);
        covered += r.pixels.size();
      }
      REQUIRE(covered >= static_cast<std::size_t>(f * static_cast<double>(total) - 1e-6));
      // Dropping the last region would fall short.
      const auto& last = p.regions[static_cast<std::size_t>(sel.back())];
      REQUIRE(covered - last.pixels.size() < static_cast<std::size_t>(std::ceil(f * double(total) - 1e-9)));

      // Most- and least-attended picks are disjoint whenever the two fractions
      // leave room for the largest region.
      const double room = 1.0 - static_cast<double>(largest) / static_cast<double>(total);
      if (room > 0.02) {
        const double f1 = rng.uniform(0.0, room), f2 = room - f1;
        if (f1 > 0.0 && f2 > 0.0) {
          const auto a = select_regions(p, att, AttentionMode::most_attended, f1);
          const auto b = select_regions(p, att, AttentionMode::least_attended, f2);
          std::set<int> sa(a.begin(), a.end());
          for (int id : b) REQUIRE(sa.count(id) == 0);
        }
      }
    }
  }
}

TEST_CASE("mask files round trip") {
  const fs::path dir = fs::temp_directory_path() / "advx_mask_test";
  fs::remove_all(dir);
  SemanticMask m = two_class_mask(9, 5, 4);
  save_semantic_mask(m, dir / "m.png", dir / "m.json");
  const SemanticMask back = load_semantic_mask(dir / "m.png", dir / "m.json");
  CHECK(back.labels == m.labels);
  CHECK(back.class_names == m.class_names);
  CHECK(back.name_of(1) == "person");
  CHECK(back.name_of(77) == "other");
  write_text(dir / "bad.json", "{not json");
  CHECK_THROWS_AS(load_semantic_mask(dir / "m.png", dir / "bad.json"), IoError);
  CHECK_THROWS_AS(load_semantic_mask(dir / "missing.png", dir / "m.json"), IoError);
  fs::remove_all(dir);
}

TEST_CASE("mismatched mask shape is rejected") {
  RgbImage img(4, 4);
  SemanticMask sem = two_class_mask(5, 4, 2);
  CHECK_THROWS_AS(build_partition(img, sem, std::nullopt, 0, SensitivityPolicy::filter), DimensionMismatch);
}
