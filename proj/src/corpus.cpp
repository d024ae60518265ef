#include "advx/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "advx/png_io.hpp"
#include "advx/rng.hpp"

namespace advx {

namespace fs = std::filesystem;

namespace {

bool ends_with(const std::string& s, std::string_view suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

}  // namespace

CorpusItem load_item(const fs::path& image_png) {
  const fs::path dir = image_png.parent_path();
  CorpusItem item;
  item.id = image_png.stem().string();
  item.image = read_png_rgb(image_png);
  item.semantic = load_semantic_mask(dir / (item.id + ".mask.png"), dir / (item.id + ".mask.json"));
  const fs::path skin = dir / (item.id + ".skin.png");
  if (fs::exists(skin)) item.skin = load_skin_mask(skin);
  return item;
}

std::vector<CorpusItem> load_corpus(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw IoError("corpus directory not found: " + dir.string());
  std::vector<fs::path> images;
  for (const auto& entry : fs::directory_iterator(dir)) {
    const std::string name = entry.path().filename().string();
    if (!entry.is_regular_file() || !ends_with(name, ".png")) continue;
    if (ends_with(name, ".mask.png") || ends_with(name, ".skin.png")) continue;
    images.push_back(entry.path());
  }
  std::sort(images.begin(), images.end());
  std::vector<CorpusItem> items;
  for (const auto& p : images) items.push_back(load_item(p));
  return items;
}

void save_item(const fs::path& dir, const CorpusItem& item) {
  write_png(dir / (item.id + ".png"), item.image);
  save_semantic_mask(item.semantic, dir / (item.id + ".mask.png"), dir / (item.id + ".mask.json"));
  if (item.skin) write_png(dir / (item.id + ".skin.png"), *item.skin);
}

void save_corpus(const fs::path& dir, const std::vector<CorpusItem>& items) {
  for (const auto& item : items) save_item(dir, item);
}

namespace {

Rgb hsv(double hue, double s, double v) {
  hue = std::fmod(hue + 360.0, 360.0);
  const double c = v * s;
  const double x = c * (1.0 - std::abs(std::fmod(hue / 60.0, 2.0) - 1.0));
  const double m = v - c;
  double r = 0, g = 0, b = 0;
  switch (static_cast<int>(hue / 60.0)) {
    case 0: r = c, g = x; break;
    case 1: r = x, g = c; break;
    case 2: g = c, b = x; break;
    case 3: g = x, b = c; break;
    case 4: r = x, b = c; break;
    default: r = c, b = x; break;
  }
  return {clamp_channel(255.0 * (r + m)), clamp_channel(255.0 * (g + m)), clamp_channel(255.0 * (b + m))};
}

Rgb shifted(Rgb p, double d) {
  return {clamp_channel(p.r + d), clamp_channel(p.g + d), clamp_channel(p.b + d)};
}

// Hue centers of the eight mock buckets, skipping green and blue which the
// vegetation and sky bands already use.
constexpr double kBackgroundHues[] = {0.0, 30.0, 60.0, 180.0, 270.0, 315.0};

}  // namespace

CorpusItem synthetic_item(std::uint64_t seed, int index) {
  Rng rng(derive_seed({seed, 0x73796eULL, static_cast<std::uint64_t>(index)}));
  constexpr int n = kSyntheticSize;
  CorpusItem item;
  char id[32];
  std::snprintf(id, sizeof id, "syn-%03d", index);
  item.id = id;
  item.image = RgbImage(n, n);
  item.semantic.labels = GrayImage(n, n, kOther);
  item.semantic.class_names = {{kOther, "other"}, {kPerson, "person"}, {kSky, "sky"}, {kVegetation, "vegetation"}};
  GrayImage skin(n, n, 0);

  const int sky_rows = 6 + static_cast<int>(rng.below(7));
  const int veg_rows = 6 + static_cast<int>(rng.below(7));
  const int split = 22 + static_cast<int>(rng.below(21));
  const int px = 4 + static_cast<int>(rng.below(44));
  const int body_top = n - veg_rows - 24;
  const int head_cy = body_top - 5, head_cx = px + 6;

  const std::size_t nh = std::size(kBackgroundHues);
  const std::size_t h1 = rng.below(nh);
  const std::size_t h2 = (h1 + 1 + rng.below(nh - 1)) % nh;
  const double value = 0.55 + 0.3 * rng.uniform();
  const Rgb left = hsv(kBackgroundHues[h1] + rng.uniform(-8, 8), 0.55 + 0.2 * rng.uniform(), value);
  const Rgb right = hsv(kBackgroundHues[h2] + rng.uniform(-8, 8), 0.55 + 0.2 * rng.uniform(), value);
  const Rgb sky = hsv(220 + rng.uniform(-10, 10), 0.5, 0.9);
  const Rgb veg = hsv(110 + rng.uniform(-10, 10), 0.6, 0.5);
  const Rgb cloth = hsv(rng.uniform(0, 360), 0.3, 0.35);
  const Rgb skin_tone{224, 172, 140};
  // Background grain amplitude; alternates between fine and coarse textures.
  const double grain = index % 2 == 0 ? 3.0 + 2.0 * rng.uniform() : 9.0 + 4.0 * rng.uniform();

  for (int y = 0; y < n; ++y) {
    for (int x = 0; x < n; ++x) {
      Rgb p;
      std::uint8_t label = kOther;
      const int dx = x - head_cx, dy = y - head_cy;
      if (y < sky_rows) {
        p = sky, label = kSky;
      } else if (y >= n - veg_rows) {
        p = veg, label = kVegetation;
      } else if (dx * dx + dy * dy <= 25) {
        p = skin_tone, label = kPerson;
        skin.at(x, y) = 255;
      } else if (y >= body_top && x >= px && x < px + 12) {
        p = cloth, label = kPerson;
      } else {
        p = shifted(x < split ? left : right, rng.uniform(-grain, grain));
      }
      item.image.at(x, y) = p;
      item.semantic.labels.at(x, y) = label;
    }
  }
  item.skin = std::move(skin);
  return item;
}

std::vector<CorpusItem> synthetic_corpus(int count, std::uint64_t seed) {
  std::vector<CorpusItem> items;
  items.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) items.push_back(synthetic_item(seed, i));
  return items;
}

}  // namespace advx
