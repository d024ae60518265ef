#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "advx/image.hpp"
#include "advx/partition.hpp"

namespace advx {

/// One attack input: image, semantic mask and optional skin mask.
struct CorpusItem {
  std::string id;
  RgbImage image;
  SemanticMask semantic;
  std::optional<GrayImage> skin;
};

/// Loads <id>.png with <id>.mask.png, <id>.mask.json and optional <id>.skin.png.
CorpusItem load_item(const std::filesystem::path& image_png);
/// Every *.png in `dir` that is not a mask, sorted by id.
std::vector<CorpusItem> load_corpus(const std::filesystem::path& dir);
void save_item(const std::filesystem::path& dir, const CorpusItem& item);
void save_corpus(const std::filesystem::path& dir, const std::vector<CorpusItem>& items);

inline constexpr int kSyntheticSize = 64;

/// Label ids used by the synthetic generator.
enum SyntheticClass : std::uint8_t { kOther = 0, kPerson = 1, kSky = 2, kVegetation = 3 };

/// Scene with a sky band, a vegetation band, a person with a skin-colored head and
/// a two-hue textured background. Deterministic in (seed, index).
CorpusItem synthetic_item(std::uint64_t seed, int index);
/// Items "syn-000" ... in index order.
std::vector<CorpusItem> synthetic_corpus(int count, std::uint64_t seed);

}  // namespace advx
