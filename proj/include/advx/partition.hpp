#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "advx/image.hpp"
#include "advx/png_io.hpp"

namespace advx {

class PartitionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised when a policy leaves nothing alterable in the image.
class EmptyNonSensitive : public PartitionError {
 public:
  EmptyNonSensitive() : PartitionError("no non-sensitive region: image cannot be attacked under this policy") {}
};

/// Per-pixel class ids plus the id -> name table.
struct SemanticMask {
  GrayImage labels;
  std::map<int, std::string> class_names;

  /// Name for an id; unknown ids map to "other".
  std::string name_of(int id) const;
};

/// Reads an 8-bit label PNG and its sidecar JSON {"classes": {"0": "other", ...}}.
SemanticMask load_semantic_mask(const std::filesystem::path& png,
                                const std::filesystem::path& classes_json);
void save_semantic_mask(const SemanticMask& mask, const std::filesystem::path& png,
                        const std::filesystem::path& classes_json);
/// Binary skin mask: any nonzero value is skin.
GrayImage load_skin_mask(const std::filesystem::path& png);

enum class SensitivityPolicy {
  /// Skin unalterable; person, sky, vegetation and water are sensitive (range-restricted).
  colorization,
  /// Only skin is sensitive.
  filter,
};

inline constexpr const char* kSkinClassName = "skin";

struct Region {
  int id = 0;
  /// Sorted row-major pixel indices.
  std::vector<std::uint32_t> pixels;
  int semantic_class = 0;
  std::string class_name;
  bool sensitive = false;
  bool skin = false;
  double attention_score = 0.0;
};

/// Disjoint regions covering every pixel exactly once.
struct Partition {
  int width = 0;
  int height = 0;
  std::vector<Region> regions;
  /// Region id per pixel.
  Raster<int> label_map;

  std::size_t non_sensitive_pixel_count() const;
  /// Throws PartitionError if coverage or disjointness is violated.
  void check_invariants() const;
};

/// Per-region oversegmentation count used when superpixel_target is 0.
int default_superpixels(std::size_t region_pixels);

/// Builds the region partition: class-connected components, skin components as sensitive
/// regions, and oversegmentation of each non-sensitive component into about
/// `superpixel_target` subregions (0 = automatic per region).
Partition build_partition(const RgbImage& image, const SemanticMask& semantic,
                          const std::optional<GrayImage>& skin, int superpixel_target,
                          SensitivityPolicy policy);

struct OversegmentOptions {
  double spatial_weight = 10.0;
  int iterations = 10;
};

/// Splits a region into at most k connected, color-homogeneous subregions with
/// grid-seeded k-means over (L, a, b, x, y). Returns pixel sets ordered by first pixel.
std::vector<std::vector<std::uint32_t>> oversegment(const RgbImage& image,
                                                    const std::vector<std::uint32_t>& region,
                                                    int k, const OversegmentOptions& opt = {});

enum class AttentionMode { most_attended, least_attended };

/// Copy of the partition with attention_score set to the mean of the attention map
/// (resized to image resolution, normalized to sum 1) over each region.
Partition score_regions(const Partition& partition, const ScalarMap& attention);

/// Ranks non-sensitive regions by attention score and returns the ids of the shortest
/// ranked prefix whose pixel count reaches ceil(fraction * non-sensitive pixels).
/// Ties: larger region first, then smaller id.
std::vector<int> select_regions(const Partition& partition, const ScalarMap& attention,
                                AttentionMode mode, double fraction);

/// Pixel mask (1 = selected) covering the given regions.
GrayImage region_mask(const Partition& partition, const std::vector<int>& region_ids);
/// Mask of all non-sensitive regions.
GrayImage non_sensitive_mask(const Partition& partition);

}  // namespace advx
