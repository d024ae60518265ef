#pragma once

// Rule set behind mock_predict. Published in docs/mock_oracle.md.

#include <array>
#include <optional>
#include <string_view>

#include "advx/core.hpp"
#include "advx/image.hpp"

namespace advx::mock {

inline constexpr int kHueBuckets = 8;
inline constexpr int kAttentionSize = 16;
/// Pixels whose HSV chroma (max - min) is below this are achromatic and ignored
/// by the hue histogram.
inline constexpr int kMinChroma = 40;
/// Mean local contrast thresholds separating smooth / textured / busy.
inline constexpr double kTexturedThreshold = 3.0;
inline constexpr double kBusyThreshold = 9.0;

/// red, orange, yellow, green, cyan, blue, purple, magenta
inline constexpr std::array<std::string_view, kHueBuckets> kBucketColors = {
    "red", "orange", "yellow", "green", "cyan", "blue", "purple", "magenta"};
/// Scene noun each hue bucket contributes to explanations.
inline constexpr std::array<std::string_view, kHueBuckets> kBucketNouns = {
    "roses", "sand", "sunlight", "grass", "water", "sky", "flowers", "fabric"};
/// Noun used when fewer than two chromatic buckets are populated.
inline constexpr std::string_view kAchromaticNoun = "shadows";

/// Activity rule table, indexed by 2 * dominant_bucket + (brightness tercile > 0).
inline constexpr std::array<std::string_view, 16> kActivities = {
    "sitting by a campfire",    "playing basketball",        // red
    "watching the sunset",      "playing beach volleyball",  // orange
    "reading by lamplight",     "harvesting wheat",          // yellow
    "hiking in a forest",       "mowing the lawn",           // green
    "swimming at night",        "swimming in a pool",        // cyan
    "stargazing",               "flying a kite",             // blue
    "dancing at a concert",     "picking flowers",           // purple
    "singing karaoke",          "shopping for clothes",      // magenta
};

enum class Texture { smooth = 0, textured = 1, busy = 2 };

/// Explanation templates per texture class; {1} and {2} are the top two hue nouns.
inline constexpr std::array<std::string_view, 3> kExplanationTemplates = {
    "because the {1} and the {2} look calm and smooth",
    "because there is {1} next to {2} with a grainy pattern",
    "since sharp edges of {1} cut through busy {2} detail everywhere",
};

/// Hue bucket of a pixel, or nullopt if achromatic.
std::optional<int> hue_bucket(Rgb p) noexcept;

/// |luma - mean of the 3x3 neighborhood| per pixel, edges clamped.
ScalarMap local_contrast(const RgbImage& image);

struct Features {
  std::array<std::size_t, kHueBuckets> histogram{};
  /// -1 when no chromatic pixel exists.
  int dominant = -1;
  int second = -1;
  double mean_luma = 0.0;
  int brightness_tercile = 0;
  double mean_contrast = 0.0;
  Texture texture = Texture::smooth;
  int activity_index = 0;
};

Features extract_features(const RgbImage& image);

WordList split_words(std::string_view sentence);

}  // namespace advx::mock
