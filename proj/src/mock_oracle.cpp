#include "advx/mock_oracle.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "advx/oracle.hpp"

namespace advx {
namespace mock {

std::optional<int> hue_bucket(Rgb p) noexcept {
  const int mx = std::max({p.r, p.g, p.b});
  const int mn = std::min({p.r, p.g, p.b});
  const int chroma = mx - mn;
  if (chroma < kMinChroma) return std::nullopt;
  double hue;
  if (mx == p.r)
    hue = 60.0 * std::fmod((double(p.g) - p.b) / chroma + 6.0, 6.0);
  else if (mx == p.g)
    hue = 60.0 * ((double(p.b) - p.r) / chroma + 2.0);
  else
    hue = 60.0 * ((double(p.r) - p.g) / chroma + 4.0);
  // Upper bucket edges in degrees; red wraps around 345..15.
  static constexpr std::array<double, 8> kEdges = {15, 45, 75, 165, 195, 255, 285, 345};
  for (int i = 0; i < kHueBuckets; ++i)
    if (hue < kEdges[i]) return i;
  return 0;
}

ScalarMap local_contrast(const RgbImage& image) {
  const ScalarMap y = luma_map(image);
  const int w = image.width(), h = image.height();
  ScalarMap out(w, h);
  for (int yy = 0; yy < h; ++yy) {
    for (int xx = 0; xx < w; ++xx) {
      double sum = 0.0;
      for (int dy = -1; dy <= 1; ++dy)
        for (int dx = -1; dx <= 1; ++dx)
          sum += y.at(std::clamp(xx + dx, 0, w - 1), std::clamp(yy + dy, 0, h - 1));
      out.at(xx, yy) = std::abs(y.at(xx, yy) - sum / 9.0);
    }
  }
  return out;
}

Features extract_features(const RgbImage& image) {
  Features f;
  if (image.empty()) return f;
  double luma_sum = 0.0;
  for (const Rgb& p : image.pixels()) {
    luma_sum += luma(p);
    if (auto b = hue_bucket(p)) ++f.histogram[*b];
  }
  const double n = static_cast<double>(image.size());
  f.mean_luma = luma_sum / n;
  f.brightness_tercile = f.mean_luma < 85.0 ? 0 : (f.mean_luma < 170.0 ? 1 : 2);

  // Ties go to the lower bucket index.
  for (int i = 0; i < kHueBuckets; ++i) {
    if (f.histogram[i] == 0) continue;
    if (f.dominant < 0 || f.histogram[i] > f.histogram[f.dominant]) {
      f.second = f.dominant;
      f.dominant = i;
    } else if (f.second < 0 || f.histogram[i] > f.histogram[f.second]) {
      f.second = i;
    }
  }

  const ScalarMap contrast = local_contrast(image);
  double csum = 0.0;
  for (double v : contrast.pixels()) csum += v;
  f.mean_contrast = csum / n;
  f.texture = f.mean_contrast < kTexturedThreshold
                  ? Texture::smooth
                  : (f.mean_contrast < kBusyThreshold ? Texture::textured : Texture::busy);

  f.activity_index = 2 * std::max(f.dominant, 0) + (f.brightness_tercile > 0 ? 1 : 0);
  return f;
}

WordList split_words(std::string_view sentence) {
  WordList words;
  std::istringstream in{std::string(sentence)};
  for (std::string w; in >> w;) words.push_back(w);
  return words;
}

namespace {

std::string fill_template(std::string_view tmpl, std::string_view first, std::string_view second) {
  std::string out;
  for (std::size_t i = 0; i < tmpl.size(); ++i) {
    if (tmpl[i] == '{' && i + 2 < tmpl.size() && tmpl[i + 2] == '}') {
      out += tmpl[i + 1] == '1' ? first : second;
      i += 2;
    } else {
      out += tmpl[i];
    }
  }
  return out;
}

ScalarMap attention_from_contrast(const ScalarMap& contrast) {
  const int w = contrast.width(), h = contrast.height();
  ScalarMap att(kAttentionSize, kAttentionSize);
  double total = 0.0;
  for (int j = 0; j < kAttentionSize; ++j) {
    const int y0 = j * h / kAttentionSize;
    const int y1 = std::max(y0 + 1, (j + 1) * h / kAttentionSize);
    for (int i = 0; i < kAttentionSize; ++i) {
      const int x0 = i * w / kAttentionSize;
      const int x1 = std::max(x0 + 1, (i + 1) * w / kAttentionSize);
      double s = 0.0;
      for (int y = y0; y < std::min(y1, h); ++y)
        for (int x = x0; x < std::min(x1, w); ++x) s += contrast.at(x, y);
      s /= static_cast<double>(std::min(y1, h) - y0) * (std::min(x1, w) - x0);
      att.at(i, j) = s;
      total += s;
    }
  }
  for (double& v : att.pixels())
    v = total > 0.0 ? v / total : 1.0 / (kAttentionSize * kAttentionSize);
  return att;
}

}  // namespace
}  // namespace mock

OracleOutput mock_predict(const RgbImage& image) {
  if (image.empty()) throw std::invalid_argument("mock_predict: empty image");
  const mock::Features f = mock::extract_features(image);
  const std::string_view first =
      f.dominant >= 0 ? mock::kBucketNouns[f.dominant] : mock::kAchromaticNoun;
  const std::string_view second =
      f.second >= 0 ? mock::kBucketNouns[f.second] : mock::kAchromaticNoun;

  OracleOutput out;
  out.activity = mock::split_words(mock::kActivities[f.activity_index]);
  out.explanation = mock::split_words(mock::fill_template(
      mock::kExplanationTemplates[static_cast<int>(f.texture)], first, second));
  out.attention = mock::attention_from_contrast(mock::local_contrast(image));
  return out;
}

std::uint64_t fnv1a64(std::string_view bytes) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::size_t HashedBagOfWords::bucket(std::string_view token) const noexcept {
  return static_cast<std::size_t>(fnv1a64(normalize_token(token)) % dimension_);
}

Embedding HashedBagOfWords::embed(const WordList& sentence) {
  Embedding v(dimension_, 0.0);
  for (const auto& token : sentence) {
    const std::string norm = normalize_token(token);
    if (norm.empty()) continue;
    v[fnv1a64(norm) % dimension_] += 1.0;
  }
  double norm2 = 0.0;
  for (double x : v) norm2 += x * x;
  if (norm2 > 0.0) {
    const double inv = 1.0 / std::sqrt(norm2);
    for (double& x : v) x *= inv;
  }
  return v;
}

std::uint64_t QueryLedger::acquire() {
  std::uint64_t current = issued_.load();
  for (;;) {
    if (budget_ > 0 && current >= budget_)
      throw OracleError(OracleError::Kind::budget_exhausted,
                        "query budget of " + std::to_string(budget_) + " exhausted");
    if (issued_.compare_exchange_weak(current, current + 1)) return current + 1;
  }
}

OracleReply OracleSession::predict(const RgbImage& image) {
  const std::uint64_t index = ledger_.acquire();
  return {oracle_.predict(image), index};
}

}  // namespace advx
