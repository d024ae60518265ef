#include "advx/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace advx {

double cosine_similarity(std::span<const double> u, std::span<const double> v) {
  if (u.size() != v.size()) throw DimensionMismatch("cosine_similarity: vector length mismatch");
  double dot = 0.0, nu = 0.0, nv = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    dot += u[i] * v[i];
    nu += u[i] * u[i];
    nv += v[i] * v[i];
  }
  if (nu == 0.0 || nv == 0.0) return 0.0;
  return std::clamp(dot / (std::sqrt(nu) * std::sqrt(nv)), -1.0, 1.0);
}

double explanation_similarity(const Embedding& e1, const Embedding& e2) {
  return 0.5 * (cosine_similarity(e1, e2) + 1.0);
}

double explanation_similarity(const WordList& e1, const WordList& e2, const EmbedFn& embed) {
  return explanation_similarity(embed(e1), embed(e2));
}

namespace {

// Summed-area table with a zero top row and left column.
class Integral {
 public:
  template <typename F>
  Integral(int w, int h, F value) : w_(w + 1), sums_(static_cast<std::size_t>(w + 1) * (h + 1)) {
    for (int y = 0; y < h; ++y) {
      double row = 0.0;
      for (int x = 0; x < w; ++x) {
        row += value(x, y);
        at(x + 1, y + 1) = at(x + 1, y) + row;
      }
    }
  }
  double box(int x, int y, int bw, int bh) const {
    return at(x + bw, y + bh) - at(x, y + bh) - at(x + bw, y) + at(x, y);
  }

 private:
  double& at(int x, int y) { return sums_[static_cast<std::size_t>(y) * w_ + x]; }
  double at(int x, int y) const { return sums_[static_cast<std::size_t>(y) * w_ + x]; }
  int w_;
  std::vector<double> sums_;
};

}  // namespace

double ssim(const ScalarMap& ref, const ScalarMap& cand, const SsimOptions& opt) {
  require_same_shape(ref.width(), ref.height(), cand.width(), cand.height(), "ssim");
  if (ref.empty()) throw std::invalid_argument("ssim: empty image");
  const int w = ref.width(), h = ref.height();
  const int ww = std::min(opt.window, w), wh = std::min(opt.window, h);
  const double c1 = std::pow(opt.k1 * opt.dynamic_range, 2);
  const double c2 = std::pow(opt.k2 * opt.dynamic_range, 2);

  const Integral sx(w, h, [&](int x, int y) { return ref.at(x, y); });
  const Integral sy(w, h, [&](int x, int y) { return cand.at(x, y); });
  const Integral sxx(w, h, [&](int x, int y) { return ref.at(x, y) * ref.at(x, y); });
  const Integral syy(w, h, [&](int x, int y) { return cand.at(x, y) * cand.at(x, y); });
  const Integral sxy(w, h, [&](int x, int y) { return ref.at(x, y) * cand.at(x, y); });

  const double n = static_cast<double>(ww) * wh;
  double total = 0.0;
  long windows = 0;
  for (int y = 0; y + wh <= h; ++y) {
    for (int x = 0; x + ww <= w; ++x) {
      const double mx = sx.box(x, y, ww, wh) / n;
      const double my = sy.box(x, y, ww, wh) / n;
      // Clamp tiny negative variances from cancellation.
      const double vx = std::max(0.0, sxx.box(x, y, ww, wh) / n - mx * mx);
      const double vy = std::max(0.0, syy.box(x, y, ww, wh) / n - my * my);
      const double cxy = sxy.box(x, y, ww, wh) / n - mx * my;
      total += ((2 * mx * my + c1) * (2 * cxy + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2));
      ++windows;
    }
  }
  return total / static_cast<double>(windows);
}

double ssim(const RgbImage& reference, const RgbImage& candidate, const SsimOptions& opt) {
  require_same_shape(reference.width(), reference.height(), candidate.width(),
                     candidate.height(), "ssim");
  if (reference == candidate) return 1.0;
  return ssim(luma_map(reference), luma_map(candidate), opt);
}

double colorfulness(const RgbImage& image) {
  if (image.empty()) return 0.0;
  double sum_rg = 0, sum_yb = 0;
  for (const Rgb& p : image.pixels()) {
    sum_rg += double(p.r) - p.g;
    sum_yb += 0.5 * (double(p.r) + p.g) - p.b;
  }
  const double n = static_cast<double>(image.size());
  const double mean_rg = sum_rg / n, mean_yb = sum_yb / n;
  double var_rg = 0, var_yb = 0;
  for (const Rgb& p : image.pixels()) {
    const double drg = (double(p.r) - p.g) - mean_rg;
    const double dyb = (0.5 * (double(p.r) + p.g) - p.b) - mean_yb;
    var_rg += drg * drg;
    var_yb += dyb * dyb;
  }
  const double sigma = std::sqrt(var_rg / n + var_yb / n);
  const double mu = std::sqrt(mean_rg * mean_rg + mean_yb * mean_yb);
  return sigma + 0.3 * mu;
}

}  // namespace advx
