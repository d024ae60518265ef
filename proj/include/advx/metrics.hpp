#pragma once

#include <functional>
#include <span>
#include <vector>

#include "advx/core.hpp"
#include "advx/image.hpp"

namespace advx {

using Embedding = std::vector<double>;
using EmbedFn = std::function<Embedding(const WordList&)>;

/// Cosine similarity; 0 when either vector is all zeros.
double cosine_similarity(std::span<const double> u, std::span<const double> v);

/// Normalized cosine similarity of sentence embeddings, 0.5 * (cos + 1), in [0, 1].
double explanation_similarity(const Embedding& e1, const Embedding& e2);
double explanation_similarity(const WordList& e1, const WordList& e2, const EmbedFn& embed);

struct SsimOptions {
  int window = 8;
  double k1 = 0.01;
  double k2 = 0.03;
  double dynamic_range = 255.0;
};

/// Mean single-scale SSIM over all stride-1 windows of the BT.601 luma planes.
/// Uniform window weights, population (co)variances. Images smaller than the
/// window use a window clipped to the image size.
double ssim(const RgbImage& reference, const RgbImage& candidate, const SsimOptions& opt = {});
double ssim(const ScalarMap& reference, const ScalarMap& candidate, const SsimOptions& opt = {});

/// Opponent-space colorfulness: sigma + 0.3 * mu with rg = R - G, yb = (R + G)/2 - B,
/// population standard deviations.
double colorfulness(const RgbImage& image);

}  // namespace advx
