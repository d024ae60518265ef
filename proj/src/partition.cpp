#include "advx/partition.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <json.hpp>
#include <limits>
#include <numeric>
#include <set>

#include "advx/core.hpp"

namespace advx {

using json = nlohmann::json;

std::string SemanticMask::name_of(int id) const {
  auto it = class_names.find(id);
  return it == class_names.end() ? "other" : it->second;
}

SemanticMask load_semantic_mask(const std::filesystem::path& png,
                                const std::filesystem::path& classes_json) {
  SemanticMask mask;
  mask.labels = read_png_gray(png);
  json j;
  try {
    j = json::parse(read_text(classes_json));
    for (const auto& [key, value] : j.at("classes").items())
      mask.class_names[std::stoi(key)] = value.get<std::string>();
  } catch (const IoError&) {
    throw;
  } catch (const std::exception& e) {
    throw IoError("invalid class table " + classes_json.string() + ": " + e.what());
  }
  return mask;
}

void save_semantic_mask(const SemanticMask& mask, const std::filesystem::path& png,
                        const std::filesystem::path& classes_json) {
  write_png(png, mask.labels);
  json classes = json::object();
  for (const auto& [id, name] : mask.class_names) classes[std::to_string(id)] = name;
  write_text(classes_json, json{{"classes", classes}}.dump(2) + "\n");
}

GrayImage load_skin_mask(const std::filesystem::path& png) { return read_png_gray(png); }

std::size_t Partition::non_sensitive_pixel_count() const {
  std::size_t n = 0;
  for (const auto& r : regions)
    if (!r.sensitive) n += r.pixels.size();
  return n;
}

void Partition::check_invariants() const {
  const std::size_t total = static_cast<std::size_t>(width) * height;
  if (!label_map.same_shape(width, height)) throw PartitionError("label map shape mismatch");
  std::vector<int> owner(total, -1);
  for (const auto& r : regions) {
    if (r.pixels.empty()) throw PartitionError("empty region " + std::to_string(r.id));
    for (auto p : r.pixels) {
      if (p >= total) throw PartitionError("region pixel out of bounds");
      if (owner[p] != -1) throw PartitionError("regions overlap at pixel " + std::to_string(p));
      owner[p] = r.id;
      if (label_map[p] != r.id) throw PartitionError("label map disagrees with region list");
    }
  }
  for (std::size_t i = 0; i < total; ++i)
    if (owner[i] == -1) throw PartitionError("pixel " + std::to_string(i) + " not covered");
}

int default_superpixels(std::size_t region_pixels) {
  return static_cast<int>(std::max<std::size_t>(1, (region_pixels + 4095) / 4096));
}

namespace {

/// 4-connected components of pixels sharing the same key; key < 0 is skipped.
std::vector<std::vector<std::uint32_t>> components(int w, int h, const std::vector<int>& key) {
  std::vector<std::vector<std::uint32_t>> out;
  std::vector<char> seen(key.size(), 0);
  std::deque<std::uint32_t> queue;
  for (std::uint32_t start = 0; start < key.size(); ++start) {
    if (seen[start] || key[start] < 0) continue;
    std::vector<std::uint32_t> comp;
    seen[start] = 1;
    queue.push_back(start);
    while (!queue.empty()) {
      const std::uint32_t p = queue.front();
      queue.pop_front();
      comp.push_back(p);
      const int x = static_cast<int>(p % w), y = static_cast<int>(p / w);
      const std::uint32_t nbrs[4] = {p - 1, p + 1, p - static_cast<std::uint32_t>(w),
                                     p + static_cast<std::uint32_t>(w)};
      const bool ok[4] = {x > 0, x + 1 < w, y > 0, y + 1 < h};
      for (int k = 0; k < 4; ++k) {
        if (!ok[k]) continue;
        const std::uint32_t q = nbrs[k];
        if (!seen[q] && key[q] == key[start]) {
          seen[q] = 1;
          queue.push_back(q);
        }
      }
    }
    std::sort(comp.begin(), comp.end());
    out.push_back(std::move(comp));
  }
  return out;
}

bool colorization_sensitive(const std::string& name) {
  return name == "person" || name == "sky" || name == "vegetation" || name == "water";
}

}  // namespace

std::vector<std::vector<std::uint32_t>> oversegment(const RgbImage& image,
                                                    const std::vector<std::uint32_t>& region,
                                                    int k, const OversegmentOptions& opt) {
  if (k < 1) throw std::invalid_argument("oversegment: k must be >= 1");
  if (region.empty()) return {};
  if (k == 1 || region.size() == 1) return {region};
  const int w = image.width(), h = image.height();

  struct Feature {
    double l, a, b, x, y;
  };
  std::vector<Feature> feats(region.size());
  int x0 = w, y0 = h, x1 = -1, y1 = -1;
  for (std::size_t i = 0; i < region.size(); ++i) {
    const int x = static_cast<int>(region[i] % w), y = static_cast<int>(region[i] / w);
    const Lab lab = rgb_to_lab(image[region[i]]);
    feats[i] = {lab.l, lab.a, lab.b, double(x), double(y)};
    x0 = std::min(x0, x);
    y0 = std::min(y0, y);
    x1 = std::max(x1, x);
    y1 = std::max(y1, y);
  }
  const double bw = x1 - x0 + 1, bh = y1 - y0 + 1;
  const double step = std::sqrt(static_cast<double>(region.size()) / k);

  // Regular grid over the bounding box, snapped to the nearest region pixel.
  // nx * ny never exceeds k.
  const int nx = std::clamp(static_cast<int>(std::lround(std::sqrt(k * bw / bh))), 1, k);
  const int ny = std::max(1, k / nx);
  std::vector<Feature> centers;
  std::set<std::size_t> used;
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      const double cx = x0 + (i + 0.5) * bw / nx, cy = y0 + (j + 0.5) * bh / ny;
      std::size_t best = 0;
      double best_d = std::numeric_limits<double>::infinity();
      for (std::size_t p = 0; p < feats.size(); ++p) {
        const double d = (feats[p].x - cx) * (feats[p].x - cx) + (feats[p].y - cy) * (feats[p].y - cy);
        if (d < best_d) {
          best_d = d;
          best = p;
        }
      }
      if (used.insert(best).second) centers.push_back(feats[best]);
    }
  }

  const double spatial = (opt.spatial_weight / step) * (opt.spatial_weight / step);
  std::vector<int> label(region.size(), 0);
  for (int iter = 0; iter < opt.iterations; ++iter) {
    for (std::size_t p = 0; p < feats.size(); ++p) {
      double best_d = std::numeric_limits<double>::infinity();
      for (std::size_t c = 0; c < centers.size(); ++c) {
        const Feature& f = feats[p];
        const Feature& m = centers[c];
        const double dc = (f.l - m.l) * (f.l - m.l) + (f.a - m.a) * (f.a - m.a) + (f.b - m.b) * (f.b - m.b);
        const double ds = (f.x - m.x) * (f.x - m.x) + (f.y - m.y) * (f.y - m.y);
        const double d = dc + spatial * ds;
        if (d < best_d) {
          best_d = d;
          label[p] = static_cast<int>(c);
        }
      }
    }
    std::vector<Feature> sums(centers.size(), Feature{0, 0, 0, 0, 0});
    std::vector<std::size_t> counts(centers.size(), 0);
    for (std::size_t p = 0; p < feats.size(); ++p) {
      Feature& s = sums[label[p]];
      s.l += feats[p].l;
      s.a += feats[p].a;
      s.b += feats[p].b;
      s.x += feats[p].x;
      s.y += feats[p].y;
      ++counts[label[p]];
    }
    for (std::size_t c = 0; c < centers.size(); ++c) {
      if (counts[c] == 0) continue;
      const double n = static_cast<double>(counts[c]);
      centers[c] = {sums[c].l / n, sums[c].a / n, sums[c].b / n, sums[c].x / n, sums[c].y / n};
    }
  }

  // Connectivity enforcement: the largest component of each label keeps it, the
  // other components are merged into the adjacent label with the longest shared border.
  std::vector<int> key(static_cast<std::size_t>(w) * h, -1);
  std::vector<std::size_t> pos(static_cast<std::size_t>(w) * h, 0);
  for (std::size_t p = 0; p < region.size(); ++p) {
    key[region[p]] = label[p];
    pos[region[p]] = p;
  }
  auto comps = components(w, h, key);
  std::vector<std::size_t> largest(centers.size(), 0);
  std::vector<int> largest_comp(centers.size(), -1);
  for (std::size_t c = 0; c < comps.size(); ++c) {
    const int l = key[comps[c].front()];
    if (comps[c].size() > largest[l]) {
      largest[l] = comps[c].size();
      largest_comp[l] = static_cast<int>(c);
    }
  }
  std::vector<char> settled(key.size(), 0);
  std::vector<std::size_t> orphans;
  for (std::size_t c = 0; c < comps.size(); ++c) {
    if (largest_comp[key[comps[c].front()]] == static_cast<int>(c)) {
      for (auto p : comps[c]) settled[p] = 1;
    } else {
      orphans.push_back(c);
    }
  }
  bool progress = true;
  while (!orphans.empty() && progress) {
    progress = false;
    std::vector<std::size_t> pending;
    for (auto c : orphans) {
      std::map<int, int> border;
      for (auto p : comps[c]) {
        const int x = static_cast<int>(p % w), y = static_cast<int>(p / w);
        auto visit = [&](std::uint32_t q) {
          if (settled[q]) ++border[key[q]];
        };
        if (x > 0) visit(p - 1);
        if (x + 1 < w) visit(p + 1);
        if (y > 0) visit(p - w);
        if (y + 1 < h) visit(p + w);
      }
      if (border.empty()) {
        pending.push_back(c);
        continue;
      }
      int target = border.begin()->first, best = border.begin()->second;
      for (const auto& [l, n] : border)
        if (n > best) {
          best = n;
          target = l;
        }
      for (auto p : comps[c]) {
        key[p] = target;
        settled[p] = 1;
      }
      progress = true;
    }
    orphans = std::move(pending);
  }
  // Orphans left here belong to a disconnected input region; they keep their k-means label.

  std::map<int, std::vector<std::uint32_t>> grouped;
  for (auto p : region) grouped[key[p]].push_back(p);
  std::vector<std::vector<std::uint32_t>> out;
  for (auto& [l, pixels] : grouped) out.push_back(std::move(pixels));
  std::sort(out.begin(), out.end(),
            [](const auto& a, const auto& b) { return a.front() < b.front(); });
  return out;
}

Partition build_partition(const RgbImage& image, const SemanticMask& semantic,
                          const std::optional<GrayImage>& skin, int superpixel_target,
                          SensitivityPolicy policy) {
  const int w = image.width(), h = image.height();
  require_same_shape(w, h, semantic.labels.width(), semantic.labels.height(),
                     "build_partition: semantic mask");
  if (skin)
    require_same_shape(w, h, skin->width(), skin->height(), "build_partition: skin mask");
  if (superpixel_target < 0) throw std::invalid_argument("superpixel_target must be >= 0");

  const std::size_t total = static_cast<std::size_t>(w) * h;
  // Skin pixels get key 256 so they never join a semantic component.
  constexpr int kSkinKey = 256;
  std::vector<int> key(total);
  for (std::size_t i = 0; i < total; ++i)
    key[i] = (skin && (*skin)[i] != 0) ? kSkinKey : semantic.labels[i];

  std::vector<Region> regions;
  for (auto& comp : components(w, h, key)) {
    const int k = key[comp.front()];
    if (k == kSkinKey) {
      Region r;
      r.pixels = std::move(comp);
      r.semantic_class = semantic.labels[r.pixels.front()];
      r.class_name = kSkinClassName;
      r.sensitive = true;
      r.skin = true;
      regions.push_back(std::move(r));
      continue;
    }
    const std::string name = semantic.name_of(k);
    const bool sensitive =
        policy == SensitivityPolicy::colorization && colorization_sensitive(name);
    if (sensitive) {
      regions.push_back(Region{0, std::move(comp), k, name, true, false, 0.0});
      continue;
    }
    const int target = superpixel_target > 0 ? superpixel_target : default_superpixels(comp.size());
    for (auto& sub : oversegment(image, comp, target))
      regions.push_back(Region{0, std::move(sub), k, name, false, false, 0.0});
  }

  std::sort(regions.begin(), regions.end(),
            [](const Region& a, const Region& b) { return a.pixels.front() < b.pixels.front(); });
  Partition part;
  part.width = w;
  part.height = h;
  part.label_map = Raster<int>(w, h, -1);
  for (std::size_t i = 0; i < regions.size(); ++i) {
    regions[i].id = static_cast<int>(i);
    for (auto p : regions[i].pixels) part.label_map[p] = static_cast<int>(i);
  }
  part.regions = std::move(regions);
  if (part.non_sensitive_pixel_count() == 0) throw EmptyNonSensitive();
  return part;
}

Partition score_regions(const Partition& partition, const ScalarMap& attention) {
  const ScalarMap att = attention_at_resolution(attention, partition.width, partition.height);
  Partition out = partition;
  for (auto& r : out.regions) {
    double s = 0.0;
    for (auto p : r.pixels) s += att[p];
    r.attention_score = std::clamp(s / static_cast<double>(r.pixels.size()), 0.0, 1.0);
  }
  return out;
}

std::vector<int> select_regions(const Partition& partition, const ScalarMap& attention,
                                AttentionMode mode, double fraction) {
  if (!(fraction > 0.0 && fraction <= 1.0))
    throw std::invalid_argument("select_regions: fraction must be in (0, 1]");
  const Partition scored = score_regions(partition, attention);
  std::vector<const Region*> candidates;
  std::size_t total = 0;
  for (const auto& r : scored.regions) {
    if (r.sensitive) continue;
    candidates.push_back(&r);
    total += r.pixels.size();
  }
  if (candidates.empty()) throw EmptyNonSensitive();
  std::sort(candidates.begin(), candidates.end(), [mode](const Region* a, const Region* b) {
    if (a->attention_score != b->attention_score)
      return mode == AttentionMode::most_attended ? a->attention_score > b->attention_score
                                                  : a->attention_score < b->attention_score;
    if (a->pixels.size() != b->pixels.size()) return a->pixels.size() > b->pixels.size();
    return a->id < b->id;
  });
  const auto needed = static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(total) - 1e-9));
  std::vector<int> out;
  std::size_t covered = 0;
  for (const Region* r : candidates) {
    if (covered >= needed) break;
    out.push_back(r->id);
    covered += r->pixels.size();
  }
  return out;
}

GrayImage region_mask(const Partition& partition, const std::vector<int>& region_ids) {
  GrayImage mask(partition.width, partition.height, 0);
  for (int id : region_ids)
    for (auto p : partition.regions.at(static_cast<std::size_t>(id)).pixels) mask[p] = 1;
  return mask;
}

GrayImage non_sensitive_mask(const Partition& partition) {
  GrayImage mask(partition.width, partition.height, 0);
  for (const auto& r : partition.regions)
    if (!r.sensitive)
      for (auto p : r.pixels) mask[p] = 1;
  return mask;
}

}  // namespace advx
