#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "advx/attack.hpp"
#include "advx/corpus.hpp"
#include "advx/oracle.hpp"

namespace advx {

/// Per-image result row of a run.
struct ImageRecord {
  std::string image_id;
  bool success = false;
  bool activity_changed = false;
  bool found_feasible = false;
  double q_text = 0.0;
  double q_image = 1.0;
  double colorfulness_clean = 0.0;
  double colorfulness_adv = 0.0;
  std::uint64_t queries = 0;
  std::optional<double> quality_score;
  /// Non-empty when the image could not be attacked (e.g. nothing alterable).
  std::string error;

  friend bool operator==(const ImageRecord&, const ImageRecord&) = default;
};

/// Fraction of records satisfying the success predicate, recomputed from the stored
/// activity flag and q_text. Throws std::invalid_argument on an empty set.
double success_rate(const std::vector<ImageRecord>& records, Scenario scenario,
                    double threshold = kDefaultThreshold);

/// Everything needed to run (and replay) an attack over a corpus.
struct AttackPlan {
  /// cfx, fl-s, lc-s, fl-m, lc-m, or <fl|lc>-<none|text|image|both>.
  std::string attack = "cfx";
  Scenario scenario = Scenario::s1;
  double threshold = kDefaultThreshold;
  std::uint64_t seed = 0;
  /// Oracle queries per image including the clean query; 0 = unlimited.
  std::uint64_t query_budget = 0;
  /// Superpixels per non-sensitive component; 0 = automatic.
  int superpixels = 0;
  CfxConfig cfx;
  EvoConfig evo;
  ColorRangePolicy policy = ColorRangePolicy::defaults();

  bool is_cfx() const noexcept { return attack == "cfx"; }
  void validate() const;
  nlohmann::json to_json() const;
  static AttackPlan from_json(const nlohmann::json& j);
};

/// Per-image seed, independent of corpus order and worker count.
std::uint64_t image_seed(std::uint64_t run_seed, const std::string& image_id);

/// Optional image quality hook: a subprocess reading {"image_png_b64": ...} lines on
/// stdin and answering {"score": x} lines on stdout.
class ExternalScorer {
 public:
  explicit ExternalScorer(const std::string& command);
  ~ExternalScorer();
  ExternalScorer(const ExternalScorer&) = delete;
  ExternalScorer& operator=(const ExternalScorer&) = delete;

  /// Serialized across threads. Throws IoError if the scorer dies or answers garbage.
  double score(const RgbImage& image);

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

struct ImageResult {
  ImageRecord record;
  AttackOutcome outcome;
};

/// Runs the plan's attack on one item with a fresh query ledger.
ImageResult attack_item(const CorpusItem& item, const AttackPlan& plan, ExplanationOracle& oracle,
                        EmbeddingProvider& embedder);

struct RunManifest {
  std::string attack;
  Scenario scenario = Scenario::s1;
  nlohmann::json config;
  /// Sorted by image id.
  std::vector<ImageRecord> records;

  /// Stable serialization: no wall-clock data, records sorted.
  std::string to_json() const;
  static RunManifest from_json(std::string_view text);
};

struct RunOptions {
  int jobs = 1;
  /// When set, clean and adversarial PNGs plus per-image records are written here.
  std::optional<std::filesystem::path> output_dir;
  ExternalScorer* scorer = nullptr;
  /// Called once per finished image (from worker threads, serialized).
  std::function<void(const ImageResult&)> on_result;
};

/// Attacks every item on a worker pool. The oracle and embedder must be thread-safe
/// when jobs > 1 (the mock and HTTP clients are).
RunManifest run_corpus(const std::vector<CorpusItem>& items, const AttackPlan& plan,
                       ExplanationOracle& oracle, EmbeddingProvider& embedder, const RunOptions& options = {});

/// Re-runs a manifest's configuration on the same corpus.
RunManifest replay(const RunManifest& manifest, const std::vector<CorpusItem>& items,
                   ExplanationOracle& oracle, EmbeddingProvider& embedder, int jobs = 1);

inline constexpr int kHistogramBins = 32;

struct Distribution {
  std::size_t count = 0;
  double mean = 0.0;
  /// Population standard deviation.
  double stddev = 0.0;
  double lo = 0.0;
  double hi = 1.0;
  std::array<std::size_t, kHistogramBins> histogram{};
};

/// Histogram over [lo, hi]; values outside are clamped into the end bins.
Distribution describe(const std::vector<double>& values, double lo, double hi);

struct DistributionReport {
  Distribution ssim;
  Distribution colorfulness_clean;
  Distribution colorfulness_adv;
  Distribution q_text;

  nlohmann::json to_json() const;
  /// One row per (metric, bin).
  std::string to_csv() const;
};

/// SSIM on [-1, 1], q_text on [0, 1], both colorfulness series on a shared [0, max] range.
DistributionReport distribution_report(const std::vector<ImageRecord>& records);

struct AblationRow {
  std::string mode;
  double success_rate = 0.0;
  double mean_ssim = 0.0;
  std::size_t images = 0;
};

/// Every filter mode in `modes` (e.g. "fl-text", "lc-both") over the corpus, with the
/// rest of the configuration taken from `base`.
std::vector<AblationRow> ablation_matrix(const std::vector<CorpusItem>& items, const AttackPlan& base,
                                         const std::vector<std::string>& modes, ExplanationOracle& oracle,
                                         EmbeddingProvider& embedder, int jobs = 1,
                                         const std::function<void(const ImageResult&)>& on_result = {});

nlohmann::json ablation_to_json(const std::vector<AblationRow>& rows);
std::string ablation_to_csv(const std::vector<AblationRow>& rows);

/// Mean SSIM over records that produced an adversarial image (activity predicate met);
/// NaN if there are none.
double mean_q_image(const std::vector<ImageRecord>& records);

}  // namespace advx
