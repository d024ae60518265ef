#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "advx/core.hpp"
#include "advx/filters.hpp"
#include "advx/oracle.hpp"
#include "advx/partition.hpp"
#include "advx/rng.hpp"

namespace advx {

/// Clean image and the oracle's answer for it (one query).
struct CleanReference {
  RgbImage image;
  OracleOutput output;
  Embedding explanation_embedding;
};

CleanReference query_clean(OracleSession& session, EmbeddingProvider& embedder, const RgbImage& image);

/// Oracle evaluation of one candidate image against the clean reference.
struct CandidateEval {
  OracleOutput output;
  std::uint64_t query_index = 0;
  bool activity_changed = false;
  bool feasible = false;
  double q_text = 0.0;
  double q_image = 0.0;
};

/// Queries the oracle for a candidate and scores it. SSIM is computed only when
/// `with_ssim` is set (q_image is 0 otherwise).
CandidateEval evaluate_candidate(OracleSession& session, EmbeddingProvider& embedder,
                                 const CleanReference& clean, const RgbImage& candidate,
                                 Scenario scenario, bool with_ssim = true);

/// The explanation term the scenario maximizes: q_text for S1, 1 - q_text for S2.
inline double text_term(Scenario s, double q_text) noexcept {
  return s == Scenario::s1 ? q_text : 1.0 - q_text;
}

// ---------------------------------------------------------------------------
// Random Lab colorization

struct ChannelRange {
  double lo = -128.0;
  double hi = 127.0;
};

struct ClassColorRange {
  ChannelRange a;
  ChannelRange b;
  bool alterable = true;
};

/// Per-class a/b offset intervals. Skin regions are always unalterable.
struct ColorRangePolicy {
  std::map<std::string, ClassColorRange> classes;
  ClassColorRange fallback;

  /// Sky/water toward blue, vegetation toward green, person unalterable, others unconstrained.
  static ColorRangePolicy defaults();
  /// Parses {"classes": {"sky": {"a": [lo, hi], "b": [lo, hi], "alterable": true}, ...}}.
  static ColorRangePolicy from_json(std::string_view text);
  std::string to_json() const;

  ClassColorRange for_region(const Region& region) const;
  void validate() const;
};

struct CfxConfig {
  int max_trials = 1000;
  Scenario scenario = Scenario::s1;
  double threshold = kDefaultThreshold;
  std::uint64_t seed = 0;
  /// Keep searching after the success predicate holds, returning the best of all trials.
  bool exhaustive = false;

  void validate() const;
};

/// Lab image with one uniform (da, db) per alterable region drawn from the policy
/// interval scaled by n / N; L is untouched, a and b are clamped to [-128, 127].
/// Regions are visited in id order; every alterable region consumes two draws.
LabImage perturb_lab(const LabImage& lab, const Partition& partition, const ColorRangePolicy& policy,
                     int trial, int max_trials, Rng& rng);

/// perturb_lab converted back to RGB. Pixels of unaltered regions are copied from
/// `original` so they are bit-identical.
RgbImage colorize_trial(const RgbImage& original, const LabImage& lab, const Partition& partition,
                        const ColorRangePolicy& policy, int trial, int max_trials, Rng& rng);

/// Iterative random colorization keeping the best feasible candidate.
AttackOutcome run_cfx(const CleanReference& clean, const Partition& partition,
                      const ColorRangePolicy& policy, const CfxConfig& config, OracleSession& session,
                      EmbeddingProvider& embedder);

// ---------------------------------------------------------------------------
// Filter-chain attack

enum class FilterScope {
  /// Whole alterable (non-sensitive) area.
  full,
  /// Attention-selected non-sensitive regions.
  localized,
};

enum class Objectives {
  /// Random search, first feasible candidate wins.
  none,
  text,
  image,
  both,
};

enum class SearchStrategy { evolutionary, random };

struct FilterAttackMode {
  FilterScope scope = FilterScope::full;
  Objectives objectives = Objectives::text;

  /// "fl-s", "lc-s", "fl-m", "lc-m", or <fl|lc>-<none|text|image|both>.
  static FilterAttackMode parse(std::string_view name);
  std::string name() const;
};

std::string_view to_string(Objectives o) noexcept;
Objectives parse_objectives(std::string_view name);

struct EvoConfig {
  int outer_population = 10;
  int outer_generations = 10;
  double mutation_probability = 0.5;
  int inner_lambda = 5;
  int inner_generations = 3;
  double learning_rate = 0.1;
  double step_decay = 0.75;
  int chain_length = 4;
  Scenario scenario = Scenario::s1;
  double threshold = kDefaultThreshold;
  std::uint64_t seed = 0;
  /// Share of non-sensitive pixels selected for localized modes.
  double region_fraction = 0.3;
  SearchStrategy search = SearchStrategy::evolutionary;
  /// Single-objective text mode stops at the first success unless set.
  bool exhaustive = false;
  double initial_alpha = 0.8;
  double initial_beta = 0.5;

  void validate() const;
  /// Candidate evaluations of a full evolutionary run (elites are not re-evaluated).
  std::uint64_t planned_evaluations() const;
};

/// Pixels the filters may touch for the given scope: every non-sensitive pixel (full) or
/// the attention-selected regions (localized; most attended for S1, least for S2).
GrayImage attack_mask(const Partition& partition, const OracleOutput& clean_output, FilterScope scope,
                      Scenario scenario, double fraction);

/// One evaluated filter chain.
struct FilterCandidate {
  FilterChain chain;
  CandidateEval eval;
  RgbImage image;
};

/// Knee of a candidate set under the scenario: among candidates on the first
/// front (objectives 1 - text term, 1 - q_image, constraint domination), the maximum
/// text_term * max(q_image, 0) among those meeting the success predicate, else among
/// the feasible ones. Returns nullopt if none is feasible.
std::optional<std::size_t> knee_point(const std::vector<FilterCandidate>& candidates, Scenario scenario,
                                      double threshold);

AttackOutcome run_filter_attack(const CleanReference& clean, const Partition& partition,
                                const EvoConfig& config, FilterAttackMode mode, OracleSession& session,
                                EmbeddingProvider& embedder);

}  // namespace advx
