#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "advx/image.hpp"

namespace advx {

using WordList = std::vector<std::string>;

/// The explanation model's final output: activity words, explanation words and
/// the model-native attention map.
struct OracleOutput {
  WordList activity;
  WordList explanation;
  ScalarMap attention;

  /// Throws std::invalid_argument if activity is empty or attention has negative weights.
  void validate() const;

  friend bool operator==(const OracleOutput&, const OracleOutput&) = default;
};

/// Attention map resized to (width, height) and renormalized to sum 1. An all-zero
/// map becomes uniform.
ScalarMap attention_at_resolution(const ScalarMap& attention, int width, int height);

enum class Scenario {
  /// Activity must change, explanation should stay similar.
  s1,
  /// Activity must stay, explanation should change.
  s2,
};

std::string_view to_string(Scenario s) noexcept;
/// Accepts "s1"/"S1"/"s2"/"S2".
Scenario parse_scenario(std::string_view text);

/// Lowercases, trims and collapses whitespace inside a token.
std::string normalize_token(std::string_view token);

/// Order-sensitive, case-insensitive comparison of normalized token lists.
bool equal_activity(const WordList& a1, const WordList& a2);

/// Default explanation-similarity threshold t.
inline constexpr double kDefaultThreshold = 0.85;

/// Activity constraint of the scenario (indicator in the attack objectives).
inline bool activity_predicate(Scenario s, bool activity_changed) noexcept {
  return s == Scenario::s1 ? activity_changed : !activity_changed;
}

/// Per-image success predicate: S1 needs a changed activity and q_text >= t,
/// S2 needs the same activity and q_text < t.
inline bool omega(Scenario s, bool activity_changed, double q_text, double t) noexcept {
  return s == Scenario::s1 ? (activity_changed && q_text >= t)
                           : (!activity_changed && q_text < t);
}

struct TraceEntry {
  std::uint64_t query_index = 0;
  double q_text = 0.0;
  double q_image = 0.0;
  bool feasible = false;
};

struct AttackOutcome {
  RgbImage adversarial_image;
  OracleOutput oracle_output;
  double q_text = 0.0;
  double q_image = 1.0;
  std::uint64_t queries_used = 0;
  bool activity_changed = false;
  bool success = false;
  /// False when no candidate satisfied the activity predicate; the clean image is returned.
  bool found_feasible = false;
  std::vector<TraceEntry> trace;
};

/// q_text reported when no feasible candidate exists: the value that can never
/// satisfy the scenario's success predicate (0 for S1, 1 for S2).
inline double unset_q_text(Scenario s) noexcept { return s == Scenario::s1 ? 0.0 : 1.0; }

}  // namespace advx
