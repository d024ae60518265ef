#include <algorithm>
#include <json.hpp>

#include "advx/attack.hpp"
#include "advx/metrics.hpp"

namespace advx {

using json = nlohmann::json;

ColorRangePolicy ColorRangePolicy::defaults() {
  ColorRangePolicy p;
  const ChannelRange full{-128.0, 127.0};
  p.classes["person"] = {full, full, false};
  p.classes["sky"] = {full, {-128.0, 0.0}, true};
  p.classes["water"] = {full, {-128.0, 0.0}, true};
  p.classes["vegetation"] = {{-128.0, 0.0}, full, true};
  p.fallback = {full, full, true};
  return p;
}

void ColorRangePolicy::validate() const {
  auto check = [](const std::string& name, const ClassColorRange& c) {
    for (const ChannelRange* r : {&c.a, &c.b})
      if (r->lo < -128.0 || r->hi > 127.0 || r->lo > r->hi)
        throw std::invalid_argument("color policy: bad interval for class " + name);
  };
  for (const auto& [name, c] : classes) check(name, c);
  check("<fallback>", fallback);
}

ColorRangePolicy ColorRangePolicy::from_json(std::string_view text) {
  ColorRangePolicy p = defaults();
  try {
    const json j = json::parse(text);
    for (const auto& [name, v] : j.at("classes").items()) {
      ClassColorRange c = p.fallback;
      if (v.contains("a")) c.a = {v["a"].at(0).get<double>(), v["a"].at(1).get<double>()};
      if (v.contains("b")) c.b = {v["b"].at(0).get<double>(), v["b"].at(1).get<double>()};
      if (v.contains("alterable")) c.alterable = v["alterable"].get<bool>();
      if (name == "*" || name == "default")
        p.fallback = c;
      else
        p.classes[name] = c;
    }
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("color policy: ") + e.what());
  }
  p.validate();
  return p;
}

std::string ColorRangePolicy::to_json() const {
  json classes_json = json::object();
  auto entry = [](const ClassColorRange& c) {
    return json{{"a", {c.a.lo, c.a.hi}}, {"b", {c.b.lo, c.b.hi}}, {"alterable", c.alterable}};
  };
  for (const auto& [name, c] : classes) classes_json[name] = entry(c);
  classes_json["default"] = entry(fallback);
  return json{{"classes", classes_json}}.dump();
}

ClassColorRange ColorRangePolicy::for_region(const Region& region) const {
  if (region.skin) return {{0, 0}, {0, 0}, false};
  auto it = classes.find(region.class_name);
  return it == classes.end() ? fallback : it->second;
}

void CfxConfig::validate() const {
  if (max_trials < 1) throw std::invalid_argument("cfx: max_trials must be >= 1");
  if (!(threshold >= 0.0 && threshold <= 1.0)) throw std::invalid_argument("cfx: threshold must be in [0, 1]");
}

LabImage perturb_lab(const LabImage& lab, const Partition& partition, const ColorRangePolicy& policy,
                     int trial, int max_trials, Rng& rng) {
  if (trial < 1 || trial > max_trials)
    throw std::invalid_argument("colorize: trial index must be in [1, max_trials]");
  require_same_shape(lab.width(), lab.height(), partition.width, partition.height, "colorize");
  const double scale = static_cast<double>(trial) / max_trials;
  LabImage out = lab;
  for (const Region& region : partition.regions) {
    const ClassColorRange range = policy.for_region(region);
    if (!range.alterable) continue;
    const double da = scale * rng.uniform(range.a.lo, range.a.hi);
    const double db = scale * rng.uniform(range.b.lo, range.b.hi);
    for (auto p : region.pixels) {
      out[p].a = std::clamp(out[p].a + da, -128.0, 127.0);
      out[p].b = std::clamp(out[p].b + db, -128.0, 127.0);
    }
  }
  return out;
}

RgbImage colorize_trial(const RgbImage& original, const LabImage& lab, const Partition& partition,
                        const ColorRangePolicy& policy, int trial, int max_trials, Rng& rng) {
  const LabImage shifted = perturb_lab(lab, partition, policy, trial, max_trials, rng);
  RgbImage out = original;
  for (const Region& region : partition.regions) {
    if (!policy.for_region(region).alterable) continue;
    for (auto p : region.pixels) out[p] = lab_to_rgb(shifted[p]);
  }
  return out;
}

namespace {

bool improves(Scenario s, double candidate_q, double best_q) {
  return s == Scenario::s1 ? candidate_q > best_q : candidate_q < best_q;
}

}  // namespace

AttackOutcome run_cfx(const CleanReference& clean, const Partition& partition,
                      const ColorRangePolicy& policy, const CfxConfig& config, OracleSession& session,
                      EmbeddingProvider& embedder) {
  config.validate();
  policy.validate();
  const LabImage lab = to_lab(clean.image);

  AttackOutcome out;
  out.adversarial_image = clean.image;
  out.oracle_output = clean.output;
  out.q_text = unset_q_text(config.scenario);
  out.q_image = 1.0;

  const bool any_alterable = std::any_of(partition.regions.begin(), partition.regions.end(),
                                         [&](const Region& r) { return policy.for_region(r).alterable; });
  if (any_alterable) {
    try {
      for (int n = 1; n <= config.max_trials; ++n) {
        Rng rng(derive_seed({config.seed, static_cast<std::uint64_t>(n)}));
        RgbImage candidate = colorize_trial(clean.image, lab, partition, policy, n, config.max_trials, rng);
        CandidateEval e = evaluate_candidate(session, embedder, clean, candidate, config.scenario);
        out.trace.push_back({e.query_index, e.q_text, e.q_image, e.feasible});
        if (!e.feasible) continue;
        if (!out.found_feasible || improves(config.scenario, e.q_text, out.q_text)) {
          out.found_feasible = true;
          out.adversarial_image = std::move(candidate);
          out.oracle_output = std::move(e.output);
          out.q_text = e.q_text;
          out.q_image = e.q_image;
          out.activity_changed = e.activity_changed;
        }
        if (!config.exhaustive &&
            omega(config.scenario, out.activity_changed, out.q_text, config.threshold))
          break;
      }
    } catch (const OracleError& e) {
      if (e.kind() != OracleError::Kind::budget_exhausted) throw;
    }
  }
  out.queries_used = session.ledger().issued();
  out.success = out.found_feasible && omega(config.scenario, out.activity_changed, out.q_text, config.threshold);
  return out;
}

}  // namespace advx
