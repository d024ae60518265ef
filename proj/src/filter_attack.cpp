#include <algorithm>
#include <cmath>

#include "advx/attack.hpp"
#include "advx/evo.hpp"
#include "advx/metrics.hpp"

namespace advx {

FilterAttackMode FilterAttackMode::parse(std::string_view name) {
  const auto dash = name.find('-');
  const std::string_view scope = name.substr(0, dash);
  const std::string_view rest = dash == std::string_view::npos ? "" : name.substr(dash + 1);
  FilterAttackMode mode;
  if (scope == "fl")
    mode.scope = FilterScope::full;
  else if (scope == "lc")
    mode.scope = FilterScope::localized;
  else
    throw std::invalid_argument("unknown filter attack mode: " + std::string(name));
  if (rest == "s")
    mode.objectives = Objectives::text;
  else if (rest == "m")
    mode.objectives = Objectives::both;
  else
    try {
      mode.objectives = parse_objectives(rest);
    } catch (const std::invalid_argument&) {
      throw std::invalid_argument("unknown filter attack mode: " + std::string(name));
    }
  return mode;
}

std::string FilterAttackMode::name() const {
  const std::string scope_name = scope == FilterScope::full ? "fl" : "lc";
  switch (objectives) {
    case Objectives::text: return scope_name + "-s";
    case Objectives::both: return scope_name + "-m";
    default: return scope_name + "-" + std::string(to_string(objectives));
  }
}

std::string_view to_string(Objectives o) noexcept {
  switch (o) {
    case Objectives::none: return "none";
    case Objectives::text: return "text";
    case Objectives::image: return "image";
    case Objectives::both: return "both";
  }
  return "unknown";
}

Objectives parse_objectives(std::string_view name) {
  for (Objectives o : {Objectives::none, Objectives::text, Objectives::image, Objectives::both})
    if (to_string(o) == name) return o;
  throw std::invalid_argument("unknown objective set: " + std::string(name));
}

void EvoConfig::validate() const {
  if (outer_population < 1 || outer_generations < 1 || inner_lambda < 1 || inner_generations < 1 ||
      chain_length < 1)
    throw std::invalid_argument("evo config: counts must be >= 1");
  auto unit = [](double v) { return v >= 0.0 && v <= 1.0; };
  if (!unit(mutation_probability) || !unit(step_decay) || !unit(threshold) || !unit(initial_alpha) ||
      !unit(initial_beta))
    throw std::invalid_argument("evo config: probabilities and rates must be in [0, 1]");
  if (!(region_fraction > 0.0 && region_fraction <= 1.0))
    throw std::invalid_argument("evo config: region fraction must be in (0, 1]");
  if (!(learning_rate >= 0.0)) throw std::invalid_argument("evo config: learning rate must be >= 0");
}

std::uint64_t EvoConfig::planned_evaluations() const {
  const std::uint64_t per_individual = static_cast<std::uint64_t>(inner_lambda) * inner_generations;
  const std::uint64_t n = static_cast<std::uint64_t>(outer_population);
  // Generation 0 evaluates everyone; later GA generations re-use the elite.
  return per_individual * (n + (outer_generations - 1) * std::max<std::uint64_t>(n - 1, 1));
}

GrayImage attack_mask(const Partition& partition, const OracleOutput& clean_output, FilterScope scope,
                      Scenario scenario, double fraction) {
  if (scope == FilterScope::full) {
    GrayImage mask = non_sensitive_mask(partition);
    if (std::none_of(mask.pixels().begin(), mask.pixels().end(), [](auto v) { return v != 0; }))
      throw EmptyNonSensitive();
    return mask;
  }
  const AttentionMode mode =
      scenario == Scenario::s1 ? AttentionMode::most_attended : AttentionMode::least_attended;
  return region_mask(partition, select_regions(partition, clean_output.attention, mode, fraction));
}

namespace {

ObjectiveVector objectives_of(const CandidateEval& e, Scenario s) {
  return {{1.0 - text_term(s, e.q_text), 1.0 - e.q_image}, e.feasible};
}

double knee_product(const CandidateEval& e, Scenario s) {
  return text_term(s, e.q_text) * std::max(e.q_image, 0.0);
}

}  // namespace

std::optional<std::size_t> knee_point(const std::vector<FilterCandidate>& candidates, Scenario scenario,
                                      double threshold) {
  std::vector<ObjectiveVector> objs;
  objs.reserve(candidates.size());
  for (const auto& c : candidates) objs.push_back(objectives_of(c.eval, scenario));
  const auto fronts = nondominated_sort(objs);
  if (fronts.empty()) return std::nullopt;
  std::optional<std::size_t> best_omega, best_feasible;
  for (auto i : fronts.front()) {
    const CandidateEval& e = candidates[i].eval;
    if (!e.feasible) continue;
    const double prod = knee_product(e, scenario);
    if (!best_feasible || prod > knee_product(candidates[*best_feasible].eval, scenario)) best_feasible = i;
    if (omega(scenario, e.activity_changed, e.q_text, threshold) &&
        (!best_omega || prod > knee_product(candidates[*best_omega].eval, scenario)))
      best_omega = i;
  }
  return best_omega ? best_omega : best_feasible;
}

namespace {

using Genome = std::vector<FilterId>;

/// Thrown inside the search once the single-objective text search has succeeded.
struct SearchDone {};

class FilterSearch {
 public:
  FilterSearch(const CleanReference& clean, const GrayImage& mask, const EvoConfig& cfg, Objectives obj,
               OracleSession& session, EmbeddingProvider& embedder)
      : clean_(clean), mask_(mask), cfg_(cfg), obj_(obj), session_(session), embedder_(embedder) {}

  std::vector<FilterCandidate>& archive() { return archive_; }

  /// Lexicographic single-objective score: feasibility first, then the objective.
  double score(const CandidateEval& e) const {
    double value = 0.0;
    if (obj_ == Objectives::text) value = text_term(cfg_.scenario, e.q_text);
    if (obj_ == Objectives::image) value = e.q_image;
    return (e.feasible ? 10.0 : 0.0) + value;
  }

  bool better(const CandidateEval& a, const CandidateEval& b) const {
    if (obj_ != Objectives::both) return score(a) > score(b);
    const ObjectiveVector oa = objectives_of(a, cfg_.scenario), ob = objectives_of(b, cfg_.scenario);
    if (dominates(oa, ob)) return true;
    if (dominates(ob, oa)) return false;
    return knee_product(a, cfg_.scenario) > knee_product(b, cfg_.scenario);
  }

  const FilterCandidate& evaluate(FilterChain chain) {
    RgbImage image = apply_chain(clean_.image, mask_, chain);
    CandidateEval e = evaluate_candidate(session_, embedder_, clean_, image, cfg_.scenario);
    archive_.push_back({std::move(chain), std::move(e), std::move(image)});
    const CandidateEval& last = archive_.back().eval;
    if (obj_ == Objectives::none && last.feasible) throw SearchDone{};
    if (obj_ == Objectives::text && !cfg_.exhaustive &&
        omega(cfg_.scenario, last.activity_changed, last.q_text, cfg_.threshold))
      throw SearchDone{};
    return archive_.back();
  }

  FilterChain make_chain(const Genome& ids, std::span<const double> params) const {
    FilterChain chain(ids.size());
    for (std::size_t i = 0; i < ids.size(); ++i) chain[i] = {ids[i], params[2 * i], params[2 * i + 1]};
    return chain;
  }

  struct Individual {
    Genome ids;
    CandidateEval eval;
  };

  /// Inner (1, lambda) ES over the (alpha, beta) pairs of a fixed filter sequence.
  Individual inner_es(const Genome& ids, std::uint64_t generation, std::uint64_t index) {
    Rng rng(derive_seed({cfg_.seed, generation, index}));
    std::vector<double> parent;
    for (std::size_t i = 0; i < ids.size(); ++i) {
      parent.push_back(cfg_.initial_alpha);
      parent.push_back(cfg_.initial_beta);
    }
    std::optional<CandidateEval> best;
    for (int g = 0; g < cfg_.inner_generations; ++g) {
      const double step = es_step_size(cfg_.learning_rate, cfg_.step_decay, g);
      auto child = es_step(
          parent, cfg_.inner_lambda, step, rng,
          [&](const std::vector<double>& params, int) { return evaluate(make_chain(ids, params)).eval; },
          [&](const CandidateEval& a, const CandidateEval& b) { return better(a, b); });
      parent = child.params;
      if (!best || better(child.eval, *best)) best = std::move(child.eval);
    }
    return {ids, std::move(*best)};
  }

  Genome random_genome(Rng& rng) const {
    Genome g(static_cast<std::size_t>(cfg_.chain_length));
    for (auto& id : g) id = kAllFilters[rng.below(kFilterCount)];
    return g;
  }

  GaOperators<Genome> operators() const {
    GaOperators<Genome> ops;
    ops.crossover = [](const Genome& a, const Genome& b, Rng& rng) {
      if (a.size() < 2) return std::make_pair(a, b);
      const std::size_t cut = 1 + rng.below(a.size() - 1);
      Genome c1(a.begin(), a.begin() + cut), c2(b.begin(), b.begin() + cut);
      c1.insert(c1.end(), b.begin() + cut, b.end());
      c2.insert(c2.end(), a.begin() + cut, a.end());
      return std::make_pair(std::move(c1), std::move(c2));
    };
    const double rho = cfg_.mutation_probability;
    ops.mutate = [rho](Genome& g, Rng& rng) {
      for (auto& id : g)
        if (rng.bernoulli(rho)) id = kAllFilters[rng.below(kFilterCount)];
    };
    return ops;
  }

  void run_ga() {
    Rng rng(derive_seed({cfg_.seed, 0x6761ULL}));
    const auto ops = operators();
    std::vector<Individual> pop;
    for (int i = 0; i < cfg_.outer_population; ++i)
      pop.push_back(inner_es(random_genome(rng), 0, static_cast<std::uint64_t>(i)));
    for (int gen = 1; gen < cfg_.outer_generations; ++gen) {
      std::vector<double> fitness;
      for (const auto& ind : pop) fitness.push_back(score(ind.eval));
      const std::size_t elite = argmax(fitness);
      std::vector<Individual> next;
      if (pop.size() == 1) {
        Genome child = pop.front().ids;
        ops.mutate(child, rng);
        Individual cand = inner_es(child, static_cast<std::uint64_t>(gen), 1);
        next.push_back(better(cand.eval, pop.front().eval) ? std::move(cand) : pop.front());
      } else {
        std::vector<Genome> ids;
        for (const auto& ind : pop) ids.push_back(ind.ids);
        const auto genomes = ga_step(ids, fitness, ops, rng);
        next.push_back(pop[elite]);
        for (std::size_t i = 1; i < genomes.size(); ++i)
          next.push_back(inner_es(genomes[i], static_cast<std::uint64_t>(gen), i));
      }
      pop = std::move(next);
    }
  }

  void run_nsga2() {
    Rng rng(derive_seed({cfg_.seed, 0x6e73ULL}));
    const auto ops = operators();
    const auto n = static_cast<std::size_t>(cfg_.outer_population);
    std::vector<Individual> pop;
    for (std::size_t i = 0; i < n; ++i) pop.push_back(inner_es(random_genome(rng), 0, i));
    for (int gen = 1; gen < cfg_.outer_generations; ++gen) {
      std::vector<ObjectiveVector> objs;
      for (const auto& ind : pop) objs.push_back(objectives_of(ind.eval, cfg_.scenario));
      const auto ranked = rank_population(objs);
      std::vector<Individual> merged = pop;
      std::size_t index = 0;
      while (merged.size() < 2 * n) {
        const Genome& p1 = pop[crowded_tournament(ranked, rng)].ids;
        const Genome& p2 = pop[crowded_tournament(ranked, rng)].ids;
        auto [c1, c2] = ops.crossover(p1, p2, rng);
        ops.mutate(c1, rng);
        ops.mutate(c2, rng);
        merged.push_back(inner_es(c1, static_cast<std::uint64_t>(gen), index++));
        if (merged.size() < 2 * n) merged.push_back(inner_es(c2, static_cast<std::uint64_t>(gen), index++));
      }
      objs.clear();
      for (const auto& ind : merged) objs.push_back(objectives_of(ind.eval, cfg_.scenario));
      std::vector<Individual> next;
      for (auto i : nsga2_survivors(objs, n)) next.push_back(merged[i]);
      pop = std::move(next);
    }
  }

  void run_random(std::uint64_t trials) {
    for (std::uint64_t n = 1; n <= trials; ++n) {
      Rng rng(derive_seed({cfg_.seed, 0x726eULL, n}));
      FilterChain chain(static_cast<std::size_t>(cfg_.chain_length));
      for (auto& spec : chain) {
        spec.id = kAllFilters[rng.below(kFilterCount)];
        spec.alpha = rng.uniform();
        spec.beta = rng.uniform();
      }
      evaluate(std::move(chain));
    }
  }

  /// Index of the candidate to return, or nullopt if nothing feasible was found.
  std::optional<std::size_t> pick() const {
    if (obj_ == Objectives::both) return knee_point(archive_, cfg_.scenario, cfg_.threshold);
    std::optional<std::size_t> best;
    for (std::size_t i = 0; i < archive_.size(); ++i) {
      if (!archive_[i].eval.feasible) continue;
      if (obj_ == Objectives::none) return i;
      if (!best || score(archive_[i].eval) > score(archive_[*best].eval)) best = i;
    }
    return best;
  }

 private:
  const CleanReference& clean_;
  const GrayImage& mask_;
  const EvoConfig& cfg_;
  Objectives obj_;
  OracleSession& session_;
  EmbeddingProvider& embedder_;
  std::vector<FilterCandidate> archive_;
};

}  // namespace

AttackOutcome run_filter_attack(const CleanReference& clean, const Partition& partition,
                                const EvoConfig& config, FilterAttackMode mode, OracleSession& session,
                                EmbeddingProvider& embedder) {
  config.validate();
  const GrayImage mask =
      attack_mask(partition, clean.output, mode.scope, config.scenario, config.region_fraction);

  FilterSearch search(clean, mask, config, mode.objectives, session, embedder);
  try {
    if (mode.objectives == Objectives::none || config.search == SearchStrategy::random)
      search.run_random(config.planned_evaluations());
    else if (mode.objectives == Objectives::both)
      search.run_nsga2();
    else
      search.run_ga();
  } catch (const SearchDone&) {
  } catch (const OracleError& e) {
    if (e.kind() != OracleError::Kind::budget_exhausted) throw;
  }

  AttackOutcome out;
  out.adversarial_image = clean.image;
  out.oracle_output = clean.output;
  out.q_text = unset_q_text(config.scenario);
  out.q_image = 1.0;
  auto& archive = search.archive();
  for (const auto& c : archive)
    out.trace.push_back({c.eval.query_index, c.eval.q_text, c.eval.q_image, c.eval.feasible});
  if (auto best = search.pick()) {
    FilterCandidate& c = archive[*best];
    out.found_feasible = true;
    out.adversarial_image = std::move(c.image);
    out.oracle_output = std::move(c.eval.output);
    out.q_text = c.eval.q_text;
    out.q_image = c.eval.q_image;
    out.activity_changed = c.eval.activity_changed;
  }
  out.queries_used = session.ledger().issued();
  out.success =
      out.found_feasible && omega(config.scenario, out.activity_changed, out.q_text, config.threshold);
  return out;
}

}  // namespace advx
