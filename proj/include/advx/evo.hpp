#pragma once

// Optimization kernels: constraint-dominated non-dominated sorting, crowding
// distance, a generational GA step and a (1, lambda) ES step. Minimization
// convention throughout the NSGA-II parts; GA and ES take "higher is better"
// fitness or an explicit comparator.

#include <algorithm>
#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include "advx/rng.hpp"

namespace advx {

struct ObjectiveVector {
  std::vector<double> values;
  bool feasible = true;
};

/// Constraint domination: feasible beats infeasible; otherwise Pareto (<= everywhere,
/// < somewhere).
bool dominates(const ObjectiveVector& a, const ObjectiveVector& b);

/// Fronts of indices ordered by rank. Empty input gives no fronts.
std::vector<std::vector<std::size_t>> nondominated_sort(std::span<const ObjectiveVector> population);

/// Crowding distance of each front member (same order as the input). Boundary
/// members get +inf; objectives with zero spread contribute nothing.
std::vector<double> crowding_distance(std::span<const ObjectiveVector> front);

struct RankedIndividual {
  std::size_t rank = 0;
  double crowding = 0.0;
};

/// Rank and crowding for every member of the population.
std::vector<RankedIndividual> rank_population(std::span<const ObjectiveVector> population);

/// Indices of the n survivors by (rank ascending, crowding descending, index ascending).
std::vector<std::size_t> nsga2_survivors(std::span<const ObjectiveVector> population, std::size_t n);

/// Binary crowded tournament; returns the index of the winner.
std::size_t crowded_tournament(std::span<const RankedIndividual> ranked, Rng& rng);

template <typename Genome>
struct GaOperators {
  /// One-point (or any) crossover producing two children.
  std::function<std::pair<Genome, Genome>(const Genome&, const Genome&, Rng&)> crossover;
  std::function<void(Genome&, Rng&)> mutate;
};

/// Index of the fittest individual (first on ties).
inline std::size_t argmax(std::span<const double> fitness) {
  return static_cast<std::size_t>(std::max_element(fitness.begin(), fitness.end()) - fitness.begin());
}

/// One generation: the best individual survives at index 0 unchanged, the rest are
/// offspring of size-2 tournaments, crossover and mutation. Size is preserved.
template <typename Genome>
std::vector<Genome> ga_step(const std::vector<Genome>& population, std::span<const double> fitness,
                            const GaOperators<Genome>& ops, Rng& rng) {
  const std::size_t n = population.size();
  if (n < 2) throw std::invalid_argument("ga_step: population size must be >= 2");
  if (fitness.size() != n) throw std::invalid_argument("ga_step: fitness size mismatch");
  auto tournament = [&]() -> const Genome& {
    const std::size_t a = rng.below(n), b = rng.below(n);
    return fitness[b] > fitness[a] ? population[b] : population[a];
  };
  std::vector<Genome> next;
  next.reserve(n);
  next.push_back(population[argmax(fitness)]);
  while (next.size() < n) {
    const Genome& p1 = tournament();
    const Genome& p2 = tournament();
    auto [c1, c2] = ops.crossover(p1, p2, rng);
    ops.mutate(c1, rng);
    next.push_back(std::move(c1));
    if (next.size() < n) {
      ops.mutate(c2, rng);
      next.push_back(std::move(c2));
    }
  }
  return next;
}

/// Gaussian perturbation of every coordinate by step * N(0, 1), clipped to [lo, hi].
inline std::vector<double> perturb(std::span<const double> parent, double step, Rng& rng,
                                   double lo = 0.0, double hi = 1.0) {
  std::vector<double> child(parent.begin(), parent.end());
  if (step == 0.0) return child;
  for (double& v : child) v = std::clamp(v + step * rng.normal(), lo, hi);
  return child;
}

template <typename Eval>
struct EsChild {
  std::vector<double> params;
  Eval eval;
};

/// (1, lambda) step: lambda children of the parent, evaluated in order; returns the
/// best child under `better` (first on ties). `evaluate(params, child_index)` may throw
/// to abort the step.
template <typename Evaluate, typename Better>
auto es_step(std::span<const double> parent, int lambda, double step, Rng& rng, Evaluate&& evaluate,
             Better&& better) {
  using Eval = decltype(evaluate(std::vector<double>{}, 0));
  if (lambda < 1) throw std::invalid_argument("es_step: lambda must be >= 1");
  std::optional<EsChild<Eval>> best;
  for (int i = 0; i < lambda; ++i) {
    std::vector<double> child = perturb(parent, step, rng);
    Eval e = evaluate(child, i);
    if (!best || better(e, best->eval)) best = EsChild<Eval>{std::move(child), std::move(e)};
  }
  return std::move(*best);
}

/// Step size at inner generation g: lr * decay^g.
inline double es_step_size(double learning_rate, double decay, int generation) {
  double s = learning_rate;
  for (int g = 0; g < generation; ++g) s *= decay;
  return s;
}

}  // namespace advx
