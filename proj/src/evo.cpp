#include "advx/evo.hpp"

#include <cmath>
#include <limits>
#include <numeric>

namespace advx {

bool dominates(const ObjectiveVector& a, const ObjectiveVector& b) {
  if (a.feasible != b.feasible) return a.feasible;
  if (a.values.size() != b.values.size())
    throw std::invalid_argument("dominates: objective vectors differ in length");
  bool strictly = false;
  for (std::size_t i = 0; i < a.values.size(); ++i) {
    if (a.values[i] > b.values[i]) return false;
    if (a.values[i] < b.values[i]) strictly = true;
  }
  return strictly;
}

std::vector<std::vector<std::size_t>> nondominated_sort(std::span<const ObjectiveVector> pop) {
  const std::size_t n = pop.size();
  std::vector<std::vector<std::size_t>> fronts;
  if (n == 0) return fronts;
  std::vector<std::vector<std::size_t>> dominated(n);
  std::vector<std::size_t> counter(n, 0);
  std::vector<std::size_t> current;
  for (std::size_t p = 0; p < n; ++p) {
    for (std::size_t q = 0; q < n; ++q) {
      if (p == q) continue;
      if (dominates(pop[p], pop[q]))
        dominated[p].push_back(q);
      else if (dominates(pop[q], pop[p]))
        ++counter[p];
    }
    if (counter[p] == 0) current.push_back(p);
  }
  while (!current.empty()) {
    std::vector<std::size_t> next;
    for (auto p : current)
      for (auto q : dominated[p])
        if (--counter[q] == 0) next.push_back(q);
    std::sort(next.begin(), next.end());
    fronts.push_back(std::move(current));
    current = std::move(next);
  }
  return fronts;
}

std::vector<double> crowding_distance(std::span<const ObjectiveVector> front) {
  const std::size_t n = front.size();
  constexpr double inf = std::numeric_limits<double>::infinity();
  if (n <= 2) return std::vector<double>(n, inf);
  std::vector<double> dist(n, 0.0);
  const std::size_t m = front.front().values.size();
  std::vector<std::size_t> order(n);
  for (std::size_t k = 0; k < m; ++k) {
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return front[a].values[k] < front[b].values[k];
    });
    const double lo = front[order.front()].values[k];
    const double hi = front[order.back()].values[k];
    dist[order.front()] = inf;
    dist[order.back()] = inf;
    if (hi == lo) continue;
    for (std::size_t i = 1; i + 1 < n; ++i)
      dist[order[i]] += (front[order[i + 1]].values[k] - front[order[i - 1]].values[k]) / (hi - lo);
  }
  return dist;
}

std::vector<RankedIndividual> rank_population(std::span<const ObjectiveVector> population) {
  std::vector<RankedIndividual> ranked(population.size());
  const auto fronts = nondominated_sort(population);
  for (std::size_t r = 0; r < fronts.size(); ++r) {
    std::vector<ObjectiveVector> members;
    members.reserve(fronts[r].size());
    for (auto i : fronts[r]) members.push_back(population[i]);
    const auto cd = crowding_distance(members);
    for (std::size_t j = 0; j < fronts[r].size(); ++j) ranked[fronts[r][j]] = {r, cd[j]};
  }
  return ranked;
}

std::vector<std::size_t> nsga2_survivors(std::span<const ObjectiveVector> population, std::size_t n) {
  const auto ranked = rank_population(population);
  std::vector<std::size_t> order(population.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (ranked[a].rank != ranked[b].rank) return ranked[a].rank < ranked[b].rank;
    return ranked[a].crowding > ranked[b].crowding;
  });
  order.resize(std::min(n, order.size()));
  return order;
}

std::size_t crowded_tournament(std::span<const RankedIndividual> ranked, Rng& rng) {
  const std::size_t a = rng.below(ranked.size()), b = rng.below(ranked.size());
  if (ranked[a].rank != ranked[b].rank) return ranked[a].rank < ranked[b].rank ? a : b;
  if (ranked[a].crowding != ranked[b].crowding) return ranked[a].crowding > ranked[b].crowding ? a : b;
  return std::min(a, b);
}

}  // namespace advx
