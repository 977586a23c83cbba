#pragma once

// Genetic algorithm on giant-tour chromosomes with optimal split decoding,
// binary tournament selection, order crossover, and swap mutation.

#include <algorithm>
#include <cstdint>
#include <random>
#include <vector>

#include "core.hpp"
#include "cost.hpp"
#include "instance.hpp"
#include "solution.hpp"
#include "split.hpp"

namespace lrgen {

struct GaParams {
  int population = 100;
  double mutation_prob = 0.2;
  double crossover_prob = 0.6;
  int generations = 500;
  std::vector<double>* best_trace = nullptr;
};

// Nearest-neighbor giant tour; deterministic warm start shared with TS.
inline std::vector<int> nearest_neighbor_tour(const Instance& inst) {
  std::vector<int> tour;
  std::vector<bool> used(inst.n(), false);
  Position at = inst.depots.empty() ? Position{0.5, 0.5} : inst.depots[0].pos;
  for (int step = 0; step < inst.n(); ++step) {
    int best = -1;
    double best_d = 0.0;
    for (int e = 0; e < inst.n(); ++e) {
      if (used[e]) continue;
      const double d = distance(at, inst.customers[e].pos);
      if (best < 0 || d < best_d) {
        best = e;
        best_d = d;
      }
    }
    used[best] = true;
    tour.push_back(best + inst.m());
    at = inst.customers[best].pos;
  }
  return tour;
}

namespace detail {

inline std::vector<int> order_crossover(const std::vector<int>& p1,
                                        const std::vector<int>& p2,
                                        std::mt19937_64& rng) {
  const int n = static_cast<int>(p1.size());
  if (n < 2) return p1;
  std::uniform_int_distribution<int> pos(0, n - 1);
  int a = pos(rng), b = pos(rng);
  if (a > b) std::swap(a, b);
  std::vector<int> child(n, -1);
  std::vector<bool> taken(*std::max_element(p1.begin(), p1.end()) + 1, false);
  for (int i = a; i <= b; ++i) {
    child[i] = p1[i];
    taken[p1[i]] = true;
  }
  int w = (b + 1) % n;
  for (int i = 0; i < n; ++i) {
    const int gene = p2[(b + 1 + i) % n];
    if (taken[gene]) continue;
    child[w] = gene;
    w = (w + 1) % n;
  }
  return child;
}

}  // namespace detail

inline RoutePlan solve_ga(const Instance& inst, const CostCoefficients& co,
                          const GaParams& params, std::uint64_t seed) {
  auto rng = make_rng(seed);
  const int pop_size = std::max(params.population, 2);

  std::vector<std::vector<int>> pop(pop_size);
  std::vector<double> fit(pop_size);
  pop[0] = nearest_neighbor_tour(inst);
  for (int i = 1; i < pop_size; ++i) {
    pop[i] = pop[0];
    std::shuffle(pop[i].begin(), pop[i].end(), rng);
  }
  auto evaluate = [&](const std::vector<int>& tour) {
    return cost_sel(split_giant_tour(tour, inst, co), inst, co).total;
  };
  for (int i = 0; i < pop_size; ++i) fit[i] = evaluate(pop[i]);

  int best_idx = static_cast<int>(
      std::min_element(fit.begin(), fit.end()) - fit.begin());
  std::vector<int> best_tour = pop[best_idx];
  double best = fit[best_idx];

  std::uniform_real_distribution<double> coin(0.0, 1.0);
  std::uniform_int_distribution<int> pick(0, pop_size - 1);

  for (int gen = 0; gen < params.generations; ++gen) {
    std::vector<std::vector<int>> next;
    std::vector<double> next_fit;
    next.reserve(pop_size);
    // Elitism: carry the two best individuals.
    std::vector<int> idx(pop_size);
    for (int i = 0; i < pop_size; ++i) idx[i] = i;
    std::partial_sort(idx.begin(), idx.begin() + 2, idx.end(),
                      [&](int a, int b) { return fit[a] < fit[b]; });
    for (int i = 0; i < 2; ++i) {
      next.push_back(pop[idx[i]]);
      next_fit.push_back(fit[idx[i]]);
    }
    auto tournament = [&]() -> int {
      const int a = pick(rng), b = pick(rng);
      return fit[a] <= fit[b] ? a : b;
    };
    while (static_cast<int>(next.size()) < pop_size) {
      const int p1 = tournament();
      std::vector<int> child;
      if (coin(rng) < params.crossover_prob) {
        const int p2 = tournament();
        child = detail::order_crossover(pop[p1], pop[p2], rng);
      } else {
        child = pop[p1];
      }
      if (coin(rng) < params.mutation_prob && inst.n() >= 2) {
        std::uniform_int_distribution<int> gp(0, inst.n() - 1);
        std::swap(child[gp(rng)], child[gp(rng)]);
      }
      next_fit.push_back(evaluate(child));
      next.push_back(std::move(child));
    }
    pop = std::move(next);
    fit = std::move(next_fit);
    for (int i = 0; i < pop_size; ++i) {
      if (fit[i] < best) {
        best = fit[i];
        best_tour = pop[i];
      }
    }
    if (params.best_trace) params.best_trace->push_back(best);
  }
  return split_giant_tour(best_tour, inst, co);
}

}  // namespace lrgen
