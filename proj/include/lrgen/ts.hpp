#pragma once

// Tabu search on giant tours: single-node relocation, two-node exchange,
// four-node segment reversal; fixed tenure with aspiration on a new global
// best. Large neighborhoods are sampled to a per-iteration cap.

#include <algorithm>
#include <cstdint>
#include <map>
#include <random>
#include <tuple>
#include <vector>

#include "core.hpp"
#include "cost.hpp"
#include "ga.hpp"
#include "instance.hpp"
#include "solution.hpp"
#include "split.hpp"

namespace lrgen {

struct TsParams {
  int tenure = 30;
  int iterations = 5000;
  int neighborhood_cap = 400;  // evaluated moves per iteration
  std::vector<double>* best_trace = nullptr;
};

namespace detail {

struct TsMove {
  int type = 0;  // 0 relocate, 1 swap, 2 reverse-4
  int i = 0, j = 0;
};

inline void apply_move(std::vector<int>& tour, const TsMove& mv) {
  if (mv.type == 0) {
    const int gene = tour[mv.i];
    tour.erase(tour.begin() + mv.i);
    tour.insert(tour.begin() + mv.j, gene);
  } else if (mv.type == 1) {
    std::swap(tour[mv.i], tour[mv.j]);
  } else {
    std::reverse(tour.begin() + mv.i, tour.begin() + mv.i + 4);
  }
}

// Tabu attribute: move type plus the customer ids at the move's anchor
// positions, order-normalized.
inline std::tuple<int, int, int> move_key(const std::vector<int>& tour,
                                          const TsMove& mv) {
  int a, b;
  if (mv.type == 0) {
    a = tour[mv.i];
    b = -1;
  } else if (mv.type == 1) {
    a = tour[mv.i];
    b = tour[mv.j];
  } else {
    a = tour[mv.i];
    b = tour[mv.i + 3];
  }
  if (b >= 0 && a > b) std::swap(a, b);
  return {mv.type, a, b};
}

}  // namespace detail

inline RoutePlan solve_ts(const Instance& inst, const CostCoefficients& co,
                          const TsParams& params, std::uint64_t seed) {
  auto rng = make_rng(seed);
  const int n = inst.n();
  std::vector<int> tour = nearest_neighbor_tour(inst);
  auto evaluate = [&](const std::vector<int>& t) {
    return cost_sel(split_giant_tour(t, inst, co), inst, co).total;
  };
  double current = evaluate(tour);
  std::vector<int> best_tour = tour;
  double best = current;

  std::map<std::tuple<int, int, int>, int> tabu_until;

  // Full move list template; regenerated indices only, cheap for small n.
  std::vector<detail::TsMove> all_moves;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (i != j && j != i - 1) all_moves.push_back({0, i, j});
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) all_moves.push_back({1, i, j});
  for (int i = 0; i + 4 <= n; ++i) all_moves.push_back({2, i, 0});

  if (all_moves.empty()) return split_giant_tour(tour, inst, co);

  std::vector<int> order(all_moves.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);

  std::vector<int> cand;
  for (int it = 0; it < params.iterations; ++it) {
    const int eval_count =
        std::min<int>(params.neighborhood_cap, static_cast<int>(all_moves.size()));
    if (eval_count < static_cast<int>(all_moves.size()))
      std::shuffle(order.begin(), order.end(), rng);

    int chosen = -1;
    double chosen_cost = 0.0;
    std::vector<int> chosen_tour;
    for (int oi = 0; oi < eval_count; ++oi) {
      const detail::TsMove& mv = all_moves[order[oi]];
      cand = tour;
      detail::apply_move(cand, mv);
      const double c = evaluate(cand);
      const auto key = detail::move_key(tour, mv);
      const auto found = tabu_until.find(key);
      const bool tabu = found != tabu_until.end() && found->second > it;
      if (tabu && c >= best) continue;  // aspiration: beat the global best
      if (chosen < 0 || c < chosen_cost) {
        chosen = order[oi];
        chosen_cost = c;
        chosen_tour = cand;
      }
    }
    if (chosen < 0) {
      if (params.best_trace) params.best_trace->push_back(best);
      continue;  // every sampled move tabu and non-aspiring
    }
    tabu_until[detail::move_key(tour, all_moves[chosen])] =
        it + params.tenure;
    tour = std::move(chosen_tour);
    current = chosen_cost;
    if (current < best) {
      best = current;
      best_tour = tour;
    }
    if (params.best_trace) params.best_trace->push_back(best);
  }
  return split_giant_tour(best_tour, inst, co);
}

}  // namespace lrgen
