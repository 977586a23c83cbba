#pragma once

// Exact enumeration for tiny instances: ground truth for the solvers, plus a
// grid-search oracle for depot placement quality.

#include <algorithm>
#include <bit>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "core.hpp"
#include "cost.hpp"
#include "instance.hpp"
#include "solution.hpp"

namespace lrgen {

struct OracleResult {
  RoutePlan best_plan;
  CostBreakdown best_cost;
  std::uint64_t states_explored = 0;
};

namespace detail {

// Best closed tour (depot -> group -> depot) per depot, for every customer
// subset: interior permutations are enumerated once per subset and shared
// across depots.
struct TourTable {
  int n = 0, m = 0;
  std::vector<double> cost;              // [subset][depot]
  std::vector<std::vector<int>> order;   // [subset*m+depot] customer ids 0..n-1

  [[nodiscard]] double at(std::uint32_t s, int k) const {
    return cost[static_cast<std::size_t>(s) * m + k];
  }
};

inline TourTable build_tour_table(const Instance& inst,
                                  std::uint64_t* explored) {
  const int n = inst.n(), m = inst.m();
  const DistanceMatrix dm = distance_matrix(inst);
  TourTable t;
  t.n = n;
  t.m = m;
  const std::size_t subsets = std::size_t{1} << n;
  t.cost.assign(subsets * m, std::numeric_limits<double>::infinity());
  t.order.assign(subsets * m, {});

  std::vector<int> members, perm;
  for (std::uint32_t s = 1; s < subsets; ++s) {
    members.clear();
    for (int e = 0; e < n; ++e)
      if (s & (1u << e)) members.push_back(e);
    perm = members;
    do {
      if (explored) ++*explored;
      double interior = 0.0;
      for (std::size_t i = 1; i < perm.size(); ++i)
        interior += dm(m + perm[i - 1], m + perm[i]);
      for (int k = 0; k < m; ++k) {
        const double c =
            dm(k, m + perm.front()) + interior + dm(m + perm.back(), k);
        auto& slot = t.cost[static_cast<std::size_t>(s) * m + k];
        if (c < slot) {
          slot = c;
          t.order[static_cast<std::size_t>(s) * m + k] = perm;
        }
      }
    } while (std::next_permutation(perm.begin(), perm.end()));
  }
  return t;
}

}  // namespace detail

inline OracleResult brute_force(const Instance& inst,
                                const CostCoefficients& co,
                                std::uint64_t limit = 200'000'000) {
  const int n = inst.n(), m = inst.m();
  if (n > 8 || m > 3 || m < 1)
    throw TooLarge("brute_force supports n <= 8, 1 <= m <= 3");

  OracleResult result;
  detail::TourTable tours = detail::build_tour_table(inst, &result.states_explored);

  std::vector<double> group_demand(std::size_t{1} << n, 0.0);
  for (std::uint32_t s = 1; s < (1u << n); ++s) {
    const int low = std::countr_zero(s);
    group_demand[s] = group_demand[s & (s - 1)] + inst.customers[low].demand;
  }

  double best_total = std::numeric_limits<double>::infinity();
  std::vector<int> best_trace;

  // Set partitions via restricted growth strings; depot assignments in
  // base-m counting order. Ties on exact cost equality break toward the
  // lexicographically smaller canonical trace.
  const double cap = inst.fleet.capacity;
  std::vector<int> label(n, 0);
  std::vector<std::uint32_t> groups;
  std::vector<int> assign;

  auto consider_partition = [&](int group_count) {
    groups.assign(group_count, 0);
    for (int e = 0; e < n; ++e) groups[label[e]] |= 1u << e;
    for (std::uint32_t g : groups)
      if (group_demand[g] > cap) return;

    assign.assign(group_count, 0);
    std::vector<double> depot_load(m), depot_len(m);
    std::vector<int> depot_routes(m);
    while (true) {
      if (++result.states_explored > limit)
        throw TooLarge("brute_force enumeration limit exceeded");
      std::fill(depot_load.begin(), depot_load.end(), 0.0);
      std::fill(depot_len.begin(), depot_len.end(), 0.0);
      std::fill(depot_routes.begin(), depot_routes.end(), 0);
      double length = 0.0;
      for (int g = 0; g < group_count; ++g) {
        const int k = assign[g];
        length += tours.at(groups[g], k);
        depot_load[k] += group_demand[groups[g]];
        depot_routes[k] += 1;
      }
      double opening = 0.0, penalty = 0.0;
      int vehicles = 0;
      for (int k = 0; k < m; ++k) {
        if (depot_routes[k] == 0) continue;
        opening += inst.depots[k].opening_cost;
        vehicles += depot_routes[k];
        penalty += std::max(depot_load[k] - inst.depots[k].max_supply, 0.0);
      }
      const double total = length + co.alpha * opening +
                           co.beta * inst.fleet.setup_cost * vehicles +
                           co.delta * penalty;
      if (total <= best_total) {
        RoutePlan plan;
        for (int g = 0; g < group_count; ++g) {
          Route r;
          r.depot = assign[g];
          for (int e : tours.order[static_cast<std::size_t>(groups[g]) * m +
                                   assign[g]])
            r.stops.push_back(e + m);
          r.load = group_demand[groups[g]];
          plan.routes.push_back(std::move(r));
        }
        normalize_plan(plan);
        std::vector<int> trace = plan_to_trace(plan, inst);
        if (total < best_total ||
            (total == best_total &&
             (best_trace.empty() || trace < best_trace))) {
          best_total = total;
          best_trace = std::move(trace);
          result.best_plan = std::move(plan);
        }
      }
      // next assignment
      int g = 0;
      while (g < group_count && ++assign[g] == m) assign[g++] = 0;
      if (g == group_count) break;
    }
  };

  // Enumerate restricted growth strings: label[e] <= 1 + max earlier label.
  auto rec = [&](auto&& self, int e2, int max_label) -> void {
    const int top = (e2 == 0) ? 0 : max_label + 1;
    for (int l = 0; l <= top; ++l) {
      label[e2] = l;
      const int widened = std::max(max_label, l);
      if (e2 == n - 1)
        consider_partition(widened + 1);
      else
        self(self, e2 + 1, widened);
    }
  };
  rec(rec, 0, -1);

  invariant(!best_trace.empty() || n == 0, "oracle found no feasible plan");
  result.best_cost = cost_sel(result.best_plan, inst, co);
  return result;
}

// Exhaustive depot-placement search on a uniform grid over the unit square,
// scoring each placement by optimal pure travel cost (interior paths solved
// exactly, groups via subset DP) plus the pairwise depot-distance penalty.
// Fixed costs are deliberately zero: placements are compared on geometry.
inline DepotSet brute_force_depot_placement(std::span<const Customer> customers,
                                            const FleetConfig& fleet,
                                            const CostCoefficients& co,
                                            int grid_resolution, int m) {
  const int n = static_cast<int>(customers.size());
  if (n > 6 || n < 1 || m > 2 || m < 1 || grid_resolution > 21 ||
      grid_resolution < 2)
    throw TooLarge(
        "placement oracle supports n <= 6, m <= 2, grid 2..21 per axis");

  const std::uint32_t full = (1u << n) - 1;
  std::vector<double> dem(full + 1, 0.0);
  for (std::uint32_t s = 1; s <= full; ++s) {
    const int low = std::countr_zero(s);
    dem[s] = dem[s & (s - 1)] + customers[low].demand;
  }

  // Interior path costs P[s][a][b]: cheapest path over subset s from a to b.
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> cd(static_cast<std::size_t>(n) * n, 0.0);
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b)
      cd[static_cast<std::size_t>(a) * n + b] =
          distance(customers[a].pos, customers[b].pos);
  std::vector<double> path((full + 1) * static_cast<std::size_t>(n) * n, inf);
  auto pat = [&](std::uint32_t s, int a, int b) -> double& {
    return path[(static_cast<std::size_t>(s) * n + a) * n + b];
  };
  for (int a = 0; a < n; ++a) {
    // dp[s][j]: best path from a over subset s ending at j (a, j in s).
    std::vector<double> dp((full + 1) * static_cast<std::size_t>(n), inf);
    dp[(std::size_t{1} << a) * n + a] = 0.0;
    for (std::uint32_t s = 1; s <= full; ++s) {
      if (!(s & (1u << a))) continue;
      for (int j = 0; j < n; ++j) {
        const double cur = dp[static_cast<std::size_t>(s) * n + j];
        if (cur == inf || !(s & (1u << j))) continue;
        for (int k2 = 0; k2 < n; ++k2) {
          if (s & (1u << k2)) continue;
          auto& nxt = dp[(static_cast<std::size_t>(s) | (1u << k2)) * n + k2];
          const double cand = cur + cd[static_cast<std::size_t>(j) * n + k2];
          if (cand < nxt) nxt = cand;
        }
      }
    }
    for (std::uint32_t s = 1; s <= full; ++s)
      if (s & (1u << a))
        for (int b = 0; b < n; ++b)
          if (s & (1u << b)) pat(s, a, b) = dp[static_cast<std::size_t>(s) * n + b];
  }

  // Grid points and, per point, the optimal multi-route cover cost f[U].
  const int res = grid_resolution;
  const int points = res * res;
  std::vector<Position> grid(points);
  for (int i = 0; i < res; ++i)
    for (int j = 0; j < res; ++j)
      grid[i * res + j] = {double(i) / (res - 1), double(j) / (res - 1)};

  std::vector<double> cover(static_cast<std::size_t>(points) * (full + 1), inf);
  std::vector<double> tour(full + 1, inf);
  for (int p = 0; p < points; ++p) {
    // Single-route closed tours from p.
    for (std::uint32_t s = 1; s <= full; ++s) {
      tour[s] = inf;
      if (dem[s] > fleet.capacity) continue;
      for (int a = 0; a < n; ++a) {
        if (!(s & (1u << a))) continue;
        const double da = distance(grid[p], customers[a].pos);
        for (int b = 0; b < n; ++b) {
          if (!(s & (1u << b))) continue;
          const double c = da + pat(s, a, b) + distance(customers[b].pos, grid[p]);
          if (c < tour[s]) tour[s] = c;
        }
      }
    }
    // Partition into tours: iterate submasks containing the lowest set bit.
    double* f = cover.data() + static_cast<std::size_t>(p) * (full + 1);
    f[0] = 0.0;
    for (std::uint32_t u = 1; u <= full; ++u) {
      const std::uint32_t lowbit = u & (~u + 1);
      double best = inf;
      for (std::uint32_t s = u; s; s = (s - 1) & u) {
        if (!(s & lowbit)) continue;
        if (tour[s] == inf || f[u ^ s] == inf) continue;
        const double c = tour[s] + f[u ^ s];
        if (c < best) best = c;
      }
      f[u] = best;
    }
  }

  DepotSet best_set;
  double best_score = inf;
  if (m == 1) {
    for (int p = 0; p < points; ++p) {
      const double score = cover[static_cast<std::size_t>(p) * (full + 1) + full];
      if (score < best_score) {
        best_score = score;
        best_set.positions = {grid[p]};
      }
    }
  } else {
    for (int p = 0; p < points; ++p) {
      const double* fp = cover.data() + static_cast<std::size_t>(p) * (full + 1);
      for (int q = p; q < points; ++q) {
        const double* fq = cover.data() + static_cast<std::size_t>(q) * (full + 1);
        double travel = inf;
        for (std::uint32_t a2 = full;; a2 = (a2 - 1) & full) {
          if (fp[a2] != inf && fq[full ^ a2] != inf)
            travel = std::min(travel, fp[a2] + fq[full ^ a2]);
          if (a2 == 0) break;
        }
        DepotSet cand{{grid[p], grid[q]}};
        const double score = cost_gen(cand, travel, co);
        if (score < best_score) {
          best_score = score;
          best_set = std::move(cand);
        }
      }
    }
  }
  invariant(best_score < inf, "placement oracle found no feasible cover");
  return best_set;
}

}  // namespace lrgen
