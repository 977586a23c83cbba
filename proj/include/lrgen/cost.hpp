#pragma once

// Objective functions: route-selection cost with full decomposition,
// depot-generation cost, and the balance-augmented variant.

#include <cmath>
#include <span>
#include <vector>

#include "core.hpp"
#include "instance.hpp"
#include "solution.hpp"

namespace lrgen {

struct CostCoefficients {
  double alpha = 1.0;    // depot opening weight
  double beta = 1.0;     // vehicle setup weight
  double delta = 2.0;    // supply-excess penalty weight
  double lambda = 10.0;  // depot-pair too-distant weight
  double epsilon = 10.0; // depot-pair too-close weight
  double l_min = 0.2;    // allowed inter-depot distance range
  double l_max = 0.7;
};

struct CostBreakdown {
  double total = 0.0;
  double route_length = 0.0;    // sum of route polyline lengths
  double depot_cost = 0.0;      // raw: sum of opening costs of used depots
  int depots_opened = 0;
  double vehicle_cost = 0.0;    // raw: setup cost times vehicles used
  int vehicles_used = 0;
  double supply_penalty = 0.0;  // raw: sum over depots of max(load - M, 0)
};

[[nodiscard]] inline double route_polyline_length(const Route& r,
                                                  const Instance& inst) {
  if (r.stops.empty()) return 0.0;
  const Position& dp = inst.depots[r.depot].pos;
  double len = distance(dp, inst.vertex_pos(r.stops.front()));
  for (std::size_t i = 1; i < r.stops.size(); ++i)
    len += distance(inst.vertex_pos(r.stops[i - 1]),
                    inst.vertex_pos(r.stops[i]));
  len += distance(inst.vertex_pos(r.stops.back()), dp);
  return len;
}

inline CostBreakdown cost_sel(const RoutePlan& plan, const Instance& inst,
                              const CostCoefficients& co) {
  const ValidationReport rep = validate(plan, inst);
  if (!rep.ok)
    throw InfeasiblePlan("cost_sel on invalid plan: " + rep.violations.front());

  CostBreakdown b;
  std::vector<double> depot_load(inst.m(), 0.0);
  std::vector<int> depot_routes(inst.m(), 0);
  for (const Route& r : plan.routes) {
    if (r.stops.empty()) continue;  // spawns no vehicle, opens nothing
    b.route_length += route_polyline_length(r, inst);
    depot_routes[r.depot] += 1;
    for (int v : r.stops) depot_load[r.depot] += inst.demand_of(v);
  }
  for (int k = 0; k < inst.m(); ++k) {
    if (depot_routes[k] > 0) {
      b.depots_opened += 1;
      b.depot_cost += inst.depots[k].opening_cost;
      b.vehicles_used += depot_routes[k];
      b.supply_penalty += std::max(depot_load[k] - inst.depots[k].max_supply, 0.0);
    }
  }
  b.vehicle_cost = inst.fleet.setup_cost * b.vehicles_used;
  b.total = b.route_length + co.alpha * b.depot_cost +
            co.beta * b.vehicle_cost + co.delta * b.supply_penalty;
  return b;
}

// Pairwise depot-distance penalty over unordered pairs (i < j); the i = j
// self-pair is excluded, its self-distance not being an inter-depot distance.
[[nodiscard]] inline double depot_distance_penalty(const DepotSet& depots,
                                                   const CostCoefficients& co) {
  double pen = 0.0;
  const auto& ps = depots.positions;
  for (std::size_t i = 0; i < ps.size(); ++i)
    for (std::size_t j = i + 1; j < ps.size(); ++j) {
      const double d = distance(ps[i], ps[j]);
      pen += co.lambda * std::max(d - co.l_max, 0.0) +
             co.epsilon * std::max(co.l_min - d, 0.0);
    }
  return pen;
}

inline double cost_gen(const DepotSet& depots, double route_length,
                       const CostCoefficients& co) {
  return route_length + depot_distance_penalty(depots, co);
}

// Balance penalty over per-depot route lengths l_k against target
// proportions rho_k; pairs run k <= k', the k = k' terms being identically 0.
[[nodiscard]] inline double balance_penalty_from_lengths(
    std::span<const double> lengths, std::span<const double> rho) {
  invariant(lengths.size() == rho.size(), "balance penalty size mismatch");
  double pen = 0.0;
  for (std::size_t k = 0; k < lengths.size(); ++k)
    for (std::size_t kk = k; kk < lengths.size(); ++kk)
      pen += std::abs(lengths[k] - (rho[k] / rho[kk]) * lengths[kk]);
  return pen;
}

[[nodiscard]] inline std::vector<double> per_depot_lengths(
    const RoutePlan& plan, const Instance& inst) {
  std::vector<double> lengths(inst.m(), 0.0);  // unopened depots stay at 0
  for (const Route& r : plan.routes)
    if (!r.stops.empty()) lengths[r.depot] += route_polyline_length(r, inst);
  return lengths;
}

[[nodiscard]] inline double balance_penalty(const RoutePlan& plan,
                                            const Instance& inst,
                                            std::span<const double> rho) {
  if (static_cast<int>(rho.size()) != inst.m())
    throw DimensionMismatch("proportions length does not match depot count");
  for (double r : rho)
    if (!(r > 0)) throw DimensionMismatch("proportions must be positive");
  const std::vector<double> lengths = per_depot_lengths(plan, inst);
  return balance_penalty_from_lengths(lengths, rho);
}

inline double cost_balanced(const RoutePlan& plan, const Instance& inst,
                            const CostCoefficients& co,
                            std::span<const double> rho) {
  return cost_sel(plan, inst, co).total + balance_penalty(plan, inst, rho);
}

}  // namespace lrgen
