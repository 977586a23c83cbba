#pragma once

// Giant-tour decoding: optimal split of a customer permutation into
// capacity-feasible depot-anchored routes via a shortest-path DP. Each
// candidate segment is attached to its cheapest depot by endpoint distance;
// arc weights carry travel plus the per-vehicle setup cost, so the DP trades
// route count against length. Depot opening and supply-excess costs are
// evaluated on the decoded plan by the callers' objective.

#include <limits>
#include <span>
#include <vector>

#include "core.hpp"
#include "cost.hpp"
#include "instance.hpp"
#include "solution.hpp"

namespace lrgen {

// tour holds customer vertex indices (each >= m), a permutation of all n.
inline RoutePlan split_giant_tour(std::span<const int> tour,
                                  const Instance& inst,
                                  const CostCoefficients& co) {
  const int n = static_cast<int>(tour.size());
  invariant(n == inst.n(), "giant tour must cover every customer");
  const double inf = std::numeric_limits<double>::infinity();

  // best[i]: cheapest split of tour[0..i); arc (i, j) = one route over
  // tour[i..j).
  std::vector<double> best(n + 1, inf);
  std::vector<int> pred(n + 1, -1), pred_depot(n + 1, -1);
  best[0] = 0.0;
  for (int i = 0; i < n; ++i) {
    if (best[i] == inf) continue;
    double load = 0.0, interior = 0.0;
    for (int j = i + 1; j <= n; ++j) {
      load += inst.demand_of(tour[j - 1]);
      if (load > inst.fleet.capacity) break;
      if (j - 1 > i)
        interior += distance(inst.vertex_pos(tour[j - 2]),
                             inst.vertex_pos(tour[j - 1]));
      // Cheapest depot for this segment by endpoint attachment.
      double attach = inf;
      int depot = -1;
      for (int k = 0; k < inst.m(); ++k) {
        const double a =
            distance(inst.depots[k].pos, inst.vertex_pos(tour[i])) +
            distance(inst.vertex_pos(tour[j - 1]), inst.depots[k].pos);
        if (a < attach) {
          attach = a;
          depot = k;
        }
      }
      const double arc =
          interior + attach + co.beta * inst.fleet.setup_cost;
      if (best[i] + arc < best[j]) {
        best[j] = best[i] + arc;
        pred[j] = i;
        pred_depot[j] = depot;
      }
    }
  }
  invariant(best[n] < inf, "giant tour admits no feasible split");

  RoutePlan plan;
  for (int j = n; j > 0; j = pred[j]) {
    Route r;
    r.depot = pred_depot[j];
    for (int t = pred[j]; t < j; ++t) {
      r.stops.push_back(tour[t]);
      r.load += inst.demand_of(tour[t]);
    }
    plan.routes.push_back(std::move(r));
  }
  normalize_plan(plan);
  return plan;
}

}  // namespace lrgen
