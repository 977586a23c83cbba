#pragma once

// Adaptive large neighborhood search: random / worst destroy, random /
// greedy / regret-5 repair, roulette operator selection with segment-wise
// reward-driven weights, record-to-record acceptance with a decaying
// threshold.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <vector>

#include "core.hpp"
#include "cost.hpp"
#include "instance.hpp"
#include "solution.hpp"

namespace lrgen {

struct AlnsParams {
  double destroy_pct_min = 0.1, destroy_pct_max = 0.4;
  int worst_min = 5, worst_max = 10;
  double reward_best = 30.0;      // new global best
  double reward_better = 20.0;    // improved the current solution
  double reward_accepted = 10.0;  // accepted within the threshold
  double reward_rejected = -10.0;
  double weight_decay = 0.4;      // fraction of the old weight retained
  double threshold_decay = 0.9;
  double initial_threshold = 0.1;
  int segment = 100;              // iterations per weight/threshold update
  int iterations = 5000;
  std::vector<double>* best_trace = nullptr;  // per-iteration incumbent cost
};

namespace detail {

struct AlnsWork {
  const Instance* inst;
  const CostCoefficients* co;
  std::vector<Route> routes;
  std::vector<double> depot_load;
  std::vector<int> depot_routes;

  void rebuild_caches() {
    depot_load.assign(inst->m(), 0.0);
    depot_routes.assign(inst->m(), 0);
    for (auto& r : routes) {
      r.load = 0.0;
      for (int v : r.stops) r.load += inst->demand_of(v);
      if (!r.stops.empty()) {
        depot_load[r.depot] += r.load;
        depot_routes[r.depot] += 1;
      }
    }
  }

  [[nodiscard]] double penalty_delta(int depot, double add) const {
    const double m_k = inst->depots[depot].max_supply;
    const double before = std::max(depot_load[depot] - m_k, 0.0);
    const double after = std::max(depot_load[depot] + add - m_k, 0.0);
    return co->delta * (after - before);
  }

  [[nodiscard]] RoutePlan plan() const {
    RoutePlan p;
    for (const auto& r : routes)
      if (!r.stops.empty()) p.routes.push_back(r);
    normalize_plan(p);
    return p;
  }

  [[nodiscard]] double total() const {
    return cost_sel(plan(), *inst, *co).total;
  }
};

// One candidate insertion slot and its exact objective delta.
struct Slot {
  int route = -1;  // -1: open a new route at `depot`
  int pos = 0;
  int depot = 0;
  double delta = std::numeric_limits<double>::infinity();
};

inline Slot best_slot(const AlnsWork& w, int cust, std::mt19937_64* pick_random,
                      std::mt19937_64& rng, std::vector<Slot>* all_out = nullptr) {
  const Instance& inst = *w.inst;
  const CostCoefficients& co = *w.co;
  const double q = inst.demand_of(cust);
  const Position& cp = inst.vertex_pos(cust);
  std::vector<Slot> slots;
  for (int ri = 0; ri < static_cast<int>(w.routes.size()); ++ri) {
    const Route& r = w.routes[ri];
    if (r.stops.empty() || r.load + q > inst.fleet.capacity) continue;
    const double pen = w.penalty_delta(r.depot, q);
    for (int p = 0; p <= static_cast<int>(r.stops.size()); ++p) {
      const Position& a = p == 0 ? inst.depots[r.depot].pos
                                 : inst.vertex_pos(r.stops[p - 1]);
      const Position& b = p == static_cast<int>(r.stops.size())
                              ? inst.depots[r.depot].pos
                              : inst.vertex_pos(r.stops[p]);
      slots.push_back({ri, p, r.depot,
                       distance(a, cp) + distance(cp, b) - distance(a, b) + pen});
    }
  }
  for (int k = 0; k < inst.m(); ++k) {
    const double open = w.depot_routes[k] == 0
                            ? co.alpha * inst.depots[k].opening_cost
                            : 0.0;
    slots.push_back({-1, 0, k,
                     2.0 * distance(inst.depots[k].pos, cp) +
                         co.beta * inst.fleet.setup_cost + open +
                         w.penalty_delta(k, q)});
  }
  invariant(!slots.empty(), "no insertion slot for a customer");
  if (all_out) *all_out = slots;
  if (pick_random) {
    std::uniform_int_distribution<std::size_t> d(0, slots.size() - 1);
    return slots[d(*pick_random)];
  }
  Slot best;
  for (const Slot& s : slots)
    if (s.delta < best.delta) best = s;
  (void)rng;
  return best;
}

inline void apply_insert(AlnsWork& w, int cust, const Slot& s) {
  const double q = w.inst->demand_of(cust);
  if (s.route >= 0) {
    Route& r = w.routes[s.route];
    r.stops.insert(r.stops.begin() + s.pos, cust);
    r.load += q;
    w.depot_load[r.depot] += q;
  } else {
    Route r;
    r.depot = s.depot;
    r.stops = {cust};
    r.load = q;
    w.routes.push_back(std::move(r));
    w.depot_load[s.depot] += q;
    w.depot_routes[s.depot] += 1;
  }
}

inline void remove_customers(AlnsWork& w, const std::vector<int>& custs) {
  for (int c : custs) {
    for (auto& r : w.routes) {
      auto it = std::find(r.stops.begin(), r.stops.end(), c);
      if (it != r.stops.end()) {
        r.stops.erase(it);
        r.load -= w.inst->demand_of(c);
        w.depot_load[r.depot] -= w.inst->demand_of(c);
        if (r.stops.empty()) w.depot_routes[r.depot] -= 1;
        break;
      }
    }
  }
  std::erase_if(w.routes, [](const Route& r) { return r.stops.empty(); });
}

}  // namespace detail

// Deterministic construction: nearest-neighbor routes from the depot closest
// to the customer centroid.
inline RoutePlan alns_initial_plan(const Instance& inst) {
  Position centroid{0, 0};
  for (const auto& c : inst.customers) {
    centroid.x += c.pos.x / inst.n();
    centroid.y += c.pos.y / inst.n();
  }
  int d0 = 0;
  for (int k = 1; k < inst.m(); ++k)
    if (distance(inst.depots[k].pos, centroid) <
        distance(inst.depots[d0].pos, centroid))
      d0 = k;

  std::vector<bool> routed(inst.n(), false);
  RoutePlan plan;
  int remaining = inst.n();
  while (remaining > 0) {
    Route r;
    r.depot = d0;
    Position at = inst.depots[d0].pos;
    while (true) {
      int best = -1;
      double best_d = 0.0;
      for (int e = 0; e < inst.n(); ++e) {
        if (routed[e] ||
            r.load + inst.customers[e].demand > inst.fleet.capacity)
          continue;
        const double d = distance(at, inst.customers[e].pos);
        if (best < 0 || d < best_d) {
          best = e;
          best_d = d;
        }
      }
      if (best < 0) break;
      routed[best] = true;
      --remaining;
      r.stops.push_back(best + inst.m());
      r.load += inst.customers[best].demand;
      at = inst.customers[best].pos;
    }
    invariant(!r.stops.empty(), "initial construction made no progress");
    plan.routes.push_back(std::move(r));
  }
  normalize_plan(plan);
  return plan;
}

inline RoutePlan solve_alns(const Instance& inst, const CostCoefficients& co,
                            const AlnsParams& params, std::uint64_t seed) {
  auto rng = make_rng(seed);
  detail::AlnsWork w{&inst, &co, {}, {}, {}};
  {
    RoutePlan init = alns_initial_plan(inst);
    w.routes = init.routes;
  }
  w.rebuild_caches();

  RoutePlan best_plan = w.plan();
  double best = w.total();
  double current = best;
  std::vector<Route> current_routes = w.routes;

  const int destroy_ops = 2, repair_ops = 3;
  std::vector<double> dw(destroy_ops, 1.0), rw(repair_ops, 1.0);
  std::vector<double> dscore(destroy_ops, 0.0), rscore(repair_ops, 0.0);
  std::vector<int> duse(destroy_ops, 0), ruse(repair_ops, 0);
  double threshold = params.initial_threshold;

  auto roulette = [&](const std::vector<double>& ws) {
    double sum = 0.0;
    for (double x : ws) sum += x;
    std::uniform_real_distribution<double> u(0.0, sum);
    double r = u(rng);
    for (std::size_t i = 0; i < ws.size(); ++i) {
      r -= ws[i];
      if (r <= 0) return static_cast<int>(i);
    }
    return static_cast<int>(ws.size()) - 1;
  };

  for (int it = 0; it < params.iterations; ++it) {
    w.routes = current_routes;
    w.rebuild_caches();

    const int d_op = roulette(dw);
    const int r_op = roulette(rw);
    duse[d_op] += 1;
    ruse[r_op] += 1;

    // Destroy.
    std::vector<int> removed;
    if (d_op == 0) {
      std::uniform_real_distribution<double> pct(params.destroy_pct_min,
                                                 params.destroy_pct_max);
      int count = std::clamp(static_cast<int>(std::lround(pct(rng) * inst.n())),
                             1, inst.n());
      std::vector<int> all(inst.n());
      for (int e = 0; e < inst.n(); ++e) all[e] = e + inst.m();
      std::shuffle(all.begin(), all.end(), rng);
      removed.assign(all.begin(), all.begin() + count);
    } else {
      std::uniform_int_distribution<int> kd(params.worst_min, params.worst_max);
      const int count = std::clamp(kd(rng), 1, inst.n());
      // Rank customers by removal gain (detour saved; singleton routes also
      // save the vehicle and possibly the depot).
      std::vector<std::pair<double, int>> gain;
      for (const Route& r : w.routes) {
        for (int p = 0; p < static_cast<int>(r.stops.size()); ++p) {
          const Position& a = p == 0 ? inst.depots[r.depot].pos
                                     : inst.vertex_pos(r.stops[p - 1]);
          const Position& b = p + 1 == static_cast<int>(r.stops.size())
                                  ? inst.depots[r.depot].pos
                                  : inst.vertex_pos(r.stops[p + 1]);
          const Position& cp = inst.vertex_pos(r.stops[p]);
          double g = distance(a, cp) + distance(cp, b) - distance(a, b);
          if (r.stops.size() == 1) {
            g += co.beta * inst.fleet.setup_cost;
            if (w.depot_routes[r.depot] == 1)
              g += co.alpha * inst.depots[r.depot].opening_cost;
          }
          gain.push_back({g, r.stops[p]});
        }
      }
      std::sort(gain.begin(), gain.end(),
                [](auto& x, auto& y) { return x.first > y.first; });
      for (int i = 0; i < count && i < static_cast<int>(gain.size()); ++i)
        removed.push_back(gain[i].second);
    }
    detail::remove_customers(w, removed);

    // Repair.
    if (r_op == 0) {
      std::shuffle(removed.begin(), removed.end(), rng);
      for (int c : removed)
        detail::apply_insert(w, c, detail::best_slot(w, c, &rng, rng));
    } else if (r_op == 1) {
      std::vector<int> todo = removed;
      while (!todo.empty()) {
        int pick = -1;
        detail::Slot pick_slot;
        for (std::size_t i = 0; i < todo.size(); ++i) {
          detail::Slot s = detail::best_slot(w, todo[i], nullptr, rng);
          if (pick < 0 || s.delta < pick_slot.delta) {
            pick = static_cast<int>(i);
            pick_slot = s;
          }
        }
        detail::apply_insert(w, todo[pick], pick_slot);
        todo.erase(todo.begin() + pick);
      }
    } else {
      std::vector<int> todo = removed;
      while (!todo.empty()) {
        int pick = -1;
        detail::Slot pick_slot;
        double pick_regret = -1.0;
        std::vector<detail::Slot> slots;
        for (std::size_t i = 0; i < todo.size(); ++i) {
          detail::best_slot(w, todo[i], nullptr, rng, &slots);
          std::sort(slots.begin(), slots.end(),
                    [](auto& a, auto& b) { return a.delta < b.delta; });
          double regret = 0.0;
          for (std::size_t j = 1; j < slots.size() && j < 5; ++j)
            regret += slots[j].delta - slots[0].delta;
          if (regret > pick_regret) {
            pick_regret = regret;
            pick = static_cast<int>(i);
            pick_slot = slots[0];
          }
        }
        detail::apply_insert(w, todo[pick], pick_slot);
        todo.erase(todo.begin() + pick);
      }
    }

    const double cand = w.total();

    // Record-to-record acceptance against the incumbent record.
    double score = params.reward_rejected;
    if (cand < best) {
      best = cand;
      best_plan = w.plan();
      current = cand;
      current_routes = w.routes;
      score = params.reward_best;
    } else if (cand < current) {
      current = cand;
      current_routes = w.routes;
      score = params.reward_better;
    } else if (cand < best * (1.0 + threshold)) {
      current = cand;
      current_routes = w.routes;
      score = params.reward_accepted;
    }
    dscore[d_op] += score;
    rscore[r_op] += score;

    if (params.best_trace) params.best_trace->push_back(best);

    if ((it + 1) % params.segment == 0) {
      for (int i = 0; i < destroy_ops; ++i) {
        if (duse[i] > 0)
          dw[i] = params.weight_decay * dw[i] +
                  (1.0 - params.weight_decay) *
                      std::max(dscore[i] / duse[i], 0.1);
        dscore[i] = 0.0;
        duse[i] = 0;
      }
      for (int i = 0; i < repair_ops; ++i) {
        if (ruse[i] > 0)
          rw[i] = params.weight_decay * rw[i] +
                  (1.0 - params.weight_decay) *
                      std::max(rscore[i] / ruse[i], 0.1);
        rscore[i] = 0.0;
        ruse[i] = 0;
      }
      threshold *= params.threshold_decay;
    }
  }
  return best_plan;
}

}  // namespace lrgen
