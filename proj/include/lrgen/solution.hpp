#pragma once

// Route-plan representation, MDP trace <-> route conversions, validation.

#include <algorithm>
#include <span>
#include <string>
#include <vector>

#include "core.hpp"
#include "instance.hpp"
#include "mdp_env.hpp"

namespace lrgen {

struct Route {
  int depot = 0;
  std::vector<int> stops;  // customer vertex indices, visiting order
  double load = 0.0;       // total demand on the route
};

struct RoutePlan {
  std::vector<Route> routes;
  std::vector<int> source_trace;  // originating action trace, may be empty
};

struct ValidationReport {
  bool ok = true;
  std::vector<std::string> violations;

  void fail(std::string msg) {
    ok = false;
    violations.push_back(std::move(msg));
  }
};

inline ValidationReport validate(const RoutePlan& plan, const Instance& inst) {
  ValidationReport rep;
  const int m = inst.m();
  std::vector<int> seen(inst.n(), 0);
  for (const Route& r : plan.routes) {
    if (r.depot < 0 || r.depot >= m) {
      rep.fail("route depot index " + std::to_string(r.depot) +
               " out of range");
      continue;
    }
    double load = 0.0;
    for (int v : r.stops) {
      if (v < m || v >= inst.vertex_count()) {
        rep.fail("stop index " + std::to_string(v) + " is not a customer");
        continue;
      }
      load += inst.demand_of(v);
      seen[v - m] += 1;
    }
    if (load > inst.fleet.capacity + 1e-12)
      rep.fail("capacity exceeded on a route from depot " +
               std::to_string(r.depot));
  }
  for (int e = 0; e < inst.n(); ++e) {
    if (seen[e] == 0)
      rep.fail("customer " + std::to_string(e + m) + " unserved");
    else if (seen[e] > 1)
      rep.fail("customer " + std::to_string(e + m) + " served twice");
  }
  return rep;
}

// Canonical route order: by depot index, then first stop index. Plans that
// are structurally equal compare equal after normalization.
inline void normalize_plan(RoutePlan& plan) {
  std::sort(plan.routes.begin(), plan.routes.end(),
            [](const Route& a, const Route& b) {
              if (a.depot != b.depot) return a.depot < b.depot;
              const int sa = a.stops.empty() ? -1 : a.stops.front();
              const int sb = b.stops.empty() ? -1 : b.stops.front();
              return sa < sb;
            });
}

inline RoutePlan trace_to_plan(std::span<const int> trace,
                               const Instance& inst) {
  const int m = inst.m();
  if (trace.empty() || trace[0] >= m || trace[0] < 0)
    throw MalformedTrace("trace does not start at a depot");
  RoutePlan plan;
  plan.source_trace.assign(trace.begin(), trace.end());
  int depot = trace[0];
  std::vector<int> run;
  auto close_run = [&](int at_depot) {
    if (run.empty()) return;
    Route r;
    r.depot = at_depot;
    r.stops = run;
    for (int v : r.stops) r.load += inst.demand_of(v);
    plan.routes.push_back(std::move(r));
    run.clear();
  };
  for (std::size_t i = 1; i < trace.size(); ++i) {
    const int v = trace[i];
    if (v < 0 || v >= inst.vertex_count())
      throw MalformedTrace("trace vertex " + std::to_string(v) +
                           " out of range");
    if (v < m) {
      close_run(depot);  // run anchored at its enclosing departure depot
      depot = v;
    } else {
      run.push_back(v);
    }
  }
  close_run(depot);
  std::vector<int> covered(inst.n(), 0);
  for (const Route& r : plan.routes)
    for (int v : r.stops) covered[v - m] = 1;
  for (int e = 0; e < inst.n(); ++e)
    if (!covered[e])
      throw MalformedTrace("trace leaves customer " + std::to_string(e + m) +
                           " unserved");
  normalize_plan(plan);
  return plan;
}

inline std::vector<int> plan_to_trace(const RoutePlan& plan,
                                      const Instance& inst) {
  const ValidationReport rep = validate(plan, inst);
  if (!rep.ok) throw InfeasiblePlan("plan invalid: " + rep.violations.front());
  RoutePlan sorted = plan;
  normalize_plan(sorted);
  std::vector<int> trace;
  int current_depot = -1;
  for (const Route& r : sorted.routes) {
    if (r.stops.empty()) continue;
    if (r.depot != current_depot) {
      trace.push_back(r.depot);
      current_depot = r.depot;
    }
    for (int v : r.stops) trace.push_back(v);
    trace.push_back(r.depot);
  }
  if (trace.empty() && inst.m() > 0) trace.push_back(0);
  return trace;
}

}  // namespace lrgen
