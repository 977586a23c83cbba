#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>

#include <lrgen/cost.hpp>
#include <lrgen/heuristics.hpp>
#include <lrgen/oracle.hpp>
#include <lrgen/split.hpp>

using namespace lrgen;

namespace {

double plan_total(const RoutePlan& plan, const Instance& inst,
                  const CostCoefficients& co) {
  return cost_sel(plan, inst, co).total;
}

}  // namespace

TEST_CASE("oracle finds the hand-checkable optimum") {
  // One depot at the origin, two customers stacked on the x axis. Serving
  // both in one trip (0 -> c1 -> c2 -> 0, length 0.2+0.2+0.4) beats two
  // out-and-backs (0.4 + 0.8) and the depot/vehicle terms are fixed.
  Instance inst;
  inst.fleet = {30.0, 0.3};
  inst.depots.push_back({{0.0, 0.0}, 50.0, 2.0});
  inst.customers.push_back({{0.2, 0.0}, 5.0});
  inst.customers.push_back({{0.4, 0.0}, 5.0});
  const OracleResult res = brute_force(inst, {});
  CHECK(res.best_cost.route_length == Catch::Approx(0.8).margin(1e-12));
  CHECK(res.best_cost.vehicles_used == 1);
  CHECK(res.best_cost.total == Catch::Approx(0.8 + 2.0 + 0.3).margin(1e-12));
  REQUIRE(res.best_plan.routes.size() == 1);
  CHECK(res.best_plan.routes[0].stops.size() == 2);
  CHECK(res.states_explored > 0);
}

TEST_CASE("oracle splits routes when capacity forces it") {
  Instance inst;
  inst.fleet = {8.0, 0.0};
  inst.depots.push_back({{0.0, 0.0}, 50.0, 0.0});
  inst.customers.push_back({{0.1, 0.0}, 5.0});
  inst.customers.push_back({{0.2, 0.0}, 5.0});  // 10 > 8, must split
  const OracleResult res = brute_force(inst, {});
  CHECK(res.best_cost.vehicles_used == 2);
  CHECK(res.best_cost.route_length == Catch::Approx(0.6).margin(1e-12));
}

TEST_CASE("oracle refuses oversized enumerations") {
  const Instance big = sample_instance(make_preset(9, 2), 1);
  CHECK_THROWS_AS(brute_force(big, {}), TooLarge);
  const Instance small = sample_instance(make_preset(4, 2), 1);
  CHECK_THROWS_AS(brute_force(small, {}, 3), TooLarge);  // absurd limit
}

TEST_CASE("heuristics are deterministic given the seed") {
  const Instance inst = sample_instance(make_preset(10, 2), 5);
  const CostCoefficients co;
  AlnsParams ap;
  ap.iterations = 400;
  const RoutePlan a1 = solve_alns(inst, co, ap, 11);
  const RoutePlan a2 = solve_alns(inst, co, ap, 11);
  CHECK(plan_total(a1, inst, co) == plan_total(a2, inst, co));
  CHECK(a1.routes.size() == a2.routes.size());

  GaParams gp;
  gp.generations = 60;
  const RoutePlan g1 = solve_ga(inst, co, gp, 11);
  const RoutePlan g2 = solve_ga(inst, co, gp, 11);
  CHECK(plan_total(g1, inst, co) == plan_total(g2, inst, co));

  TsParams tp;
  tp.iterations = 400;
  const RoutePlan t1 = solve_ts(inst, co, tp, 11);
  const RoutePlan t2 = solve_ts(inst, co, tp, 11);
  CHECK(plan_total(t1, inst, co) == plan_total(t2, inst, co));
}

TEST_CASE("every heuristic returns valid plans across sizes") {
  std::mt19937_64 seeds = make_rng(42);
  const CostCoefficients co;
  for (int rep = 0; rep < 6; ++rep) {
    const Instance inst =
        sample_instance(make_preset(6 + 4 * (rep % 3), 1 + rep % 3), seeds());
    AlnsParams ap;
    ap.iterations = 300;
    GaParams gp;
    gp.generations = 40;
    TsParams tp;
    tp.iterations = 300;
    CHECK(validate(solve_alns(inst, co, ap, rep), inst).ok);
    CHECK(validate(solve_ga(inst, co, gp, rep), inst).ok);
    CHECK(validate(solve_ts(inst, co, tp, rep), inst).ok);
  }
}

TEST_CASE("heuristics never beat the oracle and ALNS stays close") {
  std::mt19937_64 seeds = make_rng(77);
  const CostCoefficients co;
  int alns_close = 0;
  const int cases = 12;
  for (int rep = 0; rep < cases; ++rep) {
    const Instance inst = sample_instance(make_preset(6, 2), seeds());
    const double opt = brute_force(inst, co).best_cost.total;

    AlnsParams ap;
    ap.iterations = 2000;
    const double alns = plan_total(solve_alns(inst, co, ap, rep), inst, co);
    GaParams gp;
    gp.generations = 150;
    const double ga = plan_total(solve_ga(inst, co, gp, rep), inst, co);
    TsParams tp;
    tp.iterations = 2000;
    const double ts = plan_total(solve_ts(inst, co, tp, rep), inst, co);

    CHECK(alns >= opt - 1e-9);
    CHECK(ga >= opt - 1e-9);
    CHECK(ts >= opt - 1e-9);
    if (alns <= opt * 1.05 + 1e-9) ++alns_close;
  }
  CHECK(alns_close >= cases - 2);
}

TEST_CASE("incumbent traces are monotone nonincreasing") {
  const Instance inst = sample_instance(make_preset(10, 2), 13);
  const CostCoefficients co;
  std::vector<double> trace;

  AlnsParams ap;
  ap.iterations = 500;
  ap.best_trace = &trace;
  solve_alns(inst, co, ap, 3);
  REQUIRE_FALSE(trace.empty());
  for (std::size_t i = 1; i < trace.size(); ++i)
    CHECK(trace[i] <= trace[i - 1] + 1e-12);

  trace.clear();
  TsParams tp;
  tp.iterations = 500;
  tp.best_trace = &trace;
  solve_ts(inst, co, tp, 3);
  REQUIRE_FALSE(trace.empty());
  for (std::size_t i = 1; i < trace.size(); ++i)
    CHECK(trace[i] <= trace[i - 1] + 1e-12);

  trace.clear();
  GaParams gp;
  gp.generations = 60;
  gp.best_trace = &trace;
  solve_ga(inst, co, gp, 3);
  REQUIRE_FALSE(trace.empty());
  for (std::size_t i = 1; i < trace.size(); ++i)
    CHECK(trace[i] <= trace[i - 1] + 1e-12);
}

TEST_CASE("giant-tour split is optimal for a fixed tour") {
  // Check the DP against brute-force segmentation of a short tour.
  std::mt19937_64 seeds = make_rng(55);
  const CostCoefficients co;
  for (int rep = 0; rep < 10; ++rep) {
    const Instance inst = sample_instance(make_preset(6, 2), seeds());
    std::vector<int> tour;
    for (int j = inst.m(); j < inst.vertex_count(); ++j) tour.push_back(j);
    std::shuffle(tour.begin(), tour.end(), seeds);

    const RoutePlan got = split_giant_tour(tour, inst, co);
    REQUIRE(validate(got, inst).ok);
    // Split objective: length plus per-vehicle setup (opening/supply excluded).
    auto split_cost = [&](const RoutePlan& p) {
      double c = 0.0;
      for (const Route& r : p.routes)
        if (!r.stops.empty())
          c += route_polyline_length(r, inst) + co.beta * inst.fleet.setup_cost;
      return c;
    };

    // Enumerate all 2^(n-1) segmentations, each segment at its best depot.
    const int n = inst.n();
    double best = std::numeric_limits<double>::infinity();
    for (int mask = 0; mask < (1 << (n - 1)); ++mask) {
      RoutePlan plan;
      std::vector<int> seg;
      bool feasible = true;
      auto flush = [&] {
        double load = 0.0;
        for (int v : seg) load += inst.demand_of(v);
        if (load > inst.fleet.capacity) {
          feasible = false;
          return;
        }
        double best_d = std::numeric_limits<double>::infinity();
        int best_k = 0;
        for (int k = 0; k < inst.m(); ++k) {
          Route r{k, seg, load};
          const double len = route_polyline_length(r, inst);
          if (len < best_d) {
            best_d = len;
            best_k = k;
          }
        }
        plan.routes.push_back({best_k, seg, load});
        seg.clear();
      };
      for (int i = 0; i < n; ++i) {
        seg.push_back(tour[i]);
        if (i < n - 1 && (mask >> i & 1)) flush();
        if (!feasible) break;
      }
      if (feasible) flush();
      if (!feasible) continue;
      best = std::min(best, split_cost(plan));
    }
    CHECK(split_cost(got) == Catch::Approx(best).margin(1e-9));
  }
}
