#include <catch2/catch_amalgamated.hpp>

#include <lrgen/core.hpp>
#include <lrgen/instance.hpp>

using namespace lrgen;

TEST_CASE("scale presets carry the published sizes and ranges") {
  const ScalePreset s = preset_small();
  CHECK(s.n == 20);
  CHECK(s.m == 3);
  CHECK(s.capacity == 30.0);
  CHECK(s.supply_min == 50.0);
  CHECK(s.supply_max == 80.0);
  CHECK(s.opening_min == 2.0);
  CHECK(s.opening_max == 5.0);

  const ScalePreset md = preset_medium();
  CHECK(md.n == 50);
  CHECK(md.m == 6);
  CHECK(md.capacity == 40.0);
  CHECK(md.supply_min == 80.0);
  CHECK(md.supply_max == 120.0);

  const ScalePreset lg = preset_large();
  CHECK(lg.n == 100);
  CHECK(lg.m == 9);
  CHECK(lg.capacity == 50.0);
  CHECK(lg.supply_min == 120.0);
  CHECK(lg.supply_max == 170.0);
  CHECK(lg.opening_min == 12.0);
  CHECK(lg.opening_max == 19.0);

  for (const ScalePreset& p : {s, md, lg}) {
    CHECK(p.valid());
    CHECK(p.demand_min == 0.0);
    CHECK(p.demand_max == 10.0);
    CHECK(p.setup_cost == 0.3);
  }
}

TEST_CASE("make_preset overrides the size at small-scale ranges") {
  const ScalePreset p = make_preset(7, 2);
  CHECK(p.n == 7);
  CHECK(p.m == 2);
  CHECK(p.capacity == preset_small().capacity);
  CHECK(p.supply_max == preset_small().supply_max);
}

TEST_CASE("sampled instances respect the preset ranges") {
  const ScalePreset p = preset_medium();
  for (std::uint64_t seed : {1ull, 2ull, 77ull}) {
    const Instance inst = sample_instance(p, seed);
    REQUIRE(inst.n() == p.n);
    REQUIRE(inst.m() == p.m);
    CHECK(inst.vertex_count() == p.n + p.m);
    CHECK(inst.fleet.capacity == p.capacity);
    CHECK(inst.fleet.setup_cost == p.setup_cost);
    for (const Customer& c : inst.customers) {
      CHECK(c.pos.x >= 0.0);
      CHECK(c.pos.x <= 1.0);
      CHECK(c.pos.y >= 0.0);
      CHECK(c.pos.y <= 1.0);
      CHECK(c.demand >= p.demand_min);
      CHECK(c.demand <= p.demand_max);
    }
    for (const DepotCandidate& d : inst.depots) {
      CHECK(d.pos.x >= 0.0);
      CHECK(d.pos.x <= 1.0);
      CHECK(d.max_supply >= p.supply_min);
      CHECK(d.max_supply <= p.supply_max);
      CHECK(d.opening_cost >= p.opening_min);
      CHECK(d.opening_cost <= p.opening_max);
    }
  }
}

TEST_CASE("sampling is deterministic in the seed") {
  const ScalePreset p = preset_small();
  const Instance a = sample_instance(p, 42);
  const Instance b = sample_instance(p, 42);
  const Instance c = sample_instance(p, 43);
  REQUIRE(a.n() == b.n());
  bool identical = true, differs = false;
  for (int i = 0; i < a.n(); ++i) {
    identical = identical && a.customers[i].pos.x == b.customers[i].pos.x &&
                a.customers[i].demand == b.customers[i].demand;
    differs = differs || a.customers[i].pos.x != c.customers[i].pos.x;
  }
  CHECK(identical);
  CHECK(differs);
}

TEST_CASE("vertex indexing maps depots before customers") {
  const Instance inst = sample_instance(make_preset(4, 2), 9);
  CHECK(inst.is_depot(0));
  CHECK(inst.is_depot(1));
  CHECK_FALSE(inst.is_depot(2));
  CHECK(inst.vertex_pos(0).x == inst.depots[0].pos.x);
  CHECK(inst.vertex_pos(1).y == inst.depots[1].pos.y);
  CHECK(inst.vertex_pos(2).x == inst.customers[0].pos.x);
  CHECK(inst.vertex_pos(5).y == inst.customers[3].pos.y);
  CHECK(inst.demand_of(3) == inst.customers[1].demand);

  double sum = 0.0;
  for (const Customer& c : inst.customers) sum += c.demand;
  CHECK(inst.total_demand() == Catch::Approx(sum).epsilon(1e-12));
}

TEST_CASE("customer graphs have no depots but share customer sampling") {
  const ScalePreset p = make_preset(6, 3);
  const Instance full = sample_instance(p, 5);
  const Instance graph = sample_customer_graph(p, 5);
  REQUIRE(graph.m() == 0);
  REQUIRE(graph.n() == 6);
  for (int i = 0; i < 6; ++i) {
    CHECK(graph.customers[i].pos.x == full.customers[i].pos.x);
    CHECK(graph.customers[i].demand == full.customers[i].demand);
  }
}

TEST_CASE("invalid presets are rejected") {
  ScalePreset p = preset_small();
  p.n = 0;
  CHECK_FALSE(p.valid());
  CHECK_THROWS_AS(sample_instance(p, 1), Error);
}

TEST_CASE("distance matrix matches pairwise distances") {
  const Instance inst = sample_instance(make_preset(5, 2), 11);
  const DistanceMatrix dm = distance_matrix(inst);
  for (int i = 0; i < inst.vertex_count(); ++i) {
    CHECK(dm(i, i) == 0.0);
    for (int j = 0; j < inst.vertex_count(); ++j) {
      CHECK(dm(i, j) == Catch::Approx(dm(j, i)).margin(0));
      CHECK(dm(i, j) ==
            Catch::Approx(distance(inst.vertex_pos(i), inst.vertex_pos(j)))
                .margin(1e-15));
    }
  }
}

TEST_CASE("seed streams decorrelate and reproduce") {
  auto a1 = make_rng(1, 7);
  auto a2 = make_rng(1, 7);
  auto b = make_rng(1, 8);
  CHECK(a1() == a2());
  CHECK(make_rng(1, 7)() != b());
  CHECK(mix_seed(0) != 0);
}

TEST_CASE("hex64 zero-pads to sixteen digits") {
  CHECK(hex64(0) == "0000000000000000");
  CHECK(hex64(0xabcull) == "0000000000000abc");
}
