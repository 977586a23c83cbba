#pragma once

// Problem data model: customers, depot candidates, fleet, instance sampling.
//
// Vertex indexing convention used everywhere: depots occupy indices 0..m-1,
// customers m..m+n-1.

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "core.hpp"

namespace lrgen {

struct Position {
  double x = 0.0;
  double y = 0.0;
};

[[nodiscard]] inline double distance(const Position& a, const Position& b) {
  return std::hypot(a.x - b.x, a.y - b.y);
}

struct Customer {
  Position pos;
  double demand = 0.0;
};

struct DepotCandidate {
  Position pos;
  double max_supply = 0.0;   // desired maximum supply, soft constraint
  double opening_cost = 0.0;
};

struct FleetConfig {
  double capacity = 0.0;    // per-vehicle hard capacity
  double setup_cost = 0.0;  // per-vehicle fixed cost
};

// A set of bare depot positions (no supply/opening attributes); produced by
// the generative model and consumed by cost_gen / the placement oracle.
struct DepotSet {
  std::vector<Position> positions;
};

struct Instance {
  std::vector<Customer> customers;
  std::vector<DepotCandidate> depots;  // may be empty for depot-free graphs
  FleetConfig fleet;

  [[nodiscard]] int n() const { return static_cast<int>(customers.size()); }
  [[nodiscard]] int m() const { return static_cast<int>(depots.size()); }
  [[nodiscard]] int vertex_count() const { return n() + m(); }
  [[nodiscard]] bool is_depot(int v) const { return v < m(); }

  [[nodiscard]] const Position& vertex_pos(int v) const {
    return v < m() ? depots[v].pos : customers[v - m()].pos;
  }
  // Demand of a customer vertex (index must be >= m).
  [[nodiscard]] double demand_of(int v) const {
    return customers[v - m()].demand;
  }
  [[nodiscard]] double total_demand() const {
    double s = 0.0;
    for (const auto& c : customers) s += c.demand;
    return s;
  }
};

struct ScalePreset {
  int n = 20;
  int m = 3;
  double capacity = 30.0;
  double supply_min = 50.0, supply_max = 80.0;
  double opening_min = 2.0, opening_max = 5.0;
  double demand_min = 0.0, demand_max = 10.0;
  double setup_cost = 0.3;

  [[nodiscard]] bool valid() const {
    return n >= 1 && m >= 0 && capacity > 0 && supply_min < supply_max &&
           opening_min < opening_max && demand_min < demand_max &&
           demand_max <= capacity && setup_cost >= 0;
  }
};

// The three published problem scales.
inline ScalePreset preset_small() { return {20, 3, 30.0, 50, 80, 2, 5, 0, 10, 0.3}; }
inline ScalePreset preset_medium() { return {50, 6, 40.0, 80, 120, 2, 5, 0, 10, 0.3}; }
inline ScalePreset preset_large() { return {100, 9, 50.0, 120, 170, 12, 19, 0, 10, 0.3}; }

// Custom (n, m) at the small scale's capacity and cost ranges.
inline ScalePreset make_preset(int n, int m) {
  ScalePreset p = preset_small();
  p.n = n;
  p.m = m;
  return p;
}

inline Instance sample_instance(const ScalePreset& p, std::uint64_t seed) {
  if (!p.valid()) throw Error("invalid scale preset");
  auto rng = make_rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto in = [&](double lo, double hi) { return lo + (hi - lo) * unit(rng); };

  Instance inst;
  inst.fleet = {p.capacity, p.setup_cost};
  inst.customers.resize(p.n);
  for (auto& c : inst.customers) {
    c.pos = {unit(rng), unit(rng)};
    c.demand = in(p.demand_min, p.demand_max);
  }
  inst.depots.resize(p.m);
  for (auto& d : inst.depots) {
    d.pos = {unit(rng), unit(rng)};
    d.max_supply = in(p.supply_min, p.supply_max);
    d.opening_cost = in(p.opening_min, p.opening_max);
  }
  return inst;
}

// Depot-free variant for generative-model training graphs.
inline Instance sample_customer_graph(const ScalePreset& p, std::uint64_t seed) {
  Instance inst = sample_instance(p, seed);
  inst.depots.clear();
  return inst;
}

struct DistanceMatrix {
  int size = 0;
  std::vector<double> d;  // row-major size x size

  [[nodiscard]] double operator()(int i, int j) const {
    return d[static_cast<std::size_t>(i) * size + j];
  }
};

inline DistanceMatrix distance_matrix(const Instance& inst) {
  const int v = inst.vertex_count();
  DistanceMatrix mat{v, std::vector<double>(static_cast<std::size_t>(v) * v, 0.0)};
  for (int i = 0; i < v; ++i)
    for (int j = i + 1; j < v; ++j) {
      const double dij = distance(inst.vertex_pos(i), inst.vertex_pos(j));
      mat.d[static_cast<std::size_t>(i) * v + j] = dij;
      mat.d[static_cast<std::size_t>(j) * v + i] = dij;
    }
  return mat;
}

}  // namespace lrgen
