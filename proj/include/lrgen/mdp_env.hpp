#pragma once

// Batch MDP environment for multi-depot route construction: state tracking,
// the four-pattern feasibility mask, step transitions, termination.

#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <utility>
#include <vector>

#include "core.hpp"
#include "instance.hpp"

namespace lrgen {

struct EnvState {
  int current_vertex = 0;
  int departure_depot = 0;
  double remaining_load = 0.0;
  // Per-vertex flag, 1 = unvisited. A depot is marked visited (0) when it
  // becomes the departure depot; a departed-from depot is never reselectable
  // as a fresh departure.
  std::vector<std::uint8_t> visit_record;
  bool done = false;
};

struct StepOutcome {
  double cost_increment = 0.0;
  double transition_prob = 1.0;  // 1.0 for heuristic/forced moves
  EnvState new_state;
};

struct BatchMask {
  int batch = 0;
  int actions = 0;                    // m + n
  std::vector<std::uint8_t> masked;   // row-major, 1 = infeasible

  [[nodiscard]] bool at(int b, int a) const {
    return masked[static_cast<std::size_t>(b) * actions + a] != 0;
  }
  [[nodiscard]] const std::uint8_t* row(int b) const {
    return masked.data() + static_cast<std::size_t>(b) * actions;
  }
  [[nodiscard]] std::uint8_t* row(int b) {
    return masked.data() + static_cast<std::size_t>(b) * actions;
  }
};

// Seed the environment at an arbitrary start depot. Rollouts always begin at
// depot 0; replaying a plan-derived trace begins at the plan's first depot.
inline EnvState reset_at(const Instance& inst, int depot) {
  if (inst.m() < 1) throw InfeasibleInstance("instance has no depots");
  invariant(depot >= 0 && depot < inst.m(), "reset depot out of range");
  for (const auto& c : inst.customers)
    if (c.demand > inst.fleet.capacity)
      throw InfeasibleInstance("customer demand exceeds vehicle capacity");
  EnvState s;
  s.current_vertex = depot;
  s.departure_depot = depot;
  s.remaining_load = inst.fleet.capacity;
  s.visit_record.assign(inst.vertex_count(), 1);
  s.visit_record[depot] = 0;
  s.done = false;
  return s;
}

inline EnvState reset(const Instance& inst) { return reset_at(inst, 0); }

namespace detail {

// Mask fill over a batch slice sharing one shape (m, n); instance data may
// vary per row. The pattern logic is whole-array boolean algebra over the
// batch: row flags are column reductions, entries combine those flags with
// the visit record — no per-row branching into pattern cases.
inline void fill_mask(std::span<const EnvState> states,
                      const std::function<const Instance&(int)>& inst_of,
                      BatchMask& mask) {
  const int batch = static_cast<int>(states.size());
  if (batch == 0) return;
  const int m = inst_of(0).m();
  const int total = inst_of(0).vertex_count();
  invariant(mask.actions == total, "mask width mismatch");

  // Row flag arrays.
  std::vector<std::uint8_t> at_depot(batch), tasks_left(batch);
  for (int b = 0; b < batch; ++b) {
    const EnvState& s = states[b];
    invariant(static_cast<int>(s.visit_record.size()) == total,
              "state inconsistent with instance");
    at_depot[b] = s.current_vertex < m ? 1 : 0;
    std::uint8_t any = 0;
    for (int j = m; j < total; ++j) any |= s.visit_record[j];
    tasks_left[b] = any;
  }

  // Customer block: unmasked iff unserved, fits remaining load, row active.
  for (int b = 0; b < batch; ++b) {
    const EnvState& s = states[b];
    const Instance& inst = inst_of(b);
    std::uint8_t* row = mask.row(b);
    const std::uint8_t active = s.done ? 0 : 1;
    for (int j = m; j < total; ++j) {
      const std::uint8_t ok =
          active & s.visit_record[j] &
          (inst.demand_of(j) <= s.remaining_load ? 1 : 0);
      row[j] = static_cast<std::uint8_t>(1 - ok);
    }
  }

  // Depot block:
  //   at depot, none left  -> only the current depot (terminal self-loop);
  //   at depot, tasks left -> unplanned depots (record still 1), which
  //                           excludes every departed-from depot;
  //   at customer          -> only the departure depot.
  for (int b = 0; b < batch; ++b) {
    const EnvState& s = states[b];
    std::uint8_t* row = mask.row(b);
    const std::uint8_t dep = at_depot[b], left = tasks_left[b];
    for (int j = 0; j < m; ++j) {
      const std::uint8_t ok = static_cast<std::uint8_t>(
          (dep & static_cast<std::uint8_t>(!left) &
           (j == s.current_vertex ? 1 : 0)) |
          (dep & left & s.visit_record[j]) |
          (static_cast<std::uint8_t>(!dep) &
           (j == s.departure_depot ? 1 : 0)));
      row[j] = static_cast<std::uint8_t>(1 - ok);
    }
  }

  // A fully-masked live row is a mask-logic bug, never a user error.
  for (int b = 0; b < batch; ++b) {
    if (states[b].done) continue;
    const std::uint8_t* row = mask.row(b);
    bool any = false;
    for (int j = 0; j < total && !any; ++j) any = row[j] == 0;
    if (!any) invariant_failure("all actions masked in a non-done state");
  }
}

}  // namespace detail

inline BatchMask compute_mask(std::span<const EnvState> states,
                              const Instance& inst) {
  BatchMask mask{static_cast<int>(states.size()), inst.vertex_count(), {}};
  mask.masked.assign(static_cast<std::size_t>(mask.batch) * mask.actions, 1);
  detail::fill_mask(states, [&](int) -> const Instance& { return inst; }, mask);
  return mask;
}

// Batch over distinct instances sharing (n, m), e.g. a training batch.
inline BatchMask compute_mask(std::span<const EnvState> states,
                              std::span<const Instance> insts) {
  invariant(states.size() == insts.size(), "batch size mismatch");
  BatchMask mask{static_cast<int>(states.size()),
                 insts.empty() ? 0 : insts[0].vertex_count(), {}};
  mask.masked.assign(static_cast<std::size_t>(mask.batch) * mask.actions, 1);
  detail::fill_mask(states, [&](int b) -> const Instance& { return insts[b]; },
                    mask);
  return mask;
}

inline StepOutcome step(const EnvState& state, int action,
                        const Instance& inst) {
  const BatchMask mask = compute_mask(std::span(&state, 1), inst);
  if (action < 0 || action >= mask.actions || mask.at(0, action))
    throw MaskedAction("action " + std::to_string(action) + " is masked");

  const int m = inst.m();
  StepOutcome out;
  out.new_state = state;
  EnvState& s = out.new_state;

  const bool depot_hop = inst.is_depot(state.current_vertex) && action < m;
  out.cost_increment =
      depot_hop ? 0.0
                : distance(inst.vertex_pos(state.current_vertex),
                           inst.vertex_pos(action));

  if (action < m) {
    s.remaining_load = inst.fleet.capacity;  // capacity refreshed at depots
    if (action != s.departure_depot) {
      s.departure_depot = action;
      s.visit_record[action] = 0;  // planned: no longer a fresh departure
    }
  } else {
    s.remaining_load -= inst.demand_of(action);
    invariant(s.remaining_load >= 0, "remaining load went negative");
    s.visit_record[action] = 0;
  }
  s.current_vertex = action;

  bool served = true;
  for (int j = m; j < inst.vertex_count(); ++j)
    served = served && s.visit_record[j] == 0;
  s.done = served && action < m;
  return out;
}

// Action selector: given the state and its mask row, returns the chosen
// action and its probability (1.0 for deterministic selectors).
using Policy = std::function<std::pair<int, double>(
    const EnvState&, std::span<const std::uint8_t>, std::mt19937_64&)>;

struct RolloutResult {
  std::vector<int> trace;        // full vertex sequence, trace[0] = start depot
  std::vector<double> probs;     // one per action taken
  double total_cost = 0.0;       // accumulated cost increments
};

inline RolloutResult rollout(const Instance& inst, const Policy& policy,
                             std::uint64_t seed) {
  auto rng = make_rng(seed);
  EnvState state = reset(inst);
  RolloutResult res;
  res.trace.push_back(state.current_vertex);
  const int guard = 2 * (inst.n() + 2 * inst.m()) + 8;
  for (int t = 0; t < guard && !state.done; ++t) {
    const BatchMask mask = compute_mask(std::span(&state, 1), inst);
    auto [action, prob] = policy(
        state, std::span(mask.row(0), static_cast<std::size_t>(mask.actions)),
        rng);
    StepOutcome out = step(state, action, inst);
    res.trace.push_back(action);
    res.probs.push_back(prob);
    res.total_cost += out.cost_increment;
    state = std::move(out.new_state);
  }
  invariant(state.done, "rollout failed to terminate within the step guard");
  return res;
}

// Replays a full vertex sequence from its starting depot, checking every
// action against the mask; returns the accumulated cost.
inline double replay_trace(std::span<const int> trace, const Instance& inst) {
  if (trace.empty() || trace[0] >= inst.m())
    throw MalformedTrace("trace does not start at a depot");
  EnvState state = reset_at(inst, trace[0]);
  double total = 0.0;
  for (std::size_t i = 1; i < trace.size(); ++i) {
    StepOutcome out = step(state, trace[i], inst);  // throws MaskedAction
    total += out.cost_increment;
    state = std::move(out.new_state);
  }
  return total;
}

// Uniform choice over unmasked actions; the canonical stress-test policy.
inline Policy random_policy() {
  return [](const EnvState&, std::span<const std::uint8_t> mask,
            std::mt19937_64& rng) -> std::pair<int, double> {
    int count = 0;
    for (std::uint8_t v : mask) count += v == 0;
    invariant(count > 0, "random policy saw a fully masked row");
    std::uniform_int_distribution<int> pick(0, count - 1);
    int target = pick(rng);
    for (int j = 0; j < static_cast<int>(mask.size()); ++j) {
      if (mask[j] == 0 && target-- == 0) return {j, 1.0 / count};
    }
    invariant_failure("unreachable: unmasked action not found");
  };
}

// Deterministic nearest-feasible-neighbor selector; prefers customers over
// route closure while any remain feasible. The instance must outlive the
// returned policy.
inline Policy nearest_feasible_policy(const Instance& inst) {
  const Instance* ip = &inst;
  return [ip](const EnvState& s, std::span<const std::uint8_t> mask,
              std::mt19937_64&) -> std::pair<int, double> {
    const Position& here = ip->vertex_pos(s.current_vertex);
    int best = -1;
    double best_d = 0.0;
    bool best_is_cust = false;
    for (int j = 0; j < static_cast<int>(mask.size()); ++j) {
      if (mask[j]) continue;
      const bool cust = !ip->is_depot(j);
      const double dj = distance(here, ip->vertex_pos(j));
      if (best < 0 || (cust && !best_is_cust) ||
          (cust == best_is_cust && dj < best_d)) {
        best = j;
        best_d = dj;
        best_is_cust = cust;
      }
    }
    invariant(best >= 0, "nearest policy saw a fully masked row");
    return {best, 1.0};
  };
}

}  // namespace lrgen
