#pragma once

// The three training procedures. Policy training is REINFORCE with a frozen
// greedy-rollout baseline refreshed through a one-sided paired t-test.
// Generator training comes in two modes: score-function over sampled depot
// sets (Gaussian head) and pathwise through the frozen policy's fixed routes
// (exact head). Balance fine-tuning reruns the policy loop under the
// balance-augmented objective.

#include <cmath>
#include <cstdint>
#include <functional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "cost.hpp"
#include "dgm.hpp"
#include "instance.hpp"
#include "mdlram.hpp"
#include "neural/optimizer.hpp"
#include "stats.hpp"

namespace lrgen {

struct TrainConfig {
  int epochs = 3;
  int batches_per_epoch = 300;
  int batch = 64;       // policy-gradient batch
  int main_batch = 8;   // generator: customer graphs per batch
  int sub_batch = 16;   // generator: depot sets per graph (Gaussian mode)
  int sampling_k = 1280;
  float lr = 1e-4f;
  float clip_norm = 1.0f;
  int eval_interval = 100;  // batches between baseline significance tests
  int eval_batches = 4;     // evaluation set = eval_batches * batch instances
  std::uint64_t seed = 1;
  bool center_scores = false;  // optional sub-batch mean baseline (Gaussian)
  double p_threshold = 0.05;

  [[nodiscard]] bool valid() const {
    return epochs >= 1 && batches_per_epoch >= 1 && batch >= 1 &&
           main_batch >= 1 && sub_batch >= 1 && sampling_k >= 1 && lr > 0 &&
           eval_interval >= 1 && eval_batches >= 1;
  }
};

struct TrainLogEntry {
  int epoch = 0;
  int batch = 0;              // 1-based within the run
  double mean_cost = 0.0;     // mean training objective this batch
  double mean_length = 0.0;
  double mean_depot_cost = 0.0;
  double mean_vehicle_cost = 0.0;
  double mean_supply_penalty = 0.0;
  double grad_norm = 0.0;
  double p_value = -1.0;      // set at evaluation points, else -1
  bool baseline_updated = false;
};

using TrainLog = std::vector<TrainLogEntry>;

inline void write_log_line(std::ostream& os, const TrainLogEntry& e) {
  os << "epoch=" << e.epoch << " batch=" << e.batch << " cost=" << e.mean_cost
     << " len=" << e.mean_length << " dep=" << e.mean_depot_cost
     << " veh=" << e.mean_vehicle_cost << " pen=" << e.mean_supply_penalty
     << " gnorm=" << e.grad_norm;
  if (e.p_value >= 0)
    os << " p=" << e.p_value << " baseline=" << (e.baseline_updated ? 1 : 0);
  os << "\n";
}

// Plan-level objective used for advantages and evaluation.
using PlanObjective =
    std::function<double(const RoutePlan&, const Instance&)>;

inline PlanObjective selection_objective(const CostCoefficients& co) {
  return [co](const RoutePlan& plan, const Instance& inst) {
    return cost_sel(plan, inst, co).total;
  };
}

inline PlanObjective balanced_objective(const CostCoefficients& co,
                                        std::vector<double> rho) {
  return [co, rho = std::move(rho)](const RoutePlan& plan,
                                    const Instance& inst) {
    return cost_balanced(plan, inst, co, rho);
  };
}

// Greedy-decoded plans over an instance set, processed in bounded chunks.
inline std::vector<RoutePlan> greedy_plans(MdlramParams& params,
                                           std::span<const Instance> insts,
                                           const CostCoefficients& co) {
  std::vector<RoutePlan> out;
  out.reserve(insts.size());
  std::mt19937_64 rng = make_rng(0);
  const std::size_t chunk = 256;
  for (std::size_t i = 0; i < insts.size(); i += chunk) {
    const std::size_t len = std::min(chunk, insts.size() - i);
    RolloutBatch r = mdlram_rollout(params, insts.subspan(i, len), co,
                                    DecodeMode::greedy, false, rng);
    for (auto& p : r.plans) out.push_back(std::move(p));
  }
  return out;
}

inline std::vector<double> greedy_objective_values(
    MdlramParams& params, std::span<const Instance> insts,
    const CostCoefficients& co, const PlanObjective& objective) {
  const std::vector<RoutePlan> plans = greedy_plans(params, insts, co);
  std::vector<double> out(insts.size());
  for (std::size_t i = 0; i < insts.size(); ++i)
    out[i] = objective(plans[i], insts[i]);
  return out;
}

struct ReinforceOutcome {
  TrainLog log;
  double eval_before = 0.0;  // mean greedy objective on the fixed eval set
  double eval_after = 0.0;
  std::vector<Instance> eval_set;
};

// Shared REINFORCE loop; `params` is trained in place, the baseline starts
// as a frozen copy of the incoming parameters.
inline ReinforceOutcome train_reinforce(MdlramParams& params,
                                        const TrainConfig& cfg,
                                        const ScalePreset& preset,
                                        const CostCoefficients& co,
                                        const PlanObjective& objective,
                                        std::ostream* log_stream = nullptr) {
  if (!cfg.valid()) throw Error("invalid training configuration");
  MdlramParams baseline = params;
  nn::Adam opt({cfg.lr, 0.9f, 0.999f, 1e-8f, cfg.clip_norm});
  const std::vector<nn::Param*> plist = params.param_list();

  ReinforceOutcome out;
  std::mt19937_64 eval_rng = make_rng(cfg.seed, 501);
  const int eval_size = cfg.eval_batches * cfg.batch;
  out.eval_set.reserve(eval_size);
  for (int i = 0; i < eval_size; ++i)
    out.eval_set.push_back(sample_instance(preset, eval_rng()));
  {
    const auto costs =
        greedy_objective_values(params, out.eval_set, co, objective);
    double s = 0.0;
    for (double c : costs) s += c;
    out.eval_before = s / double(costs.size());
  }

  std::mt19937_64 seed_rng = make_rng(cfg.seed, 502);
  int batch_index = 0;
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    for (int bi = 0; bi < cfg.batches_per_epoch; ++bi) {
      ++batch_index;
      std::vector<Instance> insts;
      insts.reserve(cfg.batch);
      for (int i = 0; i < cfg.batch; ++i)
        insts.push_back(sample_instance(preset, seed_rng()));

      std::mt19937_64 roll_rng = make_rng(cfg.seed, 1000 + batch_index);
      RolloutBatch pol = mdlram_rollout(params, insts, co, DecodeMode::sample,
                                        true, roll_rng);
      std::mt19937_64 base_rng = make_rng(0);
      RolloutBatch base = mdlram_rollout(baseline, insts, co,
                                         DecodeMode::greedy, false, base_rng);

      nn::Tensor adv(cfg.batch, 1);
      TrainLogEntry entry;
      entry.epoch = epoch;
      entry.batch = batch_index;
      for (int i = 0; i < cfg.batch; ++i) {
        const double pc = objective(pol.plans[i], insts[i]);
        const double bc = objective(base.plans[i], insts[i]);
        adv.at(i, 0) = float(pc - bc);
        entry.mean_cost += pc;
        const CostBreakdown cb = cost_sel(pol.plans[i], insts[i], co);
        entry.mean_length += cb.route_length;
        entry.mean_depot_cost += cb.depot_cost;
        entry.mean_vehicle_cost += cb.vehicle_cost;
        entry.mean_supply_penalty += cb.supply_penalty;
      }
      entry.mean_cost /= cfg.batch;
      entry.mean_length /= cfg.batch;
      entry.mean_depot_cost /= cfg.batch;
      entry.mean_vehicle_cost /= cfg.batch;
      entry.mean_supply_penalty /= cfg.batch;
      if (!std::isfinite(entry.mean_cost))
        throw Error("training diverged: non-finite mean cost");

      nn::Var loss =
          nn::mean_all(nn::mul(nn::constant(std::move(adv)), pol.sum_logp));
      nn::backward(loss);
      opt.step(plist);
      entry.grad_norm = opt.last_grad_norm();

      if (batch_index % cfg.eval_interval == 0) {
        const auto pol_eval =
            greedy_objective_values(params, out.eval_set, co, objective);
        const auto base_eval =
            greedy_objective_values(baseline, out.eval_set, co, objective);
        entry.p_value = paired_t_pvalue(pol_eval, base_eval);
        if (entry.p_value < cfg.p_threshold) {
          baseline = params;
          entry.baseline_updated = true;
        }
      }
      if (log_stream) write_log_line(*log_stream, entry);
      out.log.push_back(entry);
    }
  }
  {
    const auto costs =
        greedy_objective_values(params, out.eval_set, co, objective);
    double s = 0.0;
    for (double c : costs) s += c;
    out.eval_after = s / double(costs.size());
  }
  return out;
}

struct MdlramTrainResult {
  MdlramParams params;
  ReinforceOutcome outcome;
};

inline MdlramTrainResult train_mdlram(const TrainConfig& cfg,
                                      const ScalePreset& preset,
                                      const CostCoefficients& co = {},
                                      std::ostream* log_stream = nullptr) {
  MdlramTrainResult r;
  r.params.init(cfg.seed);
  r.outcome = train_reinforce(r.params, cfg, preset, co,
                              selection_objective(co), log_stream);
  return r;
}

// Balance fine-tuning: same loop, balance-augmented objective, baseline
// re-initialized from the incoming (pre-trained) parameters.
inline ReinforceOutcome finetune_balance(MdlramParams& params,
                                         std::span<const double> rho,
                                         const TrainConfig& cfg,
                                         const ScalePreset& preset,
                                         const CostCoefficients& co = {},
                                         std::ostream* log_stream = nullptr) {
  return train_reinforce(
      params, cfg, preset, co,
      balanced_objective(co, std::vector<double>(rho.begin(), rho.end())),
      log_stream);
}

// ---- generator training -----------------------------------------------------

// Customer graph + bare depot positions -> instance the frozen policy can
// route on. Generated depots carry no opening cost and a supply bound equal
// to the total demand: the generator is scored on route length and spacing
// only.
inline Instance make_critic_instance(const Instance& graph,
                                     const DepotSet& depots) {
  Instance inst;
  inst.customers = graph.customers;
  inst.fleet = graph.fleet;
  const double total = graph.total_demand();
  inst.depots.reserve(depots.positions.size());
  for (const Position& p : depots.positions)
    inst.depots.push_back({p, total, 0.0});
  return inst;
}

[[nodiscard]] inline double plan_route_length(const RoutePlan& plan,
                                              const Instance& inst) {
  double s = 0.0;
  for (const Route& r : plan.routes) s += route_polyline_length(r, inst);
  return s;
}

// Frozen-policy greedy plans for one depot set per graph (graphs may repeat).
inline std::vector<RoutePlan> critic_plans(MdlramParams& frozen,
                                           std::span<const Instance> graphs,
                                           std::span<const DepotSet> sets,
                                           const CostCoefficients& co) {
  invariant(graphs.size() == sets.size(), "one depot set per graph required");
  std::vector<Instance> critic;
  critic.reserve(graphs.size());
  for (std::size_t i = 0; i < graphs.size(); ++i)
    critic.push_back(make_critic_instance(graphs[i], sets[i]));
  return greedy_plans(frozen, critic, co);
}

// L_Gen of each (graph, depot set) pair: frozen-policy route length plus the
// depot spacing penalty.
inline std::vector<double> lgen_scores(MdlramParams& frozen,
                                       std::span<const Instance> graphs,
                                       std::span<const DepotSet> sets,
                                       const CostCoefficients& co) {
  const std::vector<RoutePlan> plans = critic_plans(frozen, graphs, sets, co);
  std::vector<double> out(graphs.size());
  for (std::size_t i = 0; i < graphs.size(); ++i) {
    const Instance critic = make_critic_instance(graphs[i], sets[i]);
    out[i] = cost_gen(sets[i], plan_route_length(plans[i], critic), co);
  }
  return out;
}

struct DgmTrainResult {
  DgmParams params;
  TrainLog log;
};

// Score-function training of the Gaussian head: per graph, draw sub-batch
// depot sets, score them with the frozen policy, and weight the log-density
// gradient by the scores.
inline DgmTrainResult train_dgm_gaussian(const TrainConfig& cfg,
                                         MdlramParams& frozen,
                                         const ScalePreset& preset,
                                         const CostCoefficients& co = {},
                                         std::ostream* log_stream = nullptr) {
  if (!cfg.valid()) throw Error("invalid training configuration");
  invariant(preset.m >= 1, "generator training needs at least one depot");
  const std::uint64_t frozen_hash = frozen.weights_hash();

  DgmTrainResult r;
  r.params.init(preset.m, cfg.seed);
  nn::Adam opt({cfg.lr, 0.9f, 0.999f, 1e-8f, cfg.clip_norm});
  const std::vector<nn::Param*> plist = r.params.param_list();

  std::mt19937_64 seed_rng = make_rng(cfg.seed, 601);
  const int g = cfg.main_batch, rep = cfg.sub_batch, d = 2 * preset.m;
  const int total_batches = cfg.epochs * cfg.batches_per_epoch;
  for (int bi = 1; bi <= total_batches; ++bi) {
    std::vector<Instance> graphs;
    graphs.reserve(g);
    for (int i = 0; i < g; ++i)
      graphs.push_back(sample_customer_graph(preset, seed_rng()));

    nn::Var h = dgm_encode(r.params, graphs, true);
    GaussianHeadOut head = gaussian_head(r.params, h, true);

    nn::Tensor x(g * rep, d);
    std::vector<DepotSet> sets(std::size_t(g) * rep);
    std::vector<Instance> expanded;
    expanded.reserve(std::size_t(g) * rep);
    for (int gi = 0; gi < g; ++gi) {
      const DepotDistribution dist = head.distribution(gi);
      const DepotSamples samples = sample_depots(dist, rep, seed_rng());
      for (int s = 0; s < rep; ++s) {
        const int row = gi * rep + s;
        for (int j = 0; j < d; ++j)
          x.at(row, j) = float(samples.draws[s][j]);
        sets[row] = samples.sets[s];
        expanded.push_back(graphs[gi]);
      }
    }

    std::vector<double> scores = lgen_scores(frozen, expanded, sets, co);
    TrainLogEntry entry;
    entry.epoch = 1 + (bi - 1) / cfg.batches_per_epoch;
    entry.batch = bi;
    for (double s : scores) entry.mean_cost += s;
    entry.mean_cost /= double(scores.size());
    if (!std::isfinite(entry.mean_cost))
      throw Error("training diverged: non-finite mean generation cost");

    if (cfg.center_scores) {
      for (int gi = 0; gi < g; ++gi) {
        double mean = 0.0;
        for (int s = 0; s < rep; ++s) mean += scores[gi * rep + s];
        mean /= rep;
        for (int s = 0; s < rep; ++s) scores[gi * rep + s] -= mean;
      }
    }
    nn::Tensor w(g * rep, 1);
    for (int row = 0; row < g * rep; ++row)
      w.at(row, 0) = float(scores[row]);

    nn::Var lp =
        nn::mvn_log_prob(head.mu, head.ldiag, head.loff, std::move(x), rep);
    nn::Var loss = nn::mean_all(nn::mul(nn::constant(std::move(w)), lp));
    nn::backward(loss);
    opt.step(plist);
    entry.grad_norm = opt.last_grad_norm();
    if (log_stream) write_log_line(*log_stream, entry);
    r.log.push_back(entry);
  }

  invariant(frozen.weights_hash() == frozen_hash,
            "frozen policy parameters changed during generator training");
  return r;
}

// Gradient of the generation objective w.r.t. the flat depot coordinates
// [x0, y0, x1, y1, ...] with the plan's route structure held fixed: each
// nonempty route contributes the two depot-to-endpoint unit vectors, and
// each depot pair outside [l_min, l_max] contributes its spacing pull/push.
inline std::vector<double> depot_coordinate_gradient(
    const Instance& critic, const DepotSet& set, const RoutePlan& plan,
    const CostCoefficients& co) {
  const int m = static_cast<int>(set.positions.size());
  std::vector<double> grad(2 * static_cast<std::size_t>(m), 0.0);
  for (const Route& route : plan.routes) {
    if (route.stops.empty()) continue;
    const Position& dp = critic.depots[route.depot].pos;
    for (const Position& endpoint : {critic.vertex_pos(route.stops.front()),
                                     critic.vertex_pos(route.stops.back())}) {
      const double dist_e = distance(dp, endpoint);
      if (dist_e <= 0) continue;
      grad[2 * route.depot] += (dp.x - endpoint.x) / dist_e;
      grad[2 * route.depot + 1] += (dp.y - endpoint.y) / dist_e;
    }
  }
  for (int a = 0; a < m; ++a)
    for (int b = a + 1; b < m; ++b) {
      const Position &pa = set.positions[a], &pb = set.positions[b];
      const double dist_ab = distance(pa, pb);
      if (dist_ab <= 0) continue;
      double factor = 0.0;
      if (dist_ab > co.l_max) factor = co.lambda;         // pulls the pair in
      else if (dist_ab < co.l_min) factor = -co.epsilon;  // pushes apart
      if (factor == 0.0) continue;
      const double gx = factor * (pa.x - pb.x) / dist_ab;
      const double gy = factor * (pa.y - pb.y) / dist_ab;
      grad[2 * a] += gx;
      grad[2 * a + 1] += gy;
      grad[2 * b] -= gx;
      grad[2 * b + 1] -= gy;
    }
  return grad;
}

// Pathwise training of the exact head: the frozen policy fixes the routes,
// and L_Gen is differentiated w.r.t. the depot coordinates directly, chained
// through the sigmoid head.
inline DgmTrainResult train_dgm_exact(const TrainConfig& cfg,
                                      MdlramParams& frozen,
                                      const ScalePreset& preset,
                                      const CostCoefficients& co = {},
                                      std::ostream* log_stream = nullptr) {
  if (!cfg.valid()) throw Error("invalid training configuration");
  invariant(preset.m >= 1, "generator training needs at least one depot");
  const std::uint64_t frozen_hash = frozen.weights_hash();

  DgmTrainResult r;
  r.params.init(preset.m, cfg.seed);
  nn::Adam opt({cfg.lr, 0.9f, 0.999f, 1e-8f, cfg.clip_norm});
  const std::vector<nn::Param*> plist = r.params.param_list();

  std::mt19937_64 seed_rng = make_rng(cfg.seed, 602);
  const int g = cfg.main_batch, m = preset.m;
  const int total_batches = cfg.epochs * cfg.batches_per_epoch;
  for (int bi = 1; bi <= total_batches; ++bi) {
    std::vector<Instance> graphs;
    graphs.reserve(g);
    for (int i = 0; i < g; ++i)
      graphs.push_back(sample_customer_graph(preset, seed_rng()));

    nn::Var h = dgm_encode(r.params, graphs, true);
    nn::Var coords = exact_head(r.params, h, true);  // [g, 2m]

    std::vector<DepotSet> sets(g);
    for (int gi = 0; gi < g; ++gi)
      sets[gi] = depot_set_from_row(coords.val(), gi, m);
    const std::vector<RoutePlan> plans = critic_plans(frozen, graphs, sets, co);

    // dL_Gen/d(depot coordinates), with routes held fixed.
    nn::Tensor seed_grad(g, 2 * m);
    TrainLogEntry entry;
    entry.epoch = 1 + (bi - 1) / cfg.batches_per_epoch;
    entry.batch = bi;
    for (int gi = 0; gi < g; ++gi) {
      const Instance critic = make_critic_instance(graphs[gi], sets[gi]);
      const double length = plan_route_length(plans[gi], critic);
      entry.mean_cost += cost_gen(sets[gi], length, co);
      entry.mean_length += length;
      const std::vector<double> grad =
          depot_coordinate_gradient(critic, sets[gi], plans[gi], co);
      for (int j = 0; j < 2 * m; ++j)
        seed_grad.at(gi, j) = float(grad[j] / g);  // batch-mean scaling
    }
    entry.mean_cost /= g;
    entry.mean_length /= g;
    if (!std::isfinite(entry.mean_cost))
      throw Error("training diverged: non-finite mean generation cost");

    nn::backward(coords, seed_grad);
    opt.step(plist);
    entry.grad_norm = opt.last_grad_norm();
    if (log_stream) write_log_line(*log_stream, entry);
    r.log.push_back(entry);
  }

  invariant(frozen.weights_hash() == frozen_hash,
            "frozen policy parameters changed during generator training");
  return r;
}

// ---- generator evaluation ---------------------------------------------------

// Mean L_Gen of the exact head over held-out graphs.
inline double dgm_exact_eval(DgmParams& dgm, MdlramParams& frozen,
                             std::span<const Instance> graphs,
                             const CostCoefficients& co) {
  nn::Var h = dgm_encode(dgm, graphs, false);
  nn::Var coords = exact_head(dgm, h, false);
  std::vector<DepotSet> sets(graphs.size());
  for (std::size_t i = 0; i < graphs.size(); ++i)
    sets[i] = depot_set_from_row(coords.val(), static_cast<int>(i), dgm.m);
  const std::vector<double> scores = lgen_scores(frozen, graphs, sets, co);
  double s = 0.0;
  for (double v : scores) s += v;
  return s / double(scores.size());
}

// Mean sampled L_Gen of the Gaussian head (k depot sets per graph).
inline double dgm_gaussian_eval(DgmParams& dgm, MdlramParams& frozen,
                                std::span<const Instance> graphs,
                                const CostCoefficients& co, int k,
                                std::uint64_t seed) {
  nn::Var h = dgm_encode(dgm, graphs, false);
  GaussianHeadOut head = gaussian_head(dgm, h, false);
  std::vector<DepotSet> sets;
  std::vector<Instance> expanded;
  sets.reserve(graphs.size() * k);
  expanded.reserve(graphs.size() * k);
  for (std::size_t gi = 0; gi < graphs.size(); ++gi) {
    const DepotSamples samples = sample_depots(
        head.distribution(static_cast<int>(gi)), k, mix_seed(seed + gi));
    for (int s = 0; s < k; ++s) {
      sets.push_back(samples.sets[s]);
      expanded.push_back(graphs[gi]);
    }
  }
  const std::vector<double> scores = lgen_scores(frozen, expanded, sets, co);
  double s = 0.0;
  for (double v : scores) s += v;
  return s / double(scores.size());
}

// Mean L_Gen of k uniform-random depot sets per graph (comparison baseline).
inline double random_depot_eval(MdlramParams& frozen,
                                std::span<const Instance> graphs, int m,
                                const CostCoefficients& co, int k,
                                std::uint64_t seed) {
  auto rng = make_rng(seed, 33);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<DepotSet> sets;
  std::vector<Instance> expanded;
  sets.reserve(graphs.size() * k);
  expanded.reserve(graphs.size() * k);
  for (const Instance& graph : graphs) {
    for (int s = 0; s < k; ++s) {
      DepotSet ds;
      ds.positions.resize(m);
      for (Position& p : ds.positions) p = {unit(rng), unit(rng)};
      sets.push_back(std::move(ds));
      expanded.push_back(graph);
    }
  }
  const std::vector<double> scores = lgen_scores(frozen, expanded, sets, co);
  double s = 0.0;
  for (double v : scores) s += v;
  return s / double(scores.size());
}

}  // namespace lrgen
