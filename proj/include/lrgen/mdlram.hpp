#pragma once

// Attention policy over depot+customer graphs. Depots and customers enter
// through separate linear projections, share a 3-block self-attention
// encoder, and are decoded step by step: a context vector (graph mean,
// current vertex, departure depot, remaining load) drives a masked
// multi-head glimpse, then single-head logits over all vertices produce the
// next-action distribution. Greedy and sampling decoders are built on one
// batched rollout.

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "cost.hpp"
#include "instance.hpp"
#include "mdp_env.hpp"
#include "neural/attention.hpp"
#include "neural/checkpoint.hpp"
#include "neural/tensor.hpp"
#include "solution.hpp"

namespace lrgen {

using nn::kEncoderBlocks;

struct MdlramParams {
  nn::Param dep_w, dep_b;    // [2,128], [1,128]
  nn::Param cust_w, cust_b;  // [3,128], [1,128]
  std::array<nn::AttentionBlock, kEncoderBlocks> blocks;
  nn::Param ctx_w, ctx_b;  // [3*128+1, 128], [1,128]
  std::vector<nn::Param> gq, gk, gv;  // glimpse heads, [128,16] each
  nn::Param go;                       // [128,128]
  nn::Param sq, sk;                   // final single-head projections

  void init(std::uint64_t seed) {
    auto rng = make_rng(seed, /*stream=*/101);
    nn::init_param(dep_w, "dep.w", 2, nn::kModelWidth, rng);
    nn::init_param(dep_b, "dep.b", 1, nn::kModelWidth, rng, 2);
    nn::init_param(cust_w, "cust.w", 3, nn::kModelWidth, rng);
    nn::init_param(cust_b, "cust.b", 1, nn::kModelWidth, rng, 3);
    for (int i = 0; i < kEncoderBlocks; ++i)
      blocks[i].init("enc" + std::to_string(i), rng);
    const int ctx_in = 3 * nn::kModelWidth + 1;
    nn::init_param(ctx_w, "ctx.w", ctx_in, nn::kModelWidth, rng);
    nn::init_param(ctx_b, "ctx.b", 1, nn::kModelWidth, rng, ctx_in);
    gq.resize(nn::kHeads);
    gk.resize(nn::kHeads);
    gv.resize(nn::kHeads);
    for (int h = 0; h < nn::kHeads; ++h) {
      nn::init_param(gq[h], "glimpse.q" + std::to_string(h), nn::kModelWidth,
                     nn::kHeadWidth, rng);
      nn::init_param(gk[h], "glimpse.k" + std::to_string(h), nn::kModelWidth,
                     nn::kHeadWidth, rng);
      nn::init_param(gv[h], "glimpse.v" + std::to_string(h), nn::kModelWidth,
                     nn::kHeadWidth, rng);
    }
    nn::init_param(go, "glimpse.o", nn::kModelWidth, nn::kModelWidth, rng);
    nn::init_param(sq, "final.q", nn::kModelWidth, nn::kModelWidth, rng);
    nn::init_param(sk, "final.k", nn::kModelWidth, nn::kModelWidth, rng);
  }

  template <class Fn>
  void for_each_param(Fn&& fn) {
    fn(dep_w);
    fn(dep_b);
    fn(cust_w);
    fn(cust_b);
    for (auto& b : blocks) b.for_each_param(fn);
    fn(ctx_w);
    fn(ctx_b);
    for (int h = 0; h < nn::kHeads; ++h) {
      fn(gq[h]);
      fn(gk[h]);
      fn(gv[h]);
    }
    fn(go);
    fn(sq);
    fn(sk);
  }

  [[nodiscard]] std::vector<nn::Param*> param_list() {
    std::vector<nn::Param*> out;
    for_each_param([&](nn::Param& p) { out.push_back(&p); });
    return out;
  }

  [[nodiscard]] std::uint64_t weights_hash() {
    std::uint64_t h = 1469598103934665603ull;
    for_each_param([&](nn::Param& p) {
      h = fnv1a(p.name.data(), p.name.size(), h);
      h = fnv1a(p.value.v.data(), p.value.v.size() * sizeof(float), h);
    });
    return h;
  }

  [[nodiscard]] nn::Checkpoint to_checkpoint(std::string config) {
    nn::Checkpoint ck;
    ck.config = std::move(config);
    for_each_param([&](nn::Param& p) { ck.arrays[p.name] = p.value; });
    return ck;
  }

  static MdlramParams from_checkpoint(const nn::Checkpoint& ck) {
    MdlramParams p;
    p.init(0);
    p.for_each_param([&](nn::Param& q) {
      auto it = ck.arrays.find(q.name);
      if (it == ck.arrays.end())
        throw ParseError("checkpoint missing array: " + q.name);
      if (it->second.rows != q.value.rows || it->second.cols != q.value.cols)
        throw ShapeMismatch("checkpoint array shape mismatch: " + q.name);
      q.value = it->second;
    });
    return p;
  }
};

// Static, per-batch products: node embeddings plus the key/value projections
// that do not change across decoding steps.
struct MdlramEncoded {
  int batch = 0, m = 0, n = 0, nodes = 0;
  nn::Var h;   // [B*nodes, 128]
  nn::Var ha;  // [B, 128] graph means
  std::vector<nn::Var> glimpse_k, glimpse_v;  // per head [B*nodes, 16]
  nn::Var final_k;                            // [B*nodes, 128]
};

inline MdlramEncoded mdlram_encode(MdlramParams& P,
                                   std::span<const Instance> insts,
                                   bool trainable) {
  if (insts.empty()) throw ShapeMismatch("empty instance batch");
  const int b = static_cast<int>(insts.size());
  const int m = insts[0].m(), n = insts[0].n();
  for (const Instance& inst : insts)
    if (inst.m() != m || inst.n() != n)
      throw ShapeMismatch("instance batch mixes sizes");

  nn::Tensor dep_feat(b * m, 2), cust_feat(b * n, 3);
  for (int i = 0; i < b; ++i) {
    const Instance& inst = insts[i];
    const float inv_q = 1.0f / float(inst.fleet.capacity);
    for (int d = 0; d < m; ++d) {
      dep_feat.at(i * m + d, 0) = float(inst.depots[d].pos.x);
      dep_feat.at(i * m + d, 1) = float(inst.depots[d].pos.y);
    }
    for (int c = 0; c < n; ++c) {
      cust_feat.at(i * n + c, 0) = float(inst.customers[c].pos.x);
      cust_feat.at(i * n + c, 1) = float(inst.customers[c].pos.y);
      cust_feat.at(i * n + c, 2) = float(inst.customers[c].demand) * inv_q;
    }
  }

  MdlramEncoded enc;
  enc.batch = b;
  enc.m = m;
  enc.n = n;
  enc.nodes = m + n;
  nn::Var hd = nn::add_rowvec(
      nn::matmul(nn::constant(std::move(dep_feat)), nn::leaf(P.dep_w, trainable)),
      nn::leaf(P.dep_b, trainable));
  nn::Var hc = nn::add_rowvec(nn::matmul(nn::constant(std::move(cust_feat)),
                                         nn::leaf(P.cust_w, trainable)),
                              nn::leaf(P.cust_b, trainable));
  nn::Var h = nn::interleave_rows(hd, hc, m, n);
  for (auto& block : P.blocks) h = block.forward(h, enc.nodes, trainable);
  enc.h = h;
  enc.ha = nn::block_mean_rows(h, enc.nodes);
  enc.glimpse_k.reserve(nn::kHeads);
  enc.glimpse_v.reserve(nn::kHeads);
  for (int hd2 = 0; hd2 < nn::kHeads; ++hd2) {
    enc.glimpse_k.push_back(nn::matmul(h, nn::leaf(P.gk[hd2], trainable)));
    enc.glimpse_v.push_back(nn::matmul(h, nn::leaf(P.gv[hd2], trainable)));
  }
  enc.final_k = nn::matmul(h, nn::leaf(P.sk, trainable));
  return enc;
}

// h_c = W^c [h_a || h_(t) || h_D(t) || Q_t/Q] + b^c, one row per graph.
inline nn::Var mdlram_context(MdlramParams& P, const MdlramEncoded& enc,
                              std::span<const EnvState> states,
                              std::span<const Instance> insts,
                              bool trainable) {
  if (static_cast<int>(states.size()) != enc.batch)
    throw ShapeMismatch("state count differs from encoded batch");
  std::vector<int> cur(states.size()), dep(states.size());
  nn::Tensor load(enc.batch, 1);
  for (std::size_t i = 0; i < states.size(); ++i) {
    cur[i] = static_cast<int>(i) * enc.nodes + states[i].current_vertex;
    dep[i] = static_cast<int>(i) * enc.nodes + states[i].departure_depot;
    load.at(static_cast<int>(i), 0) =
        float(states[i].remaining_load / insts[i].fleet.capacity);
  }
  nn::Var ctx_in = nn::concat_cols(
      {enc.ha, nn::gather_rows(enc.h, std::move(cur)),
       nn::gather_rows(enc.h, std::move(dep)), nn::constant(std::move(load))});
  return nn::add_rowvec(nn::matmul(ctx_in, nn::leaf(P.ctx_w, trainable)),
                        nn::leaf(P.ctx_b, trainable));
}

// Masked glimpse + single-head logits -> per-graph action distribution
// [B, m+n]. Masked entries have exactly zero probability.
inline nn::Var mdlram_decode_step(MdlramParams& P, const MdlramEncoded& enc,
                                  const nn::Var& context, const BatchMask& mask,
                                  bool trainable) {
  if (mask.batch != enc.batch || mask.actions != enc.nodes)
    throw ShapeMismatch("mask shape differs from encoded batch");
  for (int i = 0; i < mask.batch; ++i) {
    bool any = false;
    for (int a = 0; a < mask.actions; ++a) any = any || !mask.at(i, a);
    if (!any) throw AllMasked("no feasible action in decode row");
  }
  std::vector<std::uint8_t> flat(mask.masked.begin(), mask.masked.end());
  const float ninf = -std::numeric_limits<float>::infinity();
  const float inv_head = 1.0f / std::sqrt(float(nn::kHeadWidth));
  const float inv_model = 1.0f / std::sqrt(float(nn::kModelWidth));

  std::vector<nn::Var> heads;
  heads.reserve(nn::kHeads);
  for (int h = 0; h < nn::kHeads; ++h) {
    nn::Var q = nn::matmul(context, nn::leaf(P.gq[h], trainable));
    nn::Var sc = nn::scale(nn::attn_scores(q, enc.glimpse_k[h], enc.nodes),
                           inv_head);
    nn::Var p = nn::softmax_rows(nn::masked_fill(sc, flat, ninf));
    heads.push_back(nn::attn_mix(p, enc.glimpse_v[h], enc.nodes));
  }
  nn::Var glimpse = nn::matmul(nn::concat_cols(std::span<const nn::Var>(heads)),
                               nn::leaf(P.go, trainable));
  nn::Var logits = nn::scale(
      nn::attn_scores(nn::matmul(glimpse, nn::leaf(P.sq, trainable)),
                      enc.final_k, enc.nodes),
      inv_model);
  return nn::softmax_rows(nn::masked_fill(logits, std::move(flat), ninf));
}

enum class DecodeMode { greedy, sample };

struct RolloutBatch {
  std::vector<std::vector<int>> traces;
  std::vector<RoutePlan> plans;
  std::vector<double> costs;    // full objective of each decoded plan
  std::vector<double> logp;     // accumulated log-probability per graph
  nn::Var sum_logp;             // [B,1]; tape-connected iff built trainable
};

// Batched decode: every graph steps in lockstep; finished graphs self-loop
// at their depot with probability one (zero log-prob contribution).
inline RolloutBatch mdlram_rollout(MdlramParams& P,
                                   std::span<const Instance> insts,
                                   const CostCoefficients& co, DecodeMode mode,
                                   bool trainable, std::mt19937_64& rng) {
  MdlramEncoded enc = mdlram_encode(P, insts, trainable);
  const int b = enc.batch;
  std::vector<EnvState> states;
  states.reserve(b);
  for (const Instance& inst : insts) states.push_back(reset(inst));

  RolloutBatch out;
  out.traces.assign(b, {0});
  out.logp.assign(b, 0.0);
  const int max_steps = 2 * (enc.n + 2 * enc.m) + 8;

  for (int step_i = 0; step_i <= max_steps; ++step_i) {
    bool all_done = true;
    for (const EnvState& s : states) all_done = all_done && s.done;
    if (all_done) break;
    invariant(step_i < max_steps, "rollout exceeded its step budget");

    BatchMask mask = compute_mask(states, insts);
    nn::Var ctx = mdlram_context(P, enc, states, insts, trainable);
    nn::Var p = mdlram_decode_step(P, enc, ctx, mask, trainable);

    std::vector<int> actions(b, 0);
    for (int i = 0; i < b; ++i) {
      if (mode == DecodeMode::greedy) {
        int best = -1;
        float best_p = -1.0f;
        for (int a = 0; a < enc.nodes; ++a)
          if (p.val().at(i, a) > best_p) {
            best_p = p.val().at(i, a);
            best = a;
          }
        actions[i] = best;
      } else {
        const double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
        double cum = 0.0;
        int chosen = -1, last_pos = -1;
        for (int a = 0; a < enc.nodes; ++a) {
          const float pa = p.val().at(i, a);
          if (pa <= 0.0f) continue;
          last_pos = a;
          cum += pa;
          if (u < cum) {
            chosen = a;
            break;
          }
        }
        actions[i] = chosen >= 0 ? chosen : last_pos;
      }
      invariant(actions[i] >= 0 && !mask.at(i, actions[i]),
                "decoded action is masked");
    }

    if (trainable) {
      nn::Var lp = nn::log_(nn::pick_cols(p, actions));
      out.sum_logp = out.sum_logp.defined() ? nn::add(out.sum_logp, lp) : lp;
    }
    for (int i = 0; i < b; ++i) {
      out.logp[i] += std::log(double(p.val().at(i, actions[i])));
      if (!states[i].done) {
        states[i] = step(states[i], actions[i], insts[i]).new_state;
        out.traces[i].push_back(actions[i]);
      }
    }
  }

  out.plans.reserve(b);
  out.costs.reserve(b);
  for (int i = 0; i < b; ++i) {
    out.plans.push_back(trace_to_plan(out.traces[i], insts[i]));
    out.costs.push_back(cost_sel(out.plans.back(), insts[i], co).total);
  }
  return out;
}

struct SolveResult {
  RoutePlan plan;
  double cost = 0.0;
};

inline SolveResult solve_greedy(MdlramParams& P, const Instance& inst,
                                const CostCoefficients& co = {}) {
  std::mt19937_64 rng = make_rng(0);
  RolloutBatch r = mdlram_rollout(P, std::span<const Instance>(&inst, 1), co,
                                  DecodeMode::greedy, false, rng);
  return {std::move(r.plans[0]), r.costs[0]};
}

// k stochastic rollouts plus the greedy one; returns the cheapest plan.
inline SolveResult solve_sampling(MdlramParams& P, const Instance& inst,
                                  const CostCoefficients& co, int k,
                                  std::uint64_t seed) {
  if (k < 1) throw Error("sample count must be >= 1");
  SolveResult best = solve_greedy(P, inst, co);
  std::mt19937_64 rng = make_rng(seed, /*stream=*/7);
  const int chunk = 128;
  for (int done_k = 0; done_k < k; done_k += chunk) {
    const int cur = std::min(chunk, k - done_k);
    std::vector<Instance> copies(static_cast<std::size_t>(cur), inst);
    RolloutBatch r = mdlram_rollout(P, copies, co, DecodeMode::sample, false,
                                    rng);
    for (int i = 0; i < cur; ++i)
      if (r.costs[i] < best.cost) {
        best.cost = r.costs[i];
        best.plan = std::move(r.plans[i]);
      }
  }
  return best;
}

}  // namespace lrgen
