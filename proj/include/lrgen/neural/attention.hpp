#pragma once

// Multi-head self-attention encoder block: 8 heads over a 128-wide stream,
// per-head width 16, followed by a 128 -> 512 -> 128 feed-forward with elu.
// Both sublayers carry residual connections and per-node normalization.

#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "tensor.hpp"

namespace lrgen::nn {

inline constexpr int kModelWidth = 128;
inline constexpr int kHeads = 8;
inline constexpr int kHeadWidth = kModelWidth / kHeads;
inline constexpr int kFfWidth = 512;
inline constexpr int kEncoderBlocks = 3;

struct AttentionBlock {
  std::vector<Param> wq, wk, wv;  // one [128, 16] per head
  Param wo;                       // [128, 128]
  Param norm1_gain, norm1_shift;
  Param ff_w1, ff_b1, ff_w2, ff_b2;
  Param norm2_gain, norm2_shift;

  void init(const std::string& prefix, std::mt19937_64& rng) {
    wq.resize(kHeads);
    wk.resize(kHeads);
    wv.resize(kHeads);
    for (int h = 0; h < kHeads; ++h) {
      init_param(wq[h], prefix + ".q" + std::to_string(h), kModelWidth,
                 kHeadWidth, rng);
      init_param(wk[h], prefix + ".k" + std::to_string(h), kModelWidth,
                 kHeadWidth, rng);
      init_param(wv[h], prefix + ".v" + std::to_string(h), kModelWidth,
                 kHeadWidth, rng);
    }
    init_param(wo, prefix + ".o", kModelWidth, kModelWidth, rng);
    init_param(norm1_gain, prefix + ".n1g", 1, kModelWidth, rng);
    norm1_gain.value = Tensor::full(1, kModelWidth, 1.0f);
    init_param(norm1_shift, prefix + ".n1s", 1, kModelWidth, rng);
    norm1_shift.value = Tensor(1, kModelWidth);
    init_param(ff_w1, prefix + ".f1", kModelWidth, kFfWidth, rng);
    init_param(ff_b1, prefix + ".f1b", 1, kFfWidth, rng, kModelWidth);
    init_param(ff_w2, prefix + ".f2", kFfWidth, kModelWidth, rng);
    init_param(ff_b2, prefix + ".f2b", 1, kModelWidth, rng, kFfWidth);
    init_param(norm2_gain, prefix + ".n2g", 1, kModelWidth, rng);
    norm2_gain.value = Tensor::full(1, kModelWidth, 1.0f);
    init_param(norm2_shift, prefix + ".n2s", 1, kModelWidth, rng);
    norm2_shift.value = Tensor(1, kModelWidth);
  }

  template <class Fn>
  void for_each_param(Fn&& fn) {
    for (int h = 0; h < kHeads; ++h) {
      fn(wq[h]);
      fn(wk[h]);
      fn(wv[h]);
    }
    fn(wo);
    fn(norm1_gain);
    fn(norm1_shift);
    fn(ff_w1);
    fn(ff_b1);
    fn(ff_w2);
    fn(ff_b2);
    fn(norm2_gain);
    fn(norm2_shift);
  }

  // x: [B*group, 128] node states, `group` nodes per graph.
  Var forward(const Var& x, int group, bool trainable) {
    std::vector<Var> heads;
    heads.reserve(kHeads);
    const float inv_sqrt = 1.0f / std::sqrt(float(kHeadWidth));
    for (int h = 0; h < kHeads; ++h) {
      Var q = matmul(x, leaf(wq[h], trainable));
      Var k = matmul(x, leaf(wk[h], trainable));
      Var v = matmul(x, leaf(wv[h], trainable));
      Var p = softmax_rows(scale(self_attn_scores(q, k, group), inv_sqrt));
      heads.push_back(self_attn_mix(p, v, group));
    }
    Var mixed = matmul(concat_cols(std::span<const Var>(heads)),
                       leaf(wo, trainable));
    Var h1 = norm_rows(add(x, mixed), leaf(norm1_gain, trainable),
                       leaf(norm1_shift, trainable));
    Var ff = add_rowvec(
        matmul(elu_(add_rowvec(matmul(h1, leaf(ff_w1, trainable)),
                               leaf(ff_b1, trainable))),
               leaf(ff_w2, trainable)),
        leaf(ff_b2, trainable));
    return norm_rows(add(h1, ff), leaf(norm2_gain, trainable),
                     leaf(norm2_shift, trainable));
  }
};

}  // namespace lrgen::nn
