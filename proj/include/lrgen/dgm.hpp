#pragma once

// Depot generative model: encodes the customer set alone (3-block attention
// encoder + mean pooling) and emits depot positions through one of two
// heads. The Gaussian head parameterizes a 2m-dimensional normal via a
// Cholesky factor (diagonal kept positive with 1+elu); samples are mapped
// into the unit square with an element-wise sigmoid. The exact head emits
// 2m coordinates directly through a sigmoid.

#include <array>
#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "instance.hpp"
#include "neural/attention.hpp"
#include "neural/checkpoint.hpp"
#include "neural/tensor.hpp"

namespace lrgen {

// Gaussian over pre-sigmoid depot coordinates: X ~ N(mu, L L^T), depots =
// sigmoid(X) read as m coordinate pairs.
struct DepotDistribution {
  int m = 0;                   // depot count; dimension is 2m
  std::vector<double> mean;    // 2m
  std::vector<double> factor;  // 2m x 2m lower-triangular, row-major

  [[nodiscard]] int dim() const { return 2 * m; }
  [[nodiscard]] double l_at(int i, int j) const {
    return factor[std::size_t(i) * dim() + j];
  }

  [[nodiscard]] std::vector<double> covariance() const {
    const int d = dim();
    std::vector<double> sigma(std::size_t(d) * d, 0.0);
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j) {
        double s = 0.0;
        for (int k = 0; k <= std::min(i, j); ++k) s += l_at(i, k) * l_at(j, k);
        sigma[std::size_t(i) * d + j] = s;
      }
    return sigma;
  }
};

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

using nn::kEncoderBlocks;

struct DgmParams {
  int m = 0;  // fixed depot count of the generator
  nn::Param cust_w, cust_b;  // [3,128], [1,128]
  std::array<nn::AttentionBlock, kEncoderBlocks> blocks;
  nn::Param hid_w, hid_b;          // shared hidden layer [128,128]
  nn::Param gauss_w, gauss_b;      // [128, 4m + C(2m,2)]
  nn::Param exact_w, exact_b;      // [128, 2m]

  [[nodiscard]] int gauss_out() const {
    const int d = 2 * m;
    return 2 * d + d * (d - 1) / 2;
  }

  void init(int depot_count, std::uint64_t seed) {
    m = depot_count;
    invariant(m >= 1, "generator needs at least one depot");
    auto rng = make_rng(seed, /*stream=*/202);
    nn::init_param(cust_w, "cust.w", 3, nn::kModelWidth, rng);
    nn::init_param(cust_b, "cust.b", 1, nn::kModelWidth, rng, 3);
    for (int i = 0; i < kEncoderBlocks; ++i)
      blocks[i].init("enc" + std::to_string(i), rng);
    nn::init_param(hid_w, "hid.w", nn::kModelWidth, nn::kModelWidth, rng);
    nn::init_param(hid_b, "hid.b", 1, nn::kModelWidth, rng, nn::kModelWidth);
    nn::init_param(gauss_w, "gauss.w", nn::kModelWidth, gauss_out(), rng);
    nn::init_param(gauss_b, "gauss.b", 1, gauss_out(), rng, nn::kModelWidth);
    nn::init_param(exact_w, "exact.w", nn::kModelWidth, 2 * m, rng);
    nn::init_param(exact_b, "exact.b", 1, 2 * m, rng, nn::kModelWidth);
  }

  template <class Fn>
  void for_each_param(Fn&& fn) {
    fn(cust_w);
    fn(cust_b);
    for (auto& b : blocks) b.for_each_param(fn);
    fn(hid_w);
    fn(hid_b);
    fn(gauss_w);
    fn(gauss_b);
    fn(exact_w);
    fn(exact_b);
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

  static DgmParams from_checkpoint(const nn::Checkpoint& ck, int depot_count) {
    DgmParams p;
    p.init(depot_count, 0);
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

// Customer-only encoding, mean-pooled: [B, 128]. Depots in the given
// instances are ignored; only customers and the vehicle capacity are read.
inline nn::Var dgm_encode(DgmParams& P, std::span<const Instance> insts,
                          bool trainable) {
  if (insts.empty()) throw ShapeMismatch("empty instance batch");
  const int b = static_cast<int>(insts.size());
  const int n = insts[0].n();
  for (const Instance& inst : insts)
    if (inst.n() != n) throw ShapeMismatch("instance batch mixes sizes");
  invariant(n >= 1, "customer graph is empty");

  nn::Tensor feat(b * n, 3);
  for (int i = 0; i < b; ++i) {
    const float inv_q = 1.0f / float(insts[i].fleet.capacity);
    for (int c = 0; c < n; ++c) {
      feat.at(i * n + c, 0) = float(insts[i].customers[c].pos.x);
      feat.at(i * n + c, 1) = float(insts[i].customers[c].pos.y);
      feat.at(i * n + c, 2) = float(insts[i].customers[c].demand) * inv_q;
    }
  }
  nn::Var h = nn::add_rowvec(nn::matmul(nn::constant(std::move(feat)),
                                        nn::leaf(P.cust_w, trainable)),
                             nn::leaf(P.cust_b, trainable));
  for (auto& block : P.blocks) h = block.forward(h, n, trainable);
  return nn::block_mean_rows(h, n);
}

// Tape-level Gaussian head outputs; every Var has one row per graph.
struct GaussianHeadOut {
  int m = 0;
  nn::Var mu;     // [B, 2m]
  nn::Var ldiag;  // [B, 2m], strictly positive
  nn::Var loff;   // [B, C(2m,2)], strict lower triangle row-major

  [[nodiscard]] DepotDistribution distribution(int row) const {
    DepotDistribution d;
    d.m = m;
    const int dim = 2 * m;
    d.mean.resize(dim);
    d.factor.assign(std::size_t(dim) * dim, 0.0);
    for (int i = 0; i < dim; ++i) {
      d.mean[i] = double(mu.val().at(row, i));
      d.factor[std::size_t(i) * dim + i] = double(ldiag.val().at(row, i));
    }
    int flat = 0;
    for (int i = 0; i < dim; ++i)
      for (int j = 0; j < i; ++j) {
        d.factor[std::size_t(i) * dim + j] = double(loff.val().at(row, flat));
        ++flat;
      }
    return d;
  }
};

// Raw head output is tanh-bounded, then split: [2m mean | 2m diagonal via
// 1+elu | C(2m,2) strict lower triangle].
inline GaussianHeadOut gaussian_head(DgmParams& P, const nn::Var& h_serve,
                                     bool trainable) {
  nn::Var hidden = nn::tanh_(
      nn::add_rowvec(nn::matmul(h_serve, nn::leaf(P.hid_w, trainable)),
                     nn::leaf(P.hid_b, trainable)));
  nn::Var raw = nn::tanh_(
      nn::add_rowvec(nn::matmul(hidden, nn::leaf(P.gauss_w, trainable)),
                     nn::leaf(P.gauss_b, trainable)));
  const int d = 2 * P.m;
  GaussianHeadOut out;
  out.m = P.m;
  out.mu = nn::slice_cols(raw, 0, d);
  out.ldiag = nn::add_scalar(nn::elu_(nn::slice_cols(raw, d, 2 * d)), 1.0f);
  out.loff = nn::slice_cols(raw, 2 * d, 2 * d + d * (d - 1) / 2);
  return out;
}

// Exact positions: sigmoid over the 2m head outputs (no outer tanh).
// Returns the tape variable so depot coordinates stay differentiable.
inline nn::Var exact_head(DgmParams& P, const nn::Var& h_serve,
                          bool trainable) {
  nn::Var hidden = nn::tanh_(
      nn::add_rowvec(nn::matmul(h_serve, nn::leaf(P.hid_w, trainable)),
                     nn::leaf(P.hid_b, trainable)));
  return nn::sigmoid_(
      nn::add_rowvec(nn::matmul(hidden, nn::leaf(P.exact_w, trainable)),
                     nn::leaf(P.exact_b, trainable)));
}

inline DepotSet depot_set_from_row(const nn::Tensor& coords, int row, int m) {
  DepotSet out;
  out.positions.resize(m);
  for (int k = 0; k < m; ++k) {
    out.positions[k].x = double(coords.at(row, 2 * k));
    out.positions[k].y = double(coords.at(row, 2 * k + 1));
  }
  return out;
}

struct DepotSamples {
  std::vector<DepotSet> sets;               // k sigmoid-mapped depot sets
  std::vector<std::vector<double>> draws;   // k pre-sigmoid vectors X
};

inline DepotSamples sample_depots(const DepotDistribution& dist, int k,
                                  std::uint64_t seed) {
  invariant(k >= 1, "sample count must be >= 1");
  const int d = dist.dim();
  auto rng = make_rng(seed, /*stream=*/31);
  std::normal_distribution<double> gauss(0.0, 1.0);
  DepotSamples out;
  out.sets.resize(k);
  out.draws.resize(k);
  std::vector<double> z(d);
  for (int s = 0; s < k; ++s) {
    for (double& v : z) v = gauss(rng);
    std::vector<double>& x = out.draws[s];
    x.assign(d, 0.0);
    for (int i = 0; i < d; ++i) {
      double acc = dist.mean[i];
      for (int j = 0; j <= i; ++j) acc += dist.l_at(i, j) * z[j];
      x[i] = acc;
    }
    out.sets[s].positions.resize(dist.m);
    for (int p = 0; p < dist.m; ++p) {
      out.sets[s].positions[p].x = sigmoid(x[2 * p]);
      out.sets[s].positions[p].y = sigmoid(x[2 * p + 1]);
    }
  }
  return out;
}

// Normal log-density of a pre-sigmoid draw, evaluated through the factor:
// -1/2 ||L^-1 (x - mu)||^2 - sum log L_ii - m log(2 pi).
inline double log_prob(const DepotDistribution& dist,
                       std::span<const double> x) {
  const int d = dist.dim();
  if (static_cast<int>(x.size()) != d)
    throw DimensionMismatch("draw dimension differs from the distribution");
  std::vector<double> y(d, 0.0);
  double logdet = 0.0;
  for (int i = 0; i < d; ++i) {
    const double lii = dist.l_at(i, i);
    if (!(lii > 0)) throw SingularFactor("non-positive factor diagonal");
    double s = x[i] - dist.mean[i];
    for (int j = 0; j < i; ++j) s -= dist.l_at(i, j) * y[j];
    y[i] = s / lii;
    logdet += std::log(lii);
  }
  double q = 0.0;
  for (double v : y) q += v * v;
  return -0.5 * q - logdet - 0.5 * d * std::log(2.0 * 3.14159265358979323846);
}

}  // namespace lrgen
