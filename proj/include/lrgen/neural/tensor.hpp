#pragma once

// Dense float32 matrices plus a minimal reverse-mode tape. Nodes form an
// acyclic expression graph; backward() walks it in reverse construction
// order. Dense kernels are delegated to Eigen; every derivative is written
// out by hand. Cost accounting elsewhere stays in double; this substrate is
// deliberately float32.

#include <Eigen/Dense>

#include <atomic>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <random>
#include <span>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "../core.hpp"

namespace lrgen::nn {

using EMat = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using EMap = Eigen::Map<EMat>;
using ECMap = Eigen::Map<const EMat>;

struct Tensor {
  int rows = 0, cols = 0;
  std::vector<float> v;

  Tensor() = default;
  Tensor(int r, int c) : rows(r), cols(c), v(std::size_t(r) * c, 0.0f) {}

  [[nodiscard]] std::size_t size() const { return v.size(); }
  [[nodiscard]] bool empty() const { return v.empty(); }
  [[nodiscard]] float& at(int r, int c) { return v[std::size_t(r) * cols + c]; }
  [[nodiscard]] float at(int r, int c) const {
    return v[std::size_t(r) * cols + c];
  }
  [[nodiscard]] EMap map() { return EMap(v.data(), rows, cols); }
  [[nodiscard]] ECMap map() const { return ECMap(v.data(), rows, cols); }

  static Tensor full(int r, int c, float value) {
    Tensor t(r, c);
    std::fill(t.v.begin(), t.v.end(), value);
    return t;
  }
};

struct Node;
using NodePtr = std::shared_ptr<Node>;

struct Node {
  Tensor val;
  Tensor grad;  // allocated on first accumulation
  bool needs_grad = false;
  std::uint64_t seq = 0;
  std::vector<NodePtr> parents;
  std::function<void(Node&)> pull;  // propagates this->grad to parents
};

inline std::uint64_t next_seq() {
  static std::atomic<std::uint64_t> counter{0};
  return ++counter;
}

inline Tensor& grad_ref(Node& n) {
  if (n.grad.empty()) n.grad = Tensor(n.val.rows, n.val.cols);
  return n.grad;
}

class Var {
 public:
  Var() = default;
  explicit Var(NodePtr n) : node_(std::move(n)) {}

  [[nodiscard]] bool defined() const { return node_ != nullptr; }
  [[nodiscard]] const Tensor& val() const { return node_->val; }
  [[nodiscard]] int rows() const { return node_->val.rows; }
  [[nodiscard]] int cols() const { return node_->val.cols; }
  [[nodiscard]] Node* node() const { return node_.get(); }
  [[nodiscard]] const NodePtr& ptr() const { return node_; }

 private:
  NodePtr node_;
};

namespace detail {

inline NodePtr make_node(Tensor val, std::vector<NodePtr> parents = {}) {
  auto n = std::make_shared<Node>();
  n->val = std::move(val);
  n->seq = next_seq();
  n->parents = std::move(parents);
  for (const auto& p : n->parents) n->needs_grad = n->needs_grad || p->needs_grad;
  return n;
}

inline void require(bool ok, const char* what) {
  if (!ok) throw ShapeMismatch(what);
}

}  // namespace detail

// A named, learnable array with optimizer slots. Models own Params by value;
// copies (e.g. a frozen baseline) are independent.
struct Param {
  std::string name;
  Tensor value;
  Tensor grad;
  Tensor adam_m, adam_v;

  void zero_grad() {
    if (!grad.empty()) std::fill(grad.v.begin(), grad.v.end(), 0.0f);
  }
};

inline void init_param(Param& p, std::string name, int rows, int cols,
                       std::mt19937_64& rng, int fan_in = -1) {
  p.name = std::move(name);
  p.value = Tensor(rows, cols);
  const float bound = 1.0f / std::sqrt(float(fan_in > 0 ? fan_in : rows));
  std::uniform_real_distribution<float> u(-bound, bound);
  for (auto& x : p.value.v) x = u(rng);
  p.grad = Tensor();
  p.adam_m = Tensor();
  p.adam_v = Tensor();
}

inline Var constant(Tensor t) { return Var(detail::make_node(std::move(t))); }

// Tape entry point for a parameter; gradients accumulate into Param::grad.
inline Var leaf(Param& p, bool trainable) {
  auto n = detail::make_node(p.value);
  if (trainable) {
    n->needs_grad = true;
    Param* pp = &p;
    n->pull = [pp](Node& self) {
      if (pp->grad.empty()) pp->grad = Tensor(self.val.rows, self.val.cols);
      pp->grad.map() += self.grad.map();
    };
  }
  return Var(n);
}

inline void backward(const Var& root, const Tensor& seed) {
  Node* r = root.node();
  detail::require(r != nullptr, "backward on an undefined variable");
  detail::require(seed.rows == r->val.rows && seed.cols == r->val.cols,
                  "backward seed shape mismatch");
  if (!r->needs_grad) return;

  std::vector<Node*> order, stack{r};
  std::unordered_set<Node*> seen{r};
  while (!stack.empty()) {
    Node* n = stack.back();
    stack.pop_back();
    order.push_back(n);
    for (const auto& p : n->parents) {
      if (p->needs_grad && seen.insert(p.get()).second) stack.push_back(p.get());
    }
  }
  std::sort(order.begin(), order.end(),
            [](const Node* a, const Node* b) { return a->seq > b->seq; });
  grad_ref(*r).map() += seed.map();
  for (Node* n : order)
    if (n->pull) n->pull(*n);
}

inline void backward(const Var& root) {
  detail::require(root.defined() && root.rows() == 1 && root.cols() == 1,
                  "scalar backward expects a 1x1 root");
  backward(root, Tensor::full(1, 1, 1.0f));
}

// ---- primitives ----------------------------------------------------------

inline Var matmul(const Var& a, const Var& b) {
  detail::require(a.cols() == b.rows(), "matmul inner dimensions differ");
  Tensor out(a.rows(), b.cols());
  out.map().noalias() = a.val().map() * b.val().map();
  auto n = detail::make_node(std::move(out), {a.ptr(), b.ptr()});
  if (n->needs_grad) {
    Node *pa = a.node(), *pb = b.node();
    n->pull = [pa, pb](Node& self) {
      if (pa->needs_grad)
        grad_ref(*pa).map().noalias() +=
            self.grad.map() * pb->val.map().transpose();
      if (pb->needs_grad)
        grad_ref(*pb).map().noalias() +=
            pa->val.map().transpose() * self.grad.map();
    };
  }
  return Var(n);
}

inline Var add(const Var& a, const Var& b) {
  detail::require(a.rows() == b.rows() && a.cols() == b.cols(),
                  "add shape mismatch");
  Tensor out(a.rows(), a.cols());
  out.map() = a.val().map() + b.val().map();
  auto n = detail::make_node(std::move(out), {a.ptr(), b.ptr()});
  if (n->needs_grad) {
    Node *pa = a.node(), *pb = b.node();
    n->pull = [pa, pb](Node& self) {
      if (pa->needs_grad) grad_ref(*pa).map() += self.grad.map();
      if (pb->needs_grad) grad_ref(*pb).map() += self.grad.map();
    };
  }
  return Var(n);
}

inline Var sub(const Var& a, const Var& b) {
  detail::require(a.rows() == b.rows() && a.cols() == b.cols(),
                  "sub shape mismatch");
  Tensor out(a.rows(), a.cols());
  out.map() = a.val().map() - b.val().map();
  auto n = detail::make_node(std::move(out), {a.ptr(), b.ptr()});
  if (n->needs_grad) {
    Node *pa = a.node(), *pb = b.node();
    n->pull = [pa, pb](Node& self) {
      if (pa->needs_grad) grad_ref(*pa).map() += self.grad.map();
      if (pb->needs_grad) grad_ref(*pb).map() -= self.grad.map();
    };
  }
  return Var(n);
}

inline Var mul(const Var& a, const Var& b) {
  detail::require(a.rows() == b.rows() && a.cols() == b.cols(),
                  "mul shape mismatch");
  Tensor out(a.rows(), a.cols());
  out.map() = a.val().map().cwiseProduct(b.val().map());
  auto n = detail::make_node(std::move(out), {a.ptr(), b.ptr()});
  if (n->needs_grad) {
    Node *pa = a.node(), *pb = b.node();
    n->pull = [pa, pb](Node& self) {
      if (pa->needs_grad)
        grad_ref(*pa).map() += self.grad.map().cwiseProduct(pb->val.map());
      if (pb->needs_grad)
        grad_ref(*pb).map() += self.grad.map().cwiseProduct(pa->val.map());
    };
  }
  return Var(n);
}

inline Var scale(const Var& a, float s) {
  Tensor out(a.rows(), a.cols());
  out.map() = a.val().map() * s;
  auto n = detail::make_node(std::move(out), {a.ptr()});
  if (n->needs_grad) {
    Node* pa = a.node();
    n->pull = [pa, s](Node& self) {
      grad_ref(*pa).map() += self.grad.map() * s;
    };
  }
  return Var(n);
}

inline Var add_scalar(const Var& a, float s) {
  Tensor out(a.rows(), a.cols());
  out.map() = a.val().map().array() + s;
  auto n = detail::make_node(std::move(out), {a.ptr()});
  if (n->needs_grad) {
    Node* pa = a.node();
    n->pull = [pa](Node& self) { grad_ref(*pa).map() += self.grad.map(); };
  }
  return Var(n);
}

// Broadcast a 1 x C bias over every row.
inline Var add_rowvec(const Var& a, const Var& bias) {
  detail::require(bias.rows() == 1 && bias.cols() == a.cols(),
                  "add_rowvec expects a 1 x cols bias");
  Tensor out(a.rows(), a.cols());
  out.map() = a.val().map().rowwise() + bias.val().map().row(0);
  auto n = detail::make_node(std::move(out), {a.ptr(), bias.ptr()});
  if (n->needs_grad) {
    Node *pa = a.node(), *pb = bias.node();
    n->pull = [pa, pb](Node& self) {
      if (pa->needs_grad) grad_ref(*pa).map() += self.grad.map();
      if (pb->needs_grad)
        grad_ref(*pb).map().row(0) += self.grad.map().colwise().sum();
    };
  }
  return Var(n);
}

inline Var concat_cols(std::span<const Var> parts) {
  detail::require(!parts.empty(), "concat of nothing");
  const int rows = parts[0].rows();
  int cols = 0;
  for (const Var& p : parts) {
    detail::require(p.rows() == rows, "concat row mismatch");
    cols += p.cols();
  }
  Tensor out(rows, cols);
  std::vector<NodePtr> parents;
  int off = 0;
  for (const Var& p : parts) {
    out.map().middleCols(off, p.cols()) = p.val().map();
    off += p.cols();
    parents.push_back(p.ptr());
  }
  auto n = detail::make_node(std::move(out), std::move(parents));
  if (n->needs_grad) {
    std::vector<std::pair<Node*, std::pair<int, int>>> spans;
    off = 0;
    for (const Var& p : parts) {
      spans.push_back({p.node(), {off, p.cols()}});
      off += p.cols();
    }
    n->pull = [spans](Node& self) {
      for (auto& [pn, sp] : spans)
        if (pn->needs_grad)
          grad_ref(*pn).map() += self.grad.map().middleCols(sp.first, sp.second);
    };
  }
  return Var(n);
}

inline Var concat_cols(std::initializer_list<Var> parts) {
  std::vector<Var> v(parts);
  return concat_cols(std::span<const Var>(v));
}

inline Var slice_cols(const Var& a, int c0, int c1) {
  detail::require(0 <= c0 && c0 < c1 && c1 <= a.cols(), "slice out of range");
  Tensor out(a.rows(), c1 - c0);
  out.map() = a.val().map().middleCols(c0, c1 - c0);
  auto n = detail::make_node(std::move(out), {a.ptr()});
  if (n->needs_grad) {
    Node* pa = a.node();
    n->pull = [pa, c0](Node& self) {
      grad_ref(*pa).map().middleCols(c0, self.val.cols) += self.grad.map();
    };
  }
  return Var(n);
}

// rows of a, selected with repetition allowed; backward scatter-adds.
inline Var gather_rows(const Var& a, std::vector<int> idx) {
  for (int i : idx)
    detail::require(0 <= i && i < a.rows(), "gather index out of range");
  Tensor out(static_cast<int>(idx.size()), a.cols());
  for (std::size_t r = 0; r < idx.size(); ++r)
    out.map().row(static_cast<int>(r)) = a.val().map().row(idx[r]);
  auto n = detail::make_node(std::move(out), {a.ptr()});
  if (n->needs_grad) {
    Node* pa = a.node();
    n->pull = [pa, idx = std::move(idx)](Node& self) {
      auto g = grad_ref(*pa).map();
      for (std::size_t r = 0; r < idx.size(); ++r)
        g.row(idx[r]) += self.grad.map().row(static_cast<int>(r));
    };
  }
  return Var(n);
}

// One entry per row: out[r, 0] = a[r, idx[r]].
inline Var pick_cols(const Var& a, std::vector<int> idx) {
  detail::require(static_cast<int>(idx.size()) == a.rows(),
                  "pick needs one index per row");
  for (int i : idx)
    detail::require(0 <= i && i < a.cols(), "pick index out of range");
  Tensor out(a.rows(), 1);
  for (int r = 0; r < a.rows(); ++r) out.at(r, 0) = a.val().at(r, idx[r]);
  auto n = detail::make_node(std::move(out), {a.ptr()});
  if (n->needs_grad) {
    Node* pa = a.node();
    n->pull = [pa, idx = std::move(idx)](Node& self) {
      Tensor& g = grad_ref(*pa);
      for (int r = 0; r < self.val.rows; ++r)
        g.at(r, idx[r]) += self.grad.at(r, 0);
    };
  }
  return Var(n);
}

// Mean over each contiguous block of `group` rows: [B*group, C] -> [B, C].
inline Var block_mean_rows(const Var& a, int group) {
  detail::require(group > 0 && a.rows() % group == 0,
                  "block mean group does not divide rows");
  const int b = a.rows() / group;
  Tensor out(b, a.cols());
  for (int i = 0; i < b; ++i)
    out.map().row(i) =
        a.val().map().middleRows(i * group, group).colwise().mean();
  auto n = detail::make_node(std::move(out), {a.ptr()});
  if (n->needs_grad) {
    Node* pa = a.node();
    n->pull = [pa, group](Node& self) {
      auto g = grad_ref(*pa).map();
      for (int i = 0; i < self.val.rows; ++i)
        g.middleRows(i * group, group).rowwise() +=
            self.grad.map().row(i) / float(group);
    };
  }
  return Var(n);
}

inline Var mean_all(const Var& a) {
  Tensor out(1, 1);
  out.at(0, 0) = a.val().map().mean();
  auto n = detail::make_node(std::move(out), {a.ptr()});
  if (n->needs_grad) {
    Node* pa = a.node();
    n->pull = [pa](Node& self) {
      grad_ref(*pa).map().array() +=
          self.grad.at(0, 0) / float(pa->val.size());
    };
  }
  return Var(n);
}

// Per-graph row interleave: for each of B graphs, the ma rows of `a` then the
// nb rows of `b`. [B*ma, C] + [B*nb, C] -> [B*(ma+nb), C].
inline Var interleave_rows(const Var& a, const Var& b, int ma, int nb) {
  detail::require(a.cols() == b.cols(), "interleave column mismatch");
  detail::require(ma >= 0 && nb >= 0 && (ma == 0 || a.rows() % ma == 0) &&
                      (nb == 0 || b.rows() % nb == 0),
                  "interleave group mismatch");
  const int batches = ma > 0 ? a.rows() / ma : b.rows() / nb;
  detail::require((ma == 0 || a.rows() == batches * ma) &&
                      (nb == 0 || b.rows() == batches * nb),
                  "interleave batch mismatch");
  const int stride = ma + nb;
  Tensor out(batches * stride, a.cols());
  for (int g = 0; g < batches; ++g) {
    if (ma > 0)
      out.map().middleRows(g * stride, ma) = a.val().map().middleRows(g * ma, ma);
    if (nb > 0)
      out.map().middleRows(g * stride + ma, nb) =
          b.val().map().middleRows(g * nb, nb);
  }
  auto n = detail::make_node(std::move(out), {a.ptr(), b.ptr()});
  if (n->needs_grad) {
    Node *pa = a.node(), *pb = b.node();
    n->pull = [pa, pb, ma, nb, batches, stride](Node& self) {
      for (int g = 0; g < batches; ++g) {
        if (ma > 0 && pa->needs_grad)
          grad_ref(*pa).map().middleRows(g * ma, ma) +=
              self.grad.map().middleRows(g * stride, ma);
        if (nb > 0 && pb->needs_grad)
          grad_ref(*pb).map().middleRows(g * nb, nb) +=
              self.grad.map().middleRows(g * stride + ma, nb);
      }
    };
  }
  return Var(n);
}

// ---- elementwise nonlinearities ------------------------------------------

namespace detail {

template <class Fwd, class Bwd>
Var unary(const Var& a, Fwd fwd, Bwd bwd_factor) {
  Tensor out(a.rows(), a.cols());
  for (std::size_t i = 0; i < out.size(); ++i) out.v[i] = fwd(a.val().v[i]);
  auto n = make_node(std::move(out), {a.ptr()});
  if (n->needs_grad) {
    Node* pa = a.node();
    n->pull = [pa, bwd_factor](Node& self) {
      Tensor& g = grad_ref(*pa);
      for (std::size_t i = 0; i < g.size(); ++i)
        g.v[i] += self.grad.v[i] * bwd_factor(pa->val.v[i], self.val.v[i]);
    };
  }
  return Var(n);
}

}  // namespace detail

inline Var tanh_(const Var& a) {
  return detail::unary(
      a, [](float x) { return std::tanh(x); },
      [](float, float y) { return 1.0f - y * y; });
}

inline Var sigmoid_(const Var& a) {
  return detail::unary(
      a, [](float x) { return 1.0f / (1.0f + std::exp(-x)); },
      [](float, float y) { return y * (1.0f - y); });
}

// elu with unit scale.
inline Var elu_(const Var& a) {
  return detail::unary(
      a, [](float x) { return x > 0 ? x : std::expm1(x); },
      [](float x, float y) { return x > 0 ? 1.0f : y + 1.0f; });
}

inline Var exp_(const Var& a) {
  return detail::unary(
      a, [](float x) { return std::exp(x); },
      [](float, float y) { return y; });
}

inline Var log_(const Var& a) {
  return detail::unary(
      a, [](float x) { return std::log(x); },
      [](float x, float) { return 1.0f / x; });
}

// ---- masking, softmax, normalization --------------------------------------

// mask entries set to `fill` where mask != 0; gradient is zero there.
inline Var masked_fill(const Var& a, std::vector<std::uint8_t> mask,
                       float fill) {
  detail::require(mask.size() == a.val().size(), "mask shape mismatch");
  Tensor out = a.val();
  for (std::size_t i = 0; i < mask.size(); ++i)
    if (mask[i]) out.v[i] = fill;
  auto n = detail::make_node(std::move(out), {a.ptr()});
  if (n->needs_grad) {
    Node* pa = a.node();
    n->pull = [pa, mask = std::move(mask)](Node& self) {
      Tensor& g = grad_ref(*pa);
      for (std::size_t i = 0; i < mask.size(); ++i)
        if (!mask[i]) g.v[i] += self.grad.v[i];
    };
  }
  return Var(n);
}

// Row-wise softmax; -inf entries produce exactly 0 probability. Rows that
// are entirely -inf come out all-zero.
inline Var softmax_rows(const Var& a) {
  Tensor out(a.rows(), a.cols());
  for (int r = 0; r < a.rows(); ++r) {
    float mx = -std::numeric_limits<float>::infinity();
    for (int c = 0; c < a.cols(); ++c) mx = std::max(mx, a.val().at(r, c));
    if (!(mx > -std::numeric_limits<float>::infinity())) continue;  // all -inf
    float denom = 0.0f;
    for (int c = 0; c < a.cols(); ++c) {
      const float e = std::exp(a.val().at(r, c) - mx);
      out.at(r, c) = e;
      denom += e;
    }
    for (int c = 0; c < a.cols(); ++c) out.at(r, c) /= denom;
  }
  auto n = detail::make_node(std::move(out), {a.ptr()});
  if (n->needs_grad) {
    Node* pa = a.node();
    n->pull = [pa](Node& self) {
      Tensor& g = grad_ref(*pa);
      for (int r = 0; r < self.val.rows; ++r) {
        float dot = 0.0f;
        for (int c = 0; c < self.val.cols; ++c)
          dot += self.grad.at(r, c) * self.val.at(r, c);
        for (int c = 0; c < self.val.cols; ++c)
          g.at(r, c) += self.val.at(r, c) * (self.grad.at(r, c) - dot);
      }
    };
  }
  return Var(n);
}

// Per-row (per-node) normalization with learnable gain/shift.
inline Var norm_rows(const Var& a, const Var& gain, const Var& shift,
                     float eps = 1e-5f) {
  detail::require(gain.rows() == 1 && gain.cols() == a.cols() &&
                      shift.rows() == 1 && shift.cols() == a.cols(),
                  "norm affine shape mismatch");
  const int C = a.cols();
  Tensor out(a.rows(), C);
  Tensor xhat(a.rows(), C);
  std::vector<float> inv_std(a.rows());
  for (int r = 0; r < a.rows(); ++r) {
    float mean = 0.0f;
    for (int c = 0; c < C; ++c) mean += a.val().at(r, c);
    mean /= float(C);
    float var = 0.0f;
    for (int c = 0; c < C; ++c) {
      const float d = a.val().at(r, c) - mean;
      var += d * d;
    }
    var /= float(C);
    const float is = 1.0f / std::sqrt(var + eps);
    inv_std[r] = is;
    for (int c = 0; c < C; ++c) {
      const float xh = (a.val().at(r, c) - mean) * is;
      xhat.at(r, c) = xh;
      out.at(r, c) = xh * gain.val().at(0, c) + shift.val().at(0, c);
    }
  }
  auto n = detail::make_node(std::move(out), {a.ptr(), gain.ptr(), shift.ptr()});
  if (n->needs_grad) {
    Node *pa = a.node(), *pg = gain.node(), *ps = shift.node();
    n->pull = [pa, pg, ps, xhat = std::move(xhat),
               inv_std = std::move(inv_std), C](Node& self) {
      if (pg->needs_grad) {
        Tensor& gg = grad_ref(*pg);
        for (int r = 0; r < self.val.rows; ++r)
          for (int c = 0; c < C; ++c)
            gg.at(0, c) += self.grad.at(r, c) * xhat.at(r, c);
      }
      if (ps->needs_grad) {
        Tensor& gs = grad_ref(*ps);
        for (int r = 0; r < self.val.rows; ++r)
          for (int c = 0; c < C; ++c) gs.at(0, c) += self.grad.at(r, c);
      }
      if (pa->needs_grad) {
        Tensor& ga = grad_ref(*pa);
        for (int r = 0; r < self.val.rows; ++r) {
          float sum_dy = 0.0f, sum_dy_xh = 0.0f;
          for (int c = 0; c < C; ++c) {
            const float dy = self.grad.at(r, c) * pg->val.at(0, c);
            sum_dy += dy;
            sum_dy_xh += dy * xhat.at(r, c);
          }
          for (int c = 0; c < C; ++c) {
            const float dy = self.grad.at(r, c) * pg->val.at(0, c);
            ga.at(r, c) += inv_std[r] * (dy - sum_dy / float(C) -
                                         xhat.at(r, c) * sum_dy_xh / float(C));
          }
        }
      }
    };
  }
  return Var(n);
}

// ---- attention kernels -----------------------------------------------------
// Rows are grouped per graph: Q/K/V of shape [B*N, d] hold B graphs of N
// nodes. Scores relate queries to keys within the same graph only.

// One query per graph: q [B, d], K [B*N, d] -> scores [B, N].
inline Var attn_scores(const Var& q, const Var& k, int group) {
  detail::require(q.cols() == k.cols(), "attention width mismatch");
  detail::require(group > 0 && k.rows() == q.rows() * group,
                  "attention group mismatch");
  const int b = q.rows(), d = q.cols();
  Tensor out(b, group);
  for (int i = 0; i < b; ++i)
    out.map().row(i) = (k.val().map().middleRows(i * group, group) *
                        q.val().map().row(i).transpose())
                           .transpose();
  auto n = detail::make_node(std::move(out), {q.ptr(), k.ptr()});
  if (n->needs_grad) {
    Node *pq = q.node(), *pk = k.node();
    n->pull = [pq, pk, group, b, d](Node& self) {
      (void)d;
      for (int i = 0; i < b; ++i) {
        if (pq->needs_grad)
          grad_ref(*pq).map().row(i).noalias() +=
              self.grad.map().row(i) * pk->val.map().middleRows(i * group, group);
        if (pk->needs_grad)
          grad_ref(*pk).map().middleRows(i * group, group).noalias() +=
              self.grad.map().row(i).transpose() * pq->val.map().row(i);
      }
    };
  }
  return Var(n);
}

// Mix values with one weight row per graph: p [B, N], V [B*N, d] -> [B, d].
inline Var attn_mix(const Var& p, const Var& v, int group) {
  detail::require(p.cols() == group && v.rows() == p.rows() * group,
                  "attention mix shape mismatch");
  const int b = p.rows(), d = v.cols();
  Tensor out(b, d);
  for (int i = 0; i < b; ++i)
    out.map().row(i).noalias() =
        p.val().map().row(i) * v.val().map().middleRows(i * group, group);
  auto n = detail::make_node(std::move(out), {p.ptr(), v.ptr()});
  if (n->needs_grad) {
    Node *pp = p.node(), *pv = v.node();
    n->pull = [pp, pv, group, b](Node& self) {
      for (int i = 0; i < b; ++i) {
        if (pp->needs_grad)
          grad_ref(*pp).map().row(i).noalias() +=
              self.grad.map().row(i) *
              pv->val.map().middleRows(i * group, group).transpose();
        if (pv->needs_grad)
          grad_ref(*pv).map().middleRows(i * group, group).noalias() +=
              pp->val.map().row(i).transpose() * self.grad.map().row(i);
      }
    };
  }
  return Var(n);
}

// All-pairs scores within each graph: Q, K [B*N, d] -> [B*N, N].
inline Var self_attn_scores(const Var& q, const Var& k, int group) {
  detail::require(q.cols() == k.cols() && q.rows() == k.rows(),
                  "self-attention shape mismatch");
  detail::require(group > 0 && q.rows() % group == 0,
                  "self-attention group mismatch");
  const int b = q.rows() / group;
  Tensor out(q.rows(), group);
  for (int i = 0; i < b; ++i)
    out.map().middleRows(i * group, group).noalias() =
        q.val().map().middleRows(i * group, group) *
        k.val().map().middleRows(i * group, group).transpose();
  auto n = detail::make_node(std::move(out), {q.ptr(), k.ptr()});
  if (n->needs_grad) {
    Node *pq = q.node(), *pk = k.node();
    n->pull = [pq, pk, group, b](Node& self) {
      for (int i = 0; i < b; ++i) {
        auto g = self.grad.map().middleRows(i * group, group);
        if (pq->needs_grad)
          grad_ref(*pq).map().middleRows(i * group, group).noalias() +=
              g * pk->val.map().middleRows(i * group, group);
        if (pk->needs_grad)
          grad_ref(*pk).map().middleRows(i * group, group).noalias() +=
              g.transpose() * pq->val.map().middleRows(i * group, group);
      }
    };
  }
  return Var(n);
}

// Mix per-node weight rows with values: P [B*N, N], V [B*N, d] -> [B*N, d].
inline Var self_attn_mix(const Var& p, const Var& v, int group) {
  detail::require(p.cols() == group && p.rows() == v.rows() &&
                      p.rows() % group == 0,
                  "self-attention mix shape mismatch");
  const int b = p.rows() / group;
  Tensor out(v.rows(), v.cols());
  for (int i = 0; i < b; ++i)
    out.map().middleRows(i * group, group).noalias() =
        p.val().map().middleRows(i * group, group) *
        v.val().map().middleRows(i * group, group);
  auto n = detail::make_node(std::move(out), {p.ptr(), v.ptr()});
  if (n->needs_grad) {
    Node *pp = p.node(), *pv = v.node();
    n->pull = [pp, pv, group, b](Node& self) {
      for (int i = 0; i < b; ++i) {
        auto g = self.grad.map().middleRows(i * group, group);
        if (pp->needs_grad)
          grad_ref(*pp).map().middleRows(i * group, group).noalias() +=
              g * pv->val.map().middleRows(i * group, group).transpose();
        if (pv->needs_grad)
          grad_ref(*pv).map().middleRows(i * group, group).noalias() +=
              pp->val.map().middleRows(i * group, group).transpose() * g;
      }
    };
  }
  return Var(n);
}

// ---- multivariate normal log-density via the Cholesky factor ---------------
// mu, ldiag: [G, D]; loff: [G, D*(D-1)/2] strict lower triangle, row-major
// (1,0), (2,0), (2,1), ...; x: [G*replicate, D] observations. Output:
// [G*replicate, 1] log densities. Internals run in double.
inline Var mvn_log_prob(const Var& mu, const Var& ldiag, const Var& loff,
                        Tensor x, int replicate) {
  const int g = mu.rows(), d = mu.cols();
  detail::require(ldiag.rows() == g && ldiag.cols() == d,
                  "mvn diagonal shape mismatch");
  detail::require(loff.rows() == g && loff.cols() == d * (d - 1) / 2,
                  "mvn off-diagonal shape mismatch");
  detail::require(replicate >= 1 && x.rows == g * replicate && x.cols == d,
                  "mvn observation shape mismatch");

  auto solve_row = [d](const float* ld, const float* lo, const float* xv,
                       const float* mv, std::vector<double>& y) {
    // forward substitution: L y = x - mu
    std::vector<std::vector<double>> L(d, std::vector<double>(d, 0.0));
    int flat = 0;
    for (int i = 0; i < d; ++i) {
      for (int j = 0; j < i; ++j) L[i][j] = lo[flat++];
      L[i][i] = ld[i];
      if (!(L[i][i] > 0))
        throw SingularFactor("non-positive diagonal in the Cholesky factor");
    }
    y.assign(d, 0.0);
    for (int i = 0; i < d; ++i) {
      double s = double(xv[i]) - double(mv[i]);
      for (int j = 0; j < i; ++j) s -= L[i][j] * y[j];
      y[i] = s / L[i][i];
    }
    return L;
  };

  Tensor out(g * replicate, 1);
  for (int r = 0; r < g * replicate; ++r) {
    const int gi = r / replicate;
    std::vector<double> y;
    auto L = solve_row(ldiag.val().v.data() + std::size_t(gi) * d,
                       loff.val().v.data() + std::size_t(gi) * loff.cols(),
                       x.v.data() + std::size_t(r) * d,
                       mu.val().v.data() + std::size_t(gi) * d, y);
    double q = 0.0, logdet = 0.0;
    for (int i = 0; i < d; ++i) {
      q += y[i] * y[i];
      logdet += std::log(L[i][i]);
    }
    out.at(r, 0) = static_cast<float>(
        -0.5 * q - logdet - 0.5 * d * std::log(2.0 * 3.14159265358979323846));
  }

  auto n = detail::make_node(std::move(out), {mu.ptr(), ldiag.ptr(), loff.ptr()});
  if (n->needs_grad) {
    Node *pm = mu.node(), *pd = ldiag.node(), *po = loff.node();
    n->pull = [pm, pd, po, x = std::move(x), replicate, d, g,
               solve_row](Node& self) {
      const int offc = d * (d - 1) / 2;
      for (int r = 0; r < g * replicate; ++r) {
        const double gr = self.grad.at(r, 0);
        if (gr == 0.0) continue;
        const int gi = r / replicate;
        std::vector<double> y;
        auto L = solve_row(pd->val.v.data() + std::size_t(gi) * d,
                           po->val.v.data() + std::size_t(gi) * offc,
                           x.v.data() + std::size_t(r) * d,
                           pm->val.v.data() + std::size_t(gi) * d, y);
        // z = L^-T y via backward substitution
        std::vector<double> z(d, 0.0);
        for (int i = d - 1; i >= 0; --i) {
          double s = y[i];
          for (int j = i + 1; j < d; ++j) s -= L[j][i] * z[j];
          z[i] = s / L[i][i];
        }
        if (pm->needs_grad) {
          Tensor& gm = grad_ref(*pm);
          for (int i = 0; i < d; ++i)
            gm.at(gi, i) += static_cast<float>(gr * z[i]);
        }
        if (pd->needs_grad) {
          Tensor& gd = grad_ref(*pd);
          for (int i = 0; i < d; ++i)
            gd.at(gi, i) +=
                static_cast<float>(gr * (z[i] * y[i] - 1.0 / L[i][i]));
        }
        if (po->needs_grad) {
          Tensor& go = grad_ref(*po);
          int flat = 0;
          for (int i = 0; i < d; ++i)
            for (int j = 0; j < i; ++j) {
              go.at(gi, flat) += static_cast<float>(gr * (z[i] * y[j]));
              ++flat;
            }
        }
      }
    };
  }
  return Var(n);
}

}  // namespace lrgen::nn
