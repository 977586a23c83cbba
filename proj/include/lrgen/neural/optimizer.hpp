#pragma once

// Adam with global-norm gradient clipping. The step operates on whatever set
// of Params the caller exposes through a collect callback, so models just
// provide a for_each_param.

#include <cmath>
#include <vector>

#include "tensor.hpp"

namespace lrgen::nn {

struct AdamConfig {
  float lr = 1e-4f;
  float beta1 = 0.9f;
  float beta2 = 0.999f;
  float eps = 1e-8f;
  float clip_norm = 1.0f;  // <= 0 disables clipping
};

class Adam {
 public:
  explicit Adam(AdamConfig cfg = {}) : cfg_(cfg) {}

  // Applies one update to every param in `params`, then zeroes their grads.
  void step(const std::vector<Param*>& params) {
    ++t_;
    double sq = 0.0;
    for (Param* p : params) {
      if (p->grad.empty()) continue;
      for (float g : p->grad.v) sq += double(g) * g;
    }
    const double norm = std::sqrt(sq);
    float scale_g = 1.0f;
    if (cfg_.clip_norm > 0 && norm > cfg_.clip_norm)
      scale_g = float(cfg_.clip_norm / norm);

    const float bc1 = 1.0f - std::pow(cfg_.beta1, float(t_));
    const float bc2 = 1.0f - std::pow(cfg_.beta2, float(t_));
    for (Param* p : params) {
      if (p->grad.empty()) continue;
      if (p->adam_m.empty()) {
        p->adam_m = Tensor(p->value.rows, p->value.cols);
        p->adam_v = Tensor(p->value.rows, p->value.cols);
      }
      for (std::size_t i = 0; i < p->value.size(); ++i) {
        const float g = p->grad.v[i] * scale_g;
        p->adam_m.v[i] = cfg_.beta1 * p->adam_m.v[i] + (1 - cfg_.beta1) * g;
        p->adam_v.v[i] = cfg_.beta2 * p->adam_v.v[i] + (1 - cfg_.beta2) * g * g;
        const float mhat = p->adam_m.v[i] / bc1;
        const float vhat = p->adam_v.v[i] / bc2;
        p->value.v[i] -= cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps);
      }
      p->zero_grad();
    }
    last_grad_norm_ = norm;
  }

  [[nodiscard]] double last_grad_norm() const { return last_grad_norm_; }
  [[nodiscard]] long step_count() const { return t_; }

 private:
  AdamConfig cfg_;
  long t_ = 0;
  double last_grad_norm_ = 0.0;
};

}  // namespace lrgen::nn
