#pragma once

#include <cmath>
#include <vector>

#include "ballnet/autograd.hpp"

namespace ballnet {

/// Adaptive-moment optimizer over a fixed parameter group.
/// Per-component learning rates are realized with one instance per group.
template <typename S>
class Adam {
 public:
  Adam(std::vector<VarPtr<S>> params, double lr, double beta1 = 0.9, double beta2 = 0.999,
       double eps = 1e-8)
      : params_(std::move(params)), lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
    for (auto& p : params_) {
      m_.emplace_back(p->value.shape);
      v_.emplace_back(p->value.shape);
    }
  }

  void zero_grad() {
    for (auto& p : params_) p->zero_grad();
  }

  void step() {
    ++t_;
    const double bc1 = 1.0 - std::pow(beta1_, t_);
    const double bc2 = 1.0 - std::pow(beta2_, t_);
    for (size_t i = 0; i < params_.size(); ++i) {
      auto& p = params_[i];
      if (p->grad.data.empty()) continue;
      for (int64_t j = 0; j < p->value.size(); ++j) {
        double g = p->grad[j];
        double m = beta1_ * double(m_[i][j]) + (1.0 - beta1_) * g;
        double v = beta2_ * double(v_[i][j]) + (1.0 - beta2_) * g * g;
        m_[i][j] = S(m);
        v_[i][j] = S(v);
        p->value[j] -= S(lr_ * (m / bc1) / (std::sqrt(v / bc2) + eps_));
      }
    }
  }

  double lr() const { return lr_; }
  void set_lr(double lr) { lr_ = lr; }
  double beta1() const { return beta1_; }
  double beta2() const { return beta2_; }
  double eps() const { return eps_; }
  const std::vector<VarPtr<S>>& params() const { return params_; }

 private:
  std::vector<VarPtr<S>> params_;
  std::vector<Tensor<S>> m_, v_;
  double lr_, beta1_, beta2_, eps_;
  int64_t t_ = 0;
};

}  // namespace ballnet
