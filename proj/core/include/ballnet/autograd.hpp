#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "ballnet/tensor.hpp"

namespace ballnet {

/// Value node on the tape. Gradients are allocated lazily on first use.
template <typename S>
struct Variable {
  Tensor<S> value;
  Tensor<S> grad;
  bool requires_grad = false;

  explicit Variable(Tensor<S> v, bool rg = false) : value(std::move(v)), requires_grad(rg) {}

  Tensor<S>& ensure_grad() {
    if (grad.shape != value.shape) grad = Tensor<S>(value.shape);
    return grad;
  }
  void zero_grad() {
    if (!grad.data.empty()) grad.fill(S(0));
  }
};

template <typename S>
using VarPtr = std::shared_ptr<Variable<S>>;

template <typename S>
VarPtr<S> make_var(Tensor<S> value, bool requires_grad = false) {
  return std::make_shared<Variable<S>>(std::move(value), requires_grad);
}

/// Reverse-mode tape. Operations push a closure that scatters the output
/// gradient into the input gradients; backward() replays them in reverse.
template <typename S>
class Tape {
 public:
  VarPtr<S> record(Tensor<S> value, bool requires_grad, std::function<void()> backward_step) {
    auto out = make_var<S>(std::move(value), requires_grad);
    if (requires_grad && backward_step) steps_.push_back(std::move(backward_step));
    return out;
  }

  void backward(const VarPtr<S>& root) {
    auto& g = root->ensure_grad();
    g.fill(S(1));
    for (auto it = steps_.rbegin(); it != steps_.rend(); ++it) (*it)();
  }

  void clear() { steps_.clear(); }
  size_t num_steps() const { return steps_.size(); }

 private:
  std::vector<std::function<void()>> steps_;
};

}  // namespace ballnet
