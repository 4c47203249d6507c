#pragma once

#include <vector>

#include "unlearn/tensor.hpp"

namespace unlearn {

// Classic momentum, coupled weight decay:
//   v <- momentum * v + grad + weight_decay * param
//   param <- param - lr * v
// No dampening, no Nesterov.
template <typename T>
void sgd_momentum_step(TensorT<T>& param, const TensorT<T>& grad, TensorT<T>& velocity, T lr, T momentum,
                       T weight_decay) {
  if (!same_shape(param, grad) || !same_shape(param, velocity))
    throw std::invalid_argument("sgd_momentum_step: shape mismatch param " + shape_str(param.shape) +
                                " grad " + shape_str(grad.shape) + " velocity " + shape_str(velocity.shape));
  check_finite(grad, "sgd_momentum_step gradient");
  for (std::size_t i = 0; i < param.size(); ++i) {
    velocity.data[i] = momentum * velocity.data[i] + grad.data[i] + weight_decay * param.data[i];
    param.data[i] -= lr * velocity.data[i];
  }
}

// Velocity buffers aligned with a fixed parameter enumeration order.
template <typename T>
struct OptimStateT {
  T lr = T(0.001);
  T momentum = T(0.9);
  T weight_decay = T(0);
  std::vector<TensorT<T>> velocity;

  template <typename ParamEnumerable>
  static OptimStateT init(ParamEnumerable& params, T lr, T momentum, T weight_decay) {
    OptimStateT s;
    s.lr = lr;
    s.momentum = momentum;
    s.weight_decay = weight_decay;
    params.for_each_param([&](const char*, TensorT<T>& p, auto) { s.velocity.push_back(zeros<T>(p.shape)); });
    return s;
  }
};

}  // namespace unlearn
