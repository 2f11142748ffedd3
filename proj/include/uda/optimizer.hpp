#pragma once

#include <unordered_map>
#include <vector>

#include "uda/tensor.hpp"

namespace uda::nn {

struct OptimizerState {
  double learning_rate = 0.01;
  double momentum = 0.9;
  double weight_decay = 5e-4;
  // One velocity buffer per parameter tensor, keyed by node identity.
  std::unordered_map<const detail::Node*, std::vector<double>> velocity;
};

// v <- momentum*v + grad + weight_decay*param;  param <- param - lr*v.
// Grads are zeroed afterwards. Throws if a parameter has no grad buffer.
void sgd_step(std::vector<Tensor>& params, OptimizerState& state);

class SgdOptimizer {
 public:
  SgdOptimizer() = default;
  SgdOptimizer(std::vector<Tensor> params, double lr, double momentum,
               double weight_decay);

  // Gives every registered parameter a zeroed grad buffer if missing, so a
  // step after a partial backward is well defined.
  void prepare_grads();
  void step();

  const std::vector<Tensor>& params() const { return params_; }
  OptimizerState& state() { return state_; }

 private:
  std::vector<Tensor> params_;
  OptimizerState state_;
};

}  // namespace uda::nn
