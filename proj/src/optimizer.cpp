#include "uda/optimizer.hpp"

#include <stdexcept>
#include <string>

namespace uda::nn {

void sgd_step(std::vector<Tensor>& params, OptimizerState& state) {
  for (auto& p : params) {
    detail::Node* node = p.node();
    if (!node->requires_grad) {
      throw std::invalid_argument("sgd_step: tensor is not a parameter");
    }
    if (node->grad.empty()) {
      throw std::invalid_argument(
          "sgd_step: parameter has no gradient; call backward() first");
    }
    auto& v = state.velocity[node];
    if (v.empty()) v.assign(node->values.size(), 0.0);
    for (std::size_t i = 0; i < node->values.size(); ++i) {
      v[i] = state.momentum * v[i] + node->grad[i] +
             state.weight_decay * node->values[i];
      node->values[i] -= state.learning_rate * v[i];
    }
    std::fill(node->grad.begin(), node->grad.end(), 0.0);
  }
}

SgdOptimizer::SgdOptimizer(std::vector<Tensor> params, double lr,
                           double momentum, double weight_decay)
    : params_(std::move(params)) {
  state_.learning_rate = lr;
  state_.momentum = momentum;
  state_.weight_decay = weight_decay;
}

void SgdOptimizer::prepare_grads() {
  for (auto& p : params_) {
    detail::Node* node = p.node();
    if (node->grad.empty()) node->grad.assign(node->values.size(), 0.0);
  }
}

void SgdOptimizer::step() { sgd_step(params_, state_); }

}  // namespace uda::nn
