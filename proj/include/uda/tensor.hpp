#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace uda::nn {

namespace detail {

// One node of the dynamically built computation graph. Tensors are thin
// shared handles to nodes; an op's output node keeps its inputs alive via
// `parents`, so dropping every handle to a step's loss frees the whole graph
// while parameter leaves (held by the layers) survive.
struct Node {
  std::vector<int> shape;
  std::vector<double> values;
  // Same length as values once this node has taken part in a backward pass;
  // empty until then.
  std::vector<double> grad;
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  // Propagates this node's grad into its parents' grads.
  std::function<void(Node&)> backward;

  std::size_t size() const { return values.size(); }
  bool is_leaf() const { return parents.empty(); }
  void ensure_grad() {
    if (grad.size() != values.size()) grad.assign(values.size(), 0.0);
  }
};

bool no_grad_active();

}  // namespace detail

// While a guard is alive, newly built ops produce constants: no parents, no
// backward functions. Used for evaluation passes.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

class Tensor {
 public:
  Tensor() = default;

  // Leaf constructors. Both validate shape/value-count agreement and reject
  // non-finite values.
  static Tensor constant(std::vector<int> shape, std::vector<double> values);
  static Tensor param(std::vector<int> shape, std::vector<double> values);
  static Tensor zeros(std::vector<int> shape);
  static Tensor scalar(double value);

  bool defined() const { return node_ != nullptr; }
  const std::vector<int>& shape() const;
  std::size_t size() const;
  // 2-D accessors; throw unless rank is 2 (or 1, where cols()==1).
  int rows() const;
  int cols() const;

  // The span aliases node storage, so it is only offered on lvalues; a
  // temporary's storage dies with the expression, and the rvalue overload
  // hands back an owning copy instead.
  std::span<const double> values() const&;
  std::vector<double> values() &&;
  // Mutable view for in-place parameter updates. Only meaningful on leaves.
  std::span<double> values_mut();
  double value_at(std::size_t i) const;
  // Scalar extraction; throws on size != 1.
  double item() const;

  bool requires_grad() const;
  bool has_grad() const;
  std::span<const double> grad() const;
  void clear_grad();
  // Allocates a zero grad buffer if none is present.
  void ensure_grad();

  // Constant leaf with a copy of the current values.
  Tensor detach() const;

  // Reverse-mode sweep from a scalar. Parameter (leaf) grads accumulate
  // across calls; interior grads are refreshed per call.
  void backward() const;

  detail::Node* node() const { return node_.get(); }
  std::shared_ptr<detail::Node> handle() const { return node_; }
  static Tensor from_node(std::shared_ptr<detail::Node> node);

 private:
  std::shared_ptr<detail::Node> node_;
};

// Throws if any value is NaN/Inf; `what` names the offending op in the error.
void check_finite(const Tensor& t, const std::string& what);

}  // namespace uda::nn
