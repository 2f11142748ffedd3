#include "uda/tensor.hpp"

#include <cmath>
#include <stdexcept>
#include <unordered_set>

namespace uda::nn {

namespace detail {

namespace {
thread_local bool g_no_grad = false;
}  // namespace

bool no_grad_active() { return g_no_grad; }

}  // namespace detail

NoGradGuard::NoGradGuard() : previous_(detail::g_no_grad) { detail::g_no_grad = true; }
NoGradGuard::~NoGradGuard() { detail::g_no_grad = previous_; }

static std::shared_ptr<detail::Node> make_leaf(std::vector<int> shape,
                                               std::vector<double> values,
                                               bool requires_grad) {
  if (shape.empty()) throw std::invalid_argument("tensor: shape must not be empty");
  std::size_t n = 1;
  for (int d : shape) {
    if (d <= 0) throw std::invalid_argument("tensor: shape dimensions must be positive");
    n *= static_cast<std::size_t>(d);
  }
  if (n != values.size())
    throw std::invalid_argument("tensor: shape/value count mismatch");
  for (double v : values) {
    if (!std::isfinite(v)) throw std::invalid_argument("tensor: non-finite value");
  }
  auto node = std::make_shared<detail::Node>();
  node->shape = std::move(shape);
  node->values = std::move(values);
  node->requires_grad = requires_grad;
  return node;
}

Tensor Tensor::constant(std::vector<int> shape, std::vector<double> values) {
  return from_node(make_leaf(std::move(shape), std::move(values), false));
}

Tensor Tensor::param(std::vector<int> shape, std::vector<double> values) {
  return from_node(make_leaf(std::move(shape), std::move(values), !detail::no_grad_active()));
}

Tensor Tensor::zeros(std::vector<int> shape) {
  std::size_t n = 1;
  for (int d : shape) {
    if (d <= 0) throw std::invalid_argument("tensor: shape dimensions must be positive");
    n *= static_cast<std::size_t>(d);
  }
  return constant(std::move(shape), std::vector<double>(n, 0.0));
}

Tensor Tensor::scalar(double value) { return constant({1}, {value}); }

Tensor Tensor::from_node(std::shared_ptr<detail::Node> node) {
  Tensor t;
  t.node_ = std::move(node);
  return t;
}

const std::vector<int>& Tensor::shape() const {
  if (!node_) throw std::logic_error("tensor: undefined");
  return node_->shape;
}

std::size_t Tensor::size() const { return node_ ? node_->size() : 0; }

int Tensor::rows() const {
  const auto& s = shape();
  if (s.size() == 1) return s[0];
  if (s.size() == 2) return s[0];
  throw std::invalid_argument("tensor: rows() needs rank 1 or 2");
}

int Tensor::cols() const {
  const auto& s = shape();
  if (s.size() == 1) return 1;
  if (s.size() == 2) return s[1];
  throw std::invalid_argument("tensor: cols() needs rank 1 or 2");
}

std::span<const double> Tensor::values() const& {
  if (!node_) throw std::logic_error("tensor: undefined");
  return {node_->values.data(), node_->values.size()};
}

std::vector<double> Tensor::values() && {
  if (!node_) throw std::logic_error("tensor: undefined");
  return node_->values;
}

std::span<double> Tensor::values_mut() {
  if (!node_) throw std::logic_error("tensor: undefined");
  return {node_->values.data(), node_->values.size()};
}

double Tensor::value_at(std::size_t i) const { return values()[i]; }

double Tensor::item() const {
  if (size() != 1) throw std::invalid_argument("tensor: item() needs a scalar");
  return node_->values[0];
}

bool Tensor::requires_grad() const { return node_ && node_->requires_grad; }

bool Tensor::has_grad() const { return node_ && node_->grad.size() == node_->values.size(); }

std::span<const double> Tensor::grad() const {
  if (!has_grad()) throw std::logic_error("tensor: no grad present");
  return {node_->grad.data(), node_->grad.size()};
}

void Tensor::clear_grad() {
  if (node_) node_->grad.clear();
}

void Tensor::ensure_grad() {
  if (!node_) throw std::logic_error("tensor: undefined");
  node_->ensure_grad();
}

Tensor Tensor::detach() const {
  if (!node_) throw std::logic_error("tensor: undefined");
  return constant(node_->shape, node_->values);
}

void Tensor::backward() const {
  if (!node_) throw std::logic_error("tensor: undefined");
  if (node_->size() != 1)
    throw std::invalid_argument("backward: root must be a scalar");
  if (!node_->requires_grad) return;

  // Iterative post-order DFS for a topological order.
  std::vector<detail::Node*> topo;
  std::unordered_set<detail::Node*> visited;
  struct Frame {
    detail::Node* node;
    std::size_t next_parent;
  };
  std::vector<Frame> stack;
  stack.push_back({node_.get(), 0});
  visited.insert(node_.get());
  while (!stack.empty()) {
    Frame& f = stack.back();
    if (f.next_parent < f.node->parents.size()) {
      detail::Node* p = f.node->parents[f.next_parent++].get();
      if (visited.insert(p).second) stack.push_back({p, 0});
    } else {
      topo.push_back(f.node);
      stack.pop_back();
    }
  }

  // Interior adjoints are per-call scratch; leaf grads persist so repeated
  // backward calls accumulate. Constant leaves never get grad buffers.
  for (detail::Node* n : topo) {
    if (n->is_leaf()) {
      if (n->requires_grad) n->ensure_grad();
    } else {
      n->grad.assign(n->size(), 0.0);
    }
  }
  node_->grad[0] += 1.0;

  for (auto it = topo.rbegin(); it != topo.rend(); ++it) {
    detail::Node* n = *it;
    if (n->backward) n->backward(*n);
  }
}

void check_finite(const Tensor& t, const std::string& what) {
  for (double v : t.values()) {
    if (!std::isfinite(v))
      throw std::invalid_argument(what + ": non-finite value encountered");
  }
}

}  // namespace uda::nn
