// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <numeric>
#include <span>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "camlab/core/error.hpp"

namespace camlab::ad {

using Shape = std::vector<std::size_t>;

inline std::size_t numel(const Shape& s) {
  return std::accumulate(s.begin(), s.end(), std::size_t{1}, std::multiplies<>());
}

inline std::string shape_str(const Shape& s) {
  std::string out = "[";
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) out += "x";
    out += std::to_string(s[i]);
  }
  return out + "]";
}

namespace detail {

/// One recorded value. Non-leaf nodes hold their inputs and a closure that
/// pushes this node's grad into the inputs' grads.
struct Node {
  Shape shape;
  std::vector<double> data;
  std::vector<double> grad;  // empty until needed
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> inputs;
  std::function<void(Node&)> backward_fn;

  bool is_leaf() const { return inputs.empty(); }

  void ensure_grad() {
    if (grad.size() != data.size()) grad.assign(data.size(), 0.0);
  }
};

}  // namespace detail

/// Dense row-major float64 tensor with reverse-mode gradient tracking.
/// Copies are shallow handles; use `detach()` or `clone()` for a new value.
class Tensor {
 public:
  Tensor() = default;

  Tensor(Shape shape, std::vector<double> data, bool requires_grad = false)
      : node_(std::make_shared<detail::Node>()) {
    if (shape.empty()) shape = {1};
    for (auto d : shape)
      if (d == 0) throw DimensionError("tensor dimensions must be positive, got " + shape_str(shape));
    if (numel(shape) != data.size())
      throw DimensionError("shape " + shape_str(shape) + " does not match " + std::to_string(data.size()) +
                           " values");
    node_->shape = std::move(shape);
    node_->data = std::move(data);
    node_->requires_grad = requires_grad;
  }

  static Tensor zeros(Shape shape, bool requires_grad = false) {
    const auto n = numel(shape);
    return Tensor(std::move(shape), std::vector<double>(n, 0.0), requires_grad);
  }

  static Tensor full(Shape shape, double value, bool requires_grad = false) {
    const auto n = numel(shape);
    return Tensor(std::move(shape), std::vector<double>(n, value), requires_grad);
  }

  static Tensor scalar(double v, bool requires_grad = false) { return Tensor({1}, {v}, requires_grad); }

  static Tensor row(std::vector<double> v, bool requires_grad = false) {
    const auto n = v.size();
    return Tensor({1, n}, std::move(v), requires_grad);
  }

  static Tensor matrix(std::size_t rows, std::size_t cols, std::vector<double> v, bool requires_grad = false) {
    return Tensor({rows, cols}, std::move(v), requires_grad);
  }

  static Tensor identity(std::size_t n) {
    auto t = zeros({n, n});
    for (std::size_t i = 0; i < n; ++i) t.node_->data[i * n + i] = 1.0;
    return t;
  }

  bool defined() const { return static_cast<bool>(node_); }
  const Shape& shape() const { return node_->shape; }
  std::size_t dim() const { return node_->shape.size(); }
  std::size_t size() const { return node_->data.size(); }
  /// Rows/cols of the tensor viewed as a matrix; 1-D tensors are a single row.
  std::size_t rows() const { return dim() == 1 ? 1 : node_->shape[0]; }
  std::size_t cols() const { return dim() == 1 ? node_->shape[0] : size() / node_->shape[0]; }

  std::span<const double> data() const { return node_->data; }
  /// Writable storage. Only meaningful for leaves (parameters, inputs).
  std::span<double> mutable_data() { return node_->data; }
  const std::vector<double>& values() const { return node_->data; }

  double operator[](std::size_t i) const { return node_->data[i]; }
  double at(std::size_t r, std::size_t c) const { return node_->data[r * cols() + c]; }
  double item() const {
    if (size() != 1) throw ContractError("item() on tensor of shape " + shape_str(shape()));
    return node_->data[0];
  }

  bool requires_grad() const { return node_->requires_grad; }
  bool has_grad() const { return node_->grad.size() == node_->data.size(); }
  std::span<const double> grad() const { return node_->grad; }
  std::span<double> mutable_grad() {
    node_->ensure_grad();
    return node_->grad;
  }
  void zero_grad() { node_->grad.clear(); }

  bool is_leaf() const { return node_->is_leaf(); }

  /// Same values, no history.
  Tensor detach() const { return Tensor(shape(), node_->data, false); }
  Tensor clone(bool requires_grad) const { return Tensor(shape(), node_->data, requires_grad); }

  detail::Node* node() const { return node_.get(); }
  const std::shared_ptr<detail::Node>& node_ptr() const { return node_; }

  /// Builds a recorded result. `backward` is dropped when no input needs a grad.
  static Tensor make_result(Shape shape, std::vector<double> data, std::vector<Tensor> inputs,
                            std::function<void(detail::Node&)> backward) {
    Tensor out(std::move(shape), std::move(data));
    bool needs = false;
    for (const auto& in : inputs) needs = needs || in.requires_grad();
    if (needs) {
      out.node_->requires_grad = true;
      out.node_->inputs.reserve(inputs.size());
      for (auto& in : inputs) out.node_->inputs.push_back(in.node_);
      out.node_->backward_fn = std::move(backward);
    }
    return out;
  }

 private:
  std::shared_ptr<detail::Node> node_;
};

/// Grad buffer of input `i` of a node, allocated on demand; nullptr when that
/// input does not participate in differentiation.
inline double* input_grad(detail::Node& n, std::size_t i) {
  auto& in = *n.inputs[i];
  if (!in.requires_grad) return nullptr;
  in.ensure_grad();
  return in.grad.data();
}

/// Reverse sweep from a scalar. Interior grads are reset at the start of each
/// call; leaf grads accumulate until `zero_grad()`.
inline void backward(const Tensor& loss) {
  if (!loss.defined() || loss.size() != 1)
    throw ContractError("backward() needs a scalar loss, got shape " +
                        (loss.defined() ? shape_str(loss.shape()) : std::string("<undefined>")));
  auto* root = loss.node();
  if (!root->requires_grad) return;

  // Iterative post-order DFS gives a topological order with each node once.
  std::vector<detail::Node*> order;
  std::unordered_set<detail::Node*> seen;
  std::vector<std::pair<detail::Node*, std::size_t>> stack{{root, 0}};
  seen.insert(root);
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->inputs.size()) {
      auto* child = node->inputs[next++].get();
      if (child->requires_grad && seen.insert(child).second) stack.emplace_back(child, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  for (auto* n : order) {
    if (n->is_leaf()) {
      n->ensure_grad();
    } else {
      n->grad.assign(n->data.size(), 0.0);
    }
  }
  root->grad[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    if ((*it)->backward_fn) (*it)->backward_fn(**it);
  }
}

}  // namespace camlab::ad
