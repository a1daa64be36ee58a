#pragma once

#include <functional>
#include <memory>
#include <unordered_set>
#include <vector>

#include "uvmakeup/nn/tensor.hpp"

namespace uvmakeup::nn {

namespace detail {
inline bool& grad_mode() {
  thread_local bool enabled = true;
  return enabled;
}
}  // namespace detail

/// Disables graph recording on the current thread while alive.
class NoGradGuard {
 public:
  NoGradGuard() : previous_(detail::grad_mode()) { detail::grad_mode() = false; }
  ~NoGradGuard() { detail::grad_mode() = previous_; }
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

template <class T>
struct Node {
  Tensor<T> value;
  Tensor<T> grad;
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward;

  Tensor<T>& ensure_grad() {
    if (!grad.defined()) grad = Tensor<T>(value.shape());
    return grad;
  }
};

/// Handle to a tape node. Copies share the node.
template <class T>
class Var {
 public:
  Var() = default;
  explicit Var(Tensor<T> value, bool requires_grad = false)
      : node_(std::make_shared<Node<T>>()) {
    node_->value = std::move(value);
    node_->requires_grad = requires_grad;
  }

  /// Records an op result. The backward closure receives the result node and
  /// accumulates into `node.parents[i]->ensure_grad()`.
  static Var from_op(Tensor<T> value, std::vector<Var> inputs,
                     std::function<void(Node<T>&)> backward) {
    Var out(std::move(value));
    if (!detail::grad_mode()) return out;
    bool any = false;
    for (const Var& v : inputs) any = any || (v.defined() && v.requires_grad());
    if (!any) return out;
    out.node_->requires_grad = true;
    out.node_->parents.reserve(inputs.size());
    for (const Var& v : inputs) out.node_->parents.push_back(v.node_);
    out.node_->backward = std::move(backward);
    return out;
  }

  bool defined() const noexcept { return node_ != nullptr; }
  bool requires_grad() const noexcept { return node_ && node_->requires_grad; }
  const Tensor<T>& value() const { return node_->value; }
  Tensor<T>& mutable_value() { return node_->value; }
  const Tensor<T>& grad() const { return node_->grad; }
  bool has_grad() const { return node_ && node_->grad.defined(); }
  const Shape& shape() const { return node_->value.shape(); }
  T item() const { return node_->value.item(); }
  Node<T>* node() const noexcept { return node_.get(); }

  void zero_grad() {
    if (node_) node_->grad = Tensor<T>();
  }

  /// Reverse-mode sweep from a scalar root.
  void backward() const {
    require(value().size() == 1, ErrorCategory::shape_mismatch, "backward() needs a scalar root");
    if (!requires_grad()) return;
    std::vector<Node<T>*> order;
    std::unordered_set<Node<T>*> seen;
    std::vector<std::pair<Node<T>*, std::size_t>> stack{{node_.get(), 0}};
    seen.insert(node_.get());
    while (!stack.empty()) {
      auto& [node, next] = stack.back();
      if (next < node->parents.size()) {
        Node<T>* parent = node->parents[next++].get();
        if (parent != nullptr && parent->requires_grad && seen.insert(parent).second) {
          stack.emplace_back(parent, 0);
        }
      } else {
        order.push_back(node);
        stack.pop_back();
      }
    }
    node_->ensure_grad();
    node_->grad[0] += T{1};
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
      Node<T>* node = *it;
      if (node->backward && node->grad.defined()) node->backward(*node);
    }
  }

 private:
  std::shared_ptr<Node<T>> node_;
};

/// Accumulates `g` into parent `i` of `node` when that parent tracks gradients.
template <class T>
Tensor<T>* parent_grad(Node<T>& node, std::size_t i) {
  auto& p = node.parents[i];
  if (!p || !p->requires_grad) return nullptr;
  return &p->ensure_grad();
}

}  // namespace uvmakeup::nn
