#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <span>
#include <vector>

#include "vitask/numerics/tensor.hpp"

namespace vitask::numerics {

struct Node;
using NodePtr = std::shared_ptr<Node>;

/// One vertex of the reverse-mode graph.
///
/// `backward` reads `grad` of the node it is attached to and accumulates
/// into the gradients of `parents`. A node with `detached == true` never
/// has parents, so nothing upstream of it can receive gradient.
struct Node {
  Tensor value;
  Tensor grad;
  bool has_grad = false;
  bool requires_grad = false;
  bool detached = false;
  bool is_leaf = true;
  std::uint64_t id = 0;
  std::vector<NodePtr> parents;
  std::function<void(Node&)> backward;

  /// Gradient buffer, zero-initialised on first use.
  Tensor& grad_buffer();
};

/// Handle to a graph node. Copies share the node.
class Var {
 public:
  Var() = default;
  explicit Var(NodePtr node) : node_(std::move(node)) {}

  /// A leaf that never receives gradient.
  static Var constant(Tensor value);
  /// A leaf that receives gradient while `requires_grad()` is set.
  static Var parameter(Tensor value);

  bool defined() const noexcept { return static_cast<bool>(node_); }
  const Tensor& value() const { return node_->value; }
  /// Leaves only: parameters are mutated in place by optimizers and checkers.
  Tensor& mutable_value();
  const Shape& shape() const { return node_->value.shape(); }

  bool requires_grad() const noexcept { return node_ && node_->requires_grad; }
  void set_requires_grad(bool on);
  bool detached() const noexcept { return node_ && node_->detached; }
  std::uint64_t id() const { return node_->id; }
  const NodePtr& node() const noexcept { return node_; }

 private:
  NodePtr node_;
};

using GradientMap = std::map<std::uint64_t, Tensor>;

/// Reverse pass from a single-element `loss`. Returns d loss / d p for every
/// requires-grad leaf reachable from `loss` through non-detached edges.
GradientMap backward(const Var& loss);

/// As above, but guarantees an entry for each of `params` (zeros when the
/// parameter is unreachable or only reachable through detached nodes).
GradientMap backward(const Var& loss, std::span<const Var> params);

/// Gradient lookup that yields zeros for absent entries.
Tensor gradient_of(const GradientMap& grads, const Var& param);

/// While alive, new nodes do not record parents (inference mode).
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

bool grad_enabled() noexcept;

namespace detail {
std::uint64_t next_node_id() noexcept;

/// Builds an op result. Parents are recorded only when grad mode is on and
/// at least one input requires grad.
Var make_result(Tensor value, std::vector<Var> inputs, std::function<void(Node&)> backward);
}  // namespace detail

}  // namespace vitask::numerics
