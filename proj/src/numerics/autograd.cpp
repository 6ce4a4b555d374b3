#include "vitask/numerics/autograd.hpp"

#include <atomic>
#include <stdexcept>
#include <unordered_set>
#include <utility>

namespace vitask::numerics {

namespace {
thread_local bool g_grad_enabled = true;
std::atomic<std::uint64_t> g_next_id{1};
}  // namespace

Tensor& Node::grad_buffer() {
  if (!has_grad) {
    grad = Tensor(value.shape(), 0.0);
    has_grad = true;
  }
  return grad;
}

Var Var::constant(Tensor value) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  node->id = detail::next_node_id();
  return Var(std::move(node));
}

Var Var::parameter(Tensor value) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  node->id = detail::next_node_id();
  node->requires_grad = true;
  return Var(std::move(node));
}

Tensor& Var::mutable_value() {
  if (!node_->is_leaf) throw std::logic_error("only leaf values may be mutated");
  return node_->value;
}

void Var::set_requires_grad(bool on) {
  if (!node_->is_leaf) throw std::logic_error("requires_grad can only be toggled on leaves");
  node_->requires_grad = on;
}

bool grad_enabled() noexcept { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

namespace detail {

std::uint64_t next_node_id() noexcept { return g_next_id.fetch_add(1, std::memory_order_relaxed); }

Var make_result(Tensor value, std::vector<Var> inputs, std::function<void(Node&)> backward) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  node->id = next_node_id();
  node->is_leaf = false;
  bool needs = false;
  if (g_grad_enabled) {
    for (const Var& in : inputs) needs = needs || in.requires_grad();
  }
  if (needs) {
    node->requires_grad = true;
    node->parents.reserve(inputs.size());
    for (Var& in : inputs) node->parents.push_back(in.node());
    node->backward = std::move(backward);
  }
  return Var(std::move(node));
}

}  // namespace detail

GradientMap backward(const Var& loss) {
  if (!loss.defined()) throw std::invalid_argument("backward on undefined variable");
  if (!loss.value().is_scalar()) {
    throw std::invalid_argument("backward requires a scalar loss, got shape " + shape_string(loss.shape()));
  }
  GradientMap out;
  if (!loss.requires_grad()) return out;

  // Iterative post-order DFS; parent order fixes the traversal so repeated
  // passes accumulate in the same sequence.
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, std::size_t>> stack;
  stack.emplace_back(loss.node().get(), 0);
  visited.insert(loss.node().get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node* parent = node->parents[next++].get();
      if (parent->requires_grad && !visited.count(parent)) {
        visited.insert(parent);
        stack.emplace_back(parent, 0);
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  for (Node* n : order) n->has_grad = false;
  Node& root = *loss.node();
  root.grad = Tensor(root.value.shape(), 1.0);
  root.has_grad = true;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->is_leaf) continue;
    if (n->has_grad && n->backward) n->backward(*n);
  }
  for (Node* n : order) {
    if (n->is_leaf && n->requires_grad) {
      out.emplace(n->id, n->has_grad ? std::move(n->grad) : Tensor(n->value.shape(), 0.0));
      n->has_grad = false;
    } else if (!n->is_leaf) {
      // Release intermediate buffers; the graph may be reused for another pass.
      n->grad = Tensor();
      n->has_grad = false;
    }
  }
  return out;
}

GradientMap backward(const Var& loss, std::span<const Var> params) {
  GradientMap grads = backward(loss);
  for (const Var& p : params) {
    if (!grads.count(p.id())) grads.emplace(p.id(), Tensor(p.shape(), 0.0));
  }
  return grads;
}

Tensor gradient_of(const GradientMap& grads, const Var& param) {
  auto it = grads.find(param.id());
  if (it == grads.end()) return Tensor(param.shape(), 0.0);
  return it->second;
}

}  // namespace vitask::numerics
