#include "nrdectl/diffcore/tape.hpp"

#include <atomic>

#include "nrdectl/errors.hpp"

namespace nrdectl {

namespace {
std::atomic<bool> g_debug_checks{false};
}

void set_debug_checks(bool enabled) { g_debug_checks.store(enabled, std::memory_order_relaxed); }
bool debug_checks() { return g_debug_checks.load(std::memory_order_relaxed); }

Tensor& detail::Node::grad_buffer() {
  if (!has_grad) {
    grad = Tensor(value.shape(), 0.0);
    has_grad = true;
  }
  return grad;
}

const Tensor& Var::value() const {
  if (!node_) throw TapeError("use of an empty Var");
  return node_->value;
}

Var constant(Tensor value) {
  auto node = std::make_shared<detail::Node>();
  node->value = std::move(value);
  return Var(std::move(node));
}

Var Tape::leaf(Tensor value) {
  auto node = std::make_shared<detail::Node>();
  node->value = std::move(value);
  node->requires_grad = true;
  node->op = "leaf";
  append(node);
  return Var(std::move(node));
}

void Tape::append(const std::shared_ptr<detail::Node>& node) {
  node->tape = this;
  node->generation = generation_;
  node->index = nodes_.size();
  nodes_.push_back(node);
}

Var Tape::record(Tensor value, const char* op, std::vector<Var> inputs,
                 std::function<void(detail::Node&)> backward) {
  if (debug_checks() && !value.all_finite()) {
    throw NumericalError(std::string("non-finite output from op '") + op + "'");
  }
  Tape* tape = nullptr;
  std::uint64_t generation = 0;
  for (const auto& in : inputs) {
    if (!in) throw TapeError(std::string("empty input to op '") + op + "'");
    if (!in.requires_grad()) continue;
    auto* n = in.node();
    if (n->tape == nullptr || n->generation != n->tape->generation_) {
      throw TapeError(std::string("op '") + op + "' received a Var from a stale tape");
    }
    if (tape && (tape != n->tape || generation != n->generation)) {
      throw TapeError(std::string("op '") + op + "' mixes Vars from different tapes");
    }
    tape = n->tape;
    generation = n->generation;
  }
  auto node = std::make_shared<detail::Node>();
  node->value = std::move(value);
  node->op = op;
  if (tape) {
    node->requires_grad = true;
    node->backward = std::move(backward);
    node->inputs.reserve(inputs.size());
    for (auto& in : inputs) {
      node->inputs.push_back(in.node());
      if (!in.requires_grad()) node->held.push_back(in.shared());
    }
    tape->append(node);
  }
  return Var(std::move(node));
}

void Tape::backward(const Var& root) {
  if (!root) throw TapeError("backward on an empty Var");
  if (root.value().size() != 1) {
    throw TapeError("backward requires a scalar root, got shape " + shape_str(root.shape()));
  }
  auto* r = root.node();
  if (!r->requires_grad) return;
  if (r->tape != this || r->generation != generation_) {
    throw TapeError("backward on a root recorded before the tape was cleared (stale tape)");
  }
  for (auto& n : nodes_) {
    n->has_grad = false;
    n->grad = Tensor();
  }
  r->grad_buffer()[0] = 1.0;
  for (std::size_t i = r->index + 1; i-- > 0;) {
    auto& node = *nodes_[i];
    if (!node.has_grad || !node.backward) continue;
    node.backward(node);
    node.grad = Tensor();
    node.has_grad = false;
  }
}

Tensor Tape::grad(const Var& leaf) const {
  if (!leaf) throw TapeError("grad of an empty Var");
  auto* n = leaf.node();
  if (n->tape == this && n->generation == generation_ && n->has_grad) return n->grad;
  return Tensor(leaf.shape(), 0.0);
}

void Tape::clear() {
  while (!nodes_.empty()) nodes_.pop_back();
  ++generation_;
}

}  // namespace nrdectl
