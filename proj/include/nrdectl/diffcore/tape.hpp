#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <vector>

#include "nrdectl/diffcore/tensor.hpp"

namespace nrdectl {

class Tape;

namespace detail {

struct Node {
  Tensor value;
  Tensor grad;  // empty-shaped until first accumulation
  bool has_grad = false;
  bool requires_grad = false;
  const char* op = "constant";
  std::vector<Node*> inputs;                   // owned by the tape
  std::vector<std::shared_ptr<Node>> held;     // untracked inputs kept for backward
  std::function<void(Node&)> backward;
  Tape* tape = nullptr;
  std::uint64_t generation = 0;
  std::size_t index = 0;

  /// Gradient accumulator of this node, zero-initialised on first use.
  Tensor& grad_buffer();
};

}  // namespace detail

/// Handle to a value that may be recorded on a tape.
///
/// Vars are cheap to copy. A Var created without a tape (see `constant`) or
/// produced only from constants carries no gradient record.
class Var {
 public:
  Var() = default;
  explicit Var(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}

  explicit operator bool() const noexcept { return static_cast<bool>(node_); }
  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }
  bool requires_grad() const noexcept { return node_ && node_->requires_grad; }
  detail::Node* node() const noexcept { return node_.get(); }
  const std::shared_ptr<detail::Node>& shared() const noexcept { return node_; }

 private:
  std::shared_ptr<detail::Node> node_;
};

/// Untracked value.
Var constant(Tensor value);

/// Ordered record of differentiable operations for one batch.
///
/// Nodes are appended in creation order, so inputs always precede their
/// consumers; `backward` walks the record once in reverse. Only leaf gradients
/// survive a backward pass. `clear` invalidates every handle recorded so far.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var leaf(Tensor value);
  void backward(const Var& root);
  /// Gradient of a leaf after `backward`; zeros if it was not reached.
  Tensor grad(const Var& leaf) const;
  void clear();
  std::size_t size() const noexcept { return nodes_.size(); }
  std::uint64_t generation() const noexcept { return generation_; }

  /// Records `value` as the result of `op`. Returns an untracked Var when no
  /// input requires a gradient.
  static Var record(Tensor value, const char* op, std::vector<Var> inputs,
                    std::function<void(detail::Node&)> backward);

 private:
  void append(const std::shared_ptr<detail::Node>& node);

  std::vector<std::shared_ptr<detail::Node>> nodes_;
  std::uint64_t generation_ = 1;
};

/// Enables finite-value checks on every recorded op (off by default).
void set_debug_checks(bool enabled);
bool debug_checks();

}  // namespace nrdectl
