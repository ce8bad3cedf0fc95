#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <vector>

#include "lranker/tensor.hpp"

namespace lranker::num {

/// Handle to a value recorded on a Tape. Only meaningful for the tape that issued it.
struct Var {
  std::size_t id = 0;
};

/// Reverse-mode recorder. Ops are appended in forward order; backward() walks
/// them in exact reverse order and accumulates gradients additively, so a
/// value consumed by several ops receives the sum of their contributions.
///
/// Parameters are bound by reference: the tape reads the caller's tensor
/// without copying and accumulates the gradient straight into the caller's
/// sink. Both must outlive the tape. A tape is confined to one thread.
class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, std::size_t self)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;
  Tape(Tape&&) = default;
  Tape& operator=(Tape&&) = default;

  /// Value that never receives a gradient (input features, labels).
  Var constant(Tensor2 value);
  /// Owned leaf whose gradient is kept on the tape (see grad()).
  Var input(Tensor2 value);
  /// Borrowed leaf; gradient accumulates into `grad_sink` (same shape as `value`).
  /// A null sink makes the parameter behave like a constant.
  Var parameter(const Tensor2& value, Tensor2* grad_sink);

  /// Records an op result. `backward` is skipped when no input requires a gradient.
  Var push(Tensor2 value, std::initializer_list<Var> inputs, BackwardFn backward);

  const Tensor2& value(Var v) const;
  bool requires_grad(Var v) const { return nodes_[v.id].requires_grad; }

  /// Gradient accumulator for `v`; allocated as zeros on first access.
  Tensor2& grad(Var v);
  Tensor2& grad(std::size_t id) { return grad(Var{id}); }
  /// Gradient accumulated so far, or nullopt when `v` never received one.
  const Tensor2* grad_if_any(Var v) const;

  /// Seeds d(root) with `seed` and runs every recorded backward in reverse.
  void backward(Var root, const Tensor2& seed);
  /// Convenience for a 1×1 root seeded with 1.
  void backward(Var root);

  std::size_t size() const noexcept { return nodes_.size(); }

 private:
  struct Node {
    Tensor2 owned;
    const Tensor2* borrowed = nullptr;
    Tensor2 grad;
    Tensor2* grad_sink = nullptr;
    bool requires_grad = false;
    BackwardFn backward;
  };

  std::vector<Node> nodes_;
};

}  // namespace lranker::num
