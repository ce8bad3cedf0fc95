#include "lranker/tape.hpp"

#include "lranker/errors.hpp"

namespace lranker::num {

Var Tape::constant(Tensor2 value) {
  Node n;
  n.owned = std::move(value);
  nodes_.push_back(std::move(n));
  return Var{nodes_.size() - 1};
}

Var Tape::input(Tensor2 value) {
  Node n;
  n.owned = std::move(value);
  n.requires_grad = true;
  nodes_.push_back(std::move(n));
  return Var{nodes_.size() - 1};
}

Var Tape::parameter(const Tensor2& value, Tensor2* grad_sink) {
  if (grad_sink != nullptr && !grad_sink->same_shape(value)) {
    throw ContractViolation("gradient sink " + grad_sink->shape_string() +
                            " does not match parameter " + value.shape_string());
  }
  Node n;
  n.borrowed = &value;
  n.grad_sink = grad_sink;
  n.requires_grad = grad_sink != nullptr;
  nodes_.push_back(std::move(n));
  return Var{nodes_.size() - 1};
}

Var Tape::push(Tensor2 value, std::initializer_list<Var> inputs, BackwardFn backward) {
  Node n;
  n.owned = std::move(value);
  for (Var in : inputs) n.requires_grad = n.requires_grad || nodes_[in.id].requires_grad;
  if (n.requires_grad) n.backward = std::move(backward);
  nodes_.push_back(std::move(n));
  return Var{nodes_.size() - 1};
}

const Tensor2& Tape::value(Var v) const {
  const Node& n = nodes_[v.id];
  return n.borrowed != nullptr ? *n.borrowed : n.owned;
}

Tensor2& Tape::grad(Var v) {
  Node& n = nodes_[v.id];
  if (n.grad_sink != nullptr) return *n.grad_sink;
  if (n.grad.empty()) {
    const Tensor2& val = value(v);
    n.grad = Tensor2(val.rows(), val.cols());
  }
  return n.grad;
}

const Tensor2* Tape::grad_if_any(Var v) const {
  const Node& n = nodes_[v.id];
  if (n.grad_sink != nullptr) return n.grad_sink;
  return n.grad.empty() ? nullptr : &n.grad;
}

void Tape::backward(Var root, const Tensor2& seed) {
  if (!value(root).same_shape(seed)) {
    throw ContractViolation("backward seed " + seed.shape_string() + " does not match root " +
                            value(root).shape_string());
  }
  if (!nodes_[root.id].requires_grad) return;
  Tensor2& g = grad(root);
  for (std::size_t i = 0; i < g.size(); ++i) g.flat()[i] += seed.flat()[i];
  for (std::size_t id = root.id + 1; id-- > 0;) {
    Node& n = nodes_[id];
    if (!n.backward) continue;
    if (n.grad.empty()) continue;  // nothing flowed into this node
    n.backward(*this, id);
  }
}

void Tape::backward(Var root) {
  const Tensor2& v = value(root);
  backward(root, Tensor2(v.rows(), v.cols(), 1.0));
}

}  // namespace lranker::num
