#include "compgen/grad/tape.hpp"

namespace compgen::grad {

const Tensor& Var::value() const {
  if (tape_ == nullptr) throw UsageError("use of an unbound Var");
  return tape_->value(*this);
}

Var Tape::constant(Tensor value) {
  nodes_.push_back(Node{std::move(value), {}, false, false, {}, nullptr});
  return Var(this, nodes_.size() - 1);
}

Var Tape::variable(Tensor value) {
  nodes_.push_back(Node{std::move(value), {}, true, false, {}, nullptr});
  return Var(this, nodes_.size() - 1);
}

Var Tape::parameter(Parameter& parameter) {
  nodes_.push_back(Node{parameter.value, {}, true, false, {}, &parameter});
  return Var(this, nodes_.size() - 1);
}

Var Tape::record(Tensor value, std::initializer_list<Var> parents, Backward fn) {
  bool needs = false;
  for (const Var& p : parents) {
    if (p.tape_ != this) throw UsageError("operands recorded on different tapes");
    needs = needs || nodes_[p.id_].requires_grad;
  }
  Node node{std::move(value), {}, needs, false, {}, nullptr};
  if (needs) node.backward = std::move(fn);
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

Tensor Tape::grad(const Var& v) const {
  const Node& node = nodes_[v.id_];
  if (node.has_grad) return node.grad;
  return Tensor(node.value.shape(), 0.0);
}

Tensor& Tape::grad_slot(const Var& target) {
  Node& node = nodes_[target.id_];
  if (!node.has_grad) {
    node.grad = Tensor(node.value.shape(), 0.0);
    node.has_grad = true;
  }
  return node.grad;
}

void Tape::accumulate(const Var& target, const Tensor& g) {
  if (!nodes_[target.id_].requires_grad) return;
  Tensor& slot = grad_slot(target);
  if (slot.size() != g.size()) {
    throw DimensionError("gradient shape " + shape_string(g.shape()) + " does not match node shape " +
                         shape_string(slot.shape()));
  }
  auto dst = slot.data();
  auto src = g.data();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

void Tape::backward(const Var& loss) {
  if (loss.tape_ != this) throw UsageError("loss belongs to another tape");
  if (nodes_[loss.id_].value.size() != 1) {
    throw UsageError("backward() needs a scalar loss, got shape " + shape_string(nodes_[loss.id_].value.shape()));
  }
  if (swept_) throw UsageError("backward() called twice on one tape");
  swept_ = true;
  if (!nodes_[loss.id_].requires_grad) return;
  grad_slot(loss).fill(1.0);
  for (std::size_t id = loss.id_ + 1; id-- > 0;) {
    Node& node = nodes_[id];
    if (!node.has_grad) continue;
    if (node.backward) node.backward(*this, node.grad);
    if (node.parameter != nullptr) {
      auto dst = node.parameter->grad.data();
      auto src = node.grad.data();
      for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
    }
  }
}

}  // namespace compgen::grad
