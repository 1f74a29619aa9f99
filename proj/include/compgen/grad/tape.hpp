#pragma once

#include <cstddef>
#include <deque>
#include <functional>
#include <initializer_list>
#include <stdexcept>

#include "compgen/grad/params.hpp"
#include "compgen/grad/tensor.hpp"

namespace compgen::grad {

/// Raised for API misuse such as differentiating a non-scalar.
class UsageError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

class Tape;

/// Handle to a node on a Tape. Cheap to copy; valid while its Tape lives.
class Var {
 public:
  Var() = default;

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  std::size_t id() const { return id_; }
  Tape& tape() const { return *tape_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

/// Reverse-mode tape at tensor granularity. Every op appends a node holding
/// its value and a closure that pushes the output gradient to its parents.
/// Nodes are stored in creation order, so a reverse sweep is a valid
/// topological order.
class Tape {
 public:
  using Backward = std::function<void(Tape& tape, const Tensor& out_grad)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Tensor value);
  /// Free leaf that receives a gradient (not bound to a ParamSet).
  Var variable(Tensor value);
  /// Leaf bound to a parameter; backward() adds into parameter.grad.
  Var parameter(Parameter& parameter);

  /// Appends an op result. `fn` is dropped when no parent needs a gradient.
  Var record(Tensor value, std::initializer_list<Var> parents, Backward fn);

  bool requires_grad(const Var& v) const { return nodes_[v.id_].requires_grad; }
  const Tensor& value(const Var& v) const { return nodes_[v.id_].value; }
  /// Gradient of a node after backward(); zeros if nothing reached it.
  Tensor grad(const Var& v) const;

  /// Adds `g` into the gradient slot of `target` if it requires one.
  void accumulate(const Var& target, const Tensor& g);
  /// Mutable gradient slot, allocated on first use. Caller must check requires_grad.
  Tensor& grad_slot(const Var& target);

  /// Seeds d(loss)/d(loss) = 1 and sweeps the tape once.
  void backward(const Var& loss);

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    bool requires_grad = false;
    bool has_grad = false;
    Backward backward;
    Parameter* parameter = nullptr;
  };

  std::deque<Node> nodes_;
  bool swept_ = false;
};

}  // namespace compgen::grad
