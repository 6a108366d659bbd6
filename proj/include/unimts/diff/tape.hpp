#pragma once

// Reverse-mode differentiation over a computation graph recorded for one
// step. Nodes are appended in evaluation order, so replaying them backwards
// is a valid topological order.

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <string>
#include <unordered_map>
#include <vector>

#include "unimts/diff/tensor.hpp"
#include "unimts/error.hpp"

namespace unimts::diff {

template <class Real>
class Tape;

/// Handle to a node on a tape. Cheap to copy; valid while the tape lives.
template <class Real>
class Var {
 public:
  Var() = default;
  Var(Tape<Real>* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape<Real>& tape() const { return *tape_; }
  std::size_t id() const { return id_; }
  const Tensor<Real>& value() const { return tape_->value(id_); }
  const Shape& shape() const { return value().shape(); }
  bool requires_grad() const { return tape_->requires_grad(id_); }

 private:
  Tape<Real>* tape_ = nullptr;
  std::size_t id_ = 0;
};

template <class Real>
class Tape {
 public:
  /// Propagates the gradient of node `self` into its inputs.
  using BackwardFn = std::function<void(Tape&, std::size_t self)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var<Real> constant(Tensor<Real> value) {
    check_finite(value, "constant");
    nodes_.push_back(Node{std::move(value), {}, nullptr, false, {}});
    return {this, nodes_.size() - 1};
  }

  /// Leaf bound to a parameter; one leaf per parameter per tape so repeated
  /// uses share a node. Frozen parameters enter as constants.
  Var<Real> parameter(Parameter<Real>& p) {
    if (auto it = leaves_.find(&p); it != leaves_.end()) return {this, it->second};
    check_finite(p.value, p.name.c_str());
    nodes_.push_back(Node{p.value, {}, p.trainable ? &p : nullptr, p.trainable, {}});
    leaves_.emplace(&p, nodes_.size() - 1);
    return {this, nodes_.size() - 1};
  }

  Var<Real> record(Tensor<Real> value, std::initializer_list<Var<Real>> inputs, BackwardFn backward,
                   const char* op) {
    check_finite(value, op);
    bool needs = false;
    for (const auto& in : inputs) needs = needs || requires_grad(in.id());
    nodes_.push_back(Node{std::move(value), {}, nullptr, needs, needs ? std::move(backward) : BackwardFn{}});
    return {this, nodes_.size() - 1};
  }

  /// Same as record() for ops with a variable number of inputs.
  Var<Real> record(Tensor<Real> value, const std::vector<Var<Real>>& inputs, BackwardFn backward,
                   const char* op) {
    check_finite(value, op);
    bool needs = false;
    for (const auto& in : inputs) needs = needs || requires_grad(in.id());
    nodes_.push_back(Node{std::move(value), {}, nullptr, needs, needs ? std::move(backward) : BackwardFn{}});
    return {this, nodes_.size() - 1};
  }

  const Tensor<Real>& value(std::size_t id) const { return nodes_[id].value; }
  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }

  /// Gradient buffer of a node, allocated as zeros on first access.
  Tensor<Real>& grad(std::size_t id) {
    Node& n = nodes_[id];
    if (n.grad.size() != n.value.size() || n.grad.shape() != n.value.shape())
      n.grad = Tensor<Real>(n.value.shape());
    return n.grad;
  }

  bool has_grad(std::size_t id) const { return nodes_[id].grad.size() == nodes_[id].value.size() && nodes_[id].grad.size() > 0; }

  /// Seeds d(loss)/d(loss) = 1 and accumulates into every reachable trainable
  /// parameter's `grad` (additively; callers zero gradients between steps).
  void backward(const Var<Real>& loss) {
    if (loss.value().size() != 1)
      throw Error(ErrorKind::ShapeMismatch, "backward() needs a scalar loss");
    if (!requires_grad(loss.id())) return;
    grad(loss.id())[0] = Real{1};
    for (std::size_t id = loss.id() + 1; id-- > 0;) {
      Node& n = nodes_[id];
      if (!n.requires_grad || !has_grad(id)) continue;
      if (n.backward) n.backward(*this, id);
      if (n.param) {
        check_finite(n.grad, "gradient");
        auto dst = n.param->grad.values();
        auto src = n.grad.values();
        for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
      }
    }
  }

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor<Real> value;
    Tensor<Real> grad;
    Parameter<Real>* param;
    bool requires_grad;
    BackwardFn backward;
  };

  static void check_finite(const Tensor<Real>& t, const char* what) {
    if (!t.all_finite())
      throw Error(ErrorKind::NonFinite, std::string("non-finite value produced by ") + what);
  }

  std::vector<Node> nodes_;
  std::unordered_map<const Parameter<Real>*, std::size_t> leaves_;
};

}  // namespace unimts::diff
