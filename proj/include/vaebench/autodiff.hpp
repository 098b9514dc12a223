#pragma once

#include <cstddef>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "vaebench/tensor.hpp"

namespace vaebench {

using NodeId = std::size_t;

/// A named trainable tensor together with its accumulated gradient.
///
/// `grad` stays empty until the first backward pass (or zero_grad()) touches it;
/// optimizers reject parameters whose gradient is missing. A frozen parameter is
/// recorded on the tape as a constant and never receives a gradient.
struct Parameter {
  std::string name;
  Tensor value;
  Tensor grad;
  bool frozen = false;
  /// Rank-2 parameter whose rows are independent (embedding table). Optimizers
  /// update only rows that received a nonzero gradient in the current step.
  bool sparse_rows = false;

  Parameter() = default;
  Parameter(std::string n, Tensor v) : name(std::move(n)), value(std::move(v)) {}

  void zero_grad() {
    if (grad.shape() == value.shape()) {
      grad.fill(0.0);
    } else {
      grad = Tensor(value.shape());
    }
  }
};

class Tape;

/// Handle to a node recorded on a Tape.
class Var {
 public:
  Var() = default;
  Var(Tape* tape, NodeId id) : tape_(tape), id_(id) {}

  NodeId id() const noexcept { return id_; }
  Tape& tape() const { return *tape_; }
  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  double item() const { return value().item(); }
  bool requires_grad() const;

 private:
  Tape* tape_ = nullptr;
  NodeId id_ = 0;
};

/// Map from leaf node id to d(loss)/d(leaf).
using GradientMap = std::map<NodeId, Tensor>;

/// Reverse-mode tape. Nodes are appended in evaluation order, so every node's
/// inputs precede it; backward() walks the nodes once, last to first.
class Tape {
 public:
  /// Receives the output adjoint and one slot per input; a slot is null when
  /// that input does not require a gradient.
  using BackwardFn = std::function<void(const Tape&, const Tensor& grad_out, std::span<Tensor* const> grad_in)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Data that never receives a gradient.
  Var constant(Tensor value);
  /// Leaf whose gradient is reported in the GradientMap.
  Var leaf(Tensor value);
  /// Leaf bound to a Parameter by reference. backward() accumulates into p.grad.
  /// Frozen parameters are recorded as constants.
  Var param(Parameter& p);

  Var record(Tensor value, std::vector<NodeId> inputs, BackwardFn backward);

  const Tensor& value(NodeId id) const;
  bool requires_grad(NodeId id) const { return nodes_.at(id).requires_grad; }
  std::size_t size() const noexcept { return nodes_.size(); }
  std::span<const NodeId> inputs(NodeId id) const { return nodes_.at(id).inputs; }

  /// Runs the reverse sweep from a scalar loss. Parameter leaves accumulate
  /// straight into Parameter::grad; the returned map holds the other leaves.
  GradientMap backward(Var loss);

 private:
  struct Node {
    Tensor owned;
    const Tensor* external = nullptr;
    std::vector<NodeId> inputs;
    BackwardFn backward;
    Parameter* parameter = nullptr;
    bool requires_grad = false;
    bool is_leaf = false;
  };

  std::vector<Node> nodes_;
};

// Differentiable operations. Elementwise binary ops accept equal shapes or one
// single-element operand; nothing else broadcasts.
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var neg(Var a);
Var scale(Var a, double factor);
Var add_scalar(Var a, double offset);
Var matmul(Var a, Var b);
/// x·W + b for x [B,in], W [in,out], b [out].
Var affine(Var x, Var weight, Var bias);
Var sum(Var a);
Var mean(Var a);
/// Sum over columns of a matrix: [B,N] -> [B].
Var row_sum(Var a);
Var exp(Var a);
Var log(Var a);
Var relu(Var a);
Var sigmoid(Var a);
Var square(Var a);
/// Values outside [lo, hi] are clamped and pass no gradient.
Var clamp(Var a, double lo, double hi);
Var reshape(Var a, Shape shape);
/// Concatenate two matrices along columns (axis 1) or rows (axis 0).
Var concat(Var a, Var b, std::size_t axis = 1);
/// Columns [begin, end) of a matrix.
Var slice_cols(Var a, std::size_t begin, std::size_t end);
/// Rows of a matrix selected by index; backward scatters into the selected rows only.
Var index_select(Var table, std::span<const std::size_t> rows);

inline Var operator+(Var a, Var b) { return add(a, b); }
inline Var operator-(Var a, Var b) { return sub(a, b); }
inline Var operator*(Var a, Var b) { return mul(a, b); }

}  // namespace vaebench
