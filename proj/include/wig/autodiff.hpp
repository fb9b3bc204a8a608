// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <vector>

#include "wig/types.hpp"

namespace wig::ad {

/// Handle to a node on a Tape.
struct Var {
  int id = -1;
  bool valid() const { return id >= 0; }
};

/// Record-and-replay reverse-mode differentiation over dense matrices.
///
/// Operations append nodes; operands must already live on the same tape, so
/// node order is a topological order and backward() is a single reverse sweep
/// that visits each node exactly once. Gradients flow only into subgraphs
/// rooted at differentiable leaves; constant subtrees are skipped.
class Tape {
 public:
  /// New leaf holding `value`. Only differentiable leaves receive gradients.
  Var leaf(Matrix value, bool differentiable = false);

  Var matmul(Var a, Var b);
  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var cwise_mul(Var a, Var b);
  Var relu(Var a);
  Var sigmoid(Var a);
  Var scale(Var a, double s);
  /// Sum of all entries, as a 1x1 matrix.
  Var sum(Var a);
  /// out.row(i) = a.row(rows[i]); rows may repeat.
  Var gather_rows(Var a, std::vector<int> rows);
  /// out has `segments` rows; out.row(seg[i]) accumulates a.row(i).
  Var segment_sum(Var a, std::vector<int> seg, int segments);
  /// Repeats a 1 x d row n times (bias broadcasting).
  Var broadcast_rows(Var a, int n);

  const Matrix& value(Var v) const;
  /// Accumulates d(loss)/d(node) for every differentiable node reachable from
  /// `loss`, which must be 1x1. Call once per recording.
  void backward(Var loss);
  /// Gradient of the last backward() target w.r.t. node v (zeros if v is
  /// constant or unreachable).
  const Matrix& grad(Var v) const;

  int size() const { return static_cast<int>(nodes_.size()); }

 private:
  enum class Op {
    kLeaf,
    kMatMul,
    kAdd,
    kSub,
    kCwiseMul,
    kRelu,
    kSigmoid,
    kScale,
    kSum,
    kGatherRows,
    kSegmentSum,
    kBroadcastRows,
  };

  struct Node {
    Op op = Op::kLeaf;
    int a = -1, b = -1;
    double factor = 1.0;
    std::vector<int> index;
    Matrix value;
    Matrix grad;
    bool differentiable = false;
  };

  Var push(Node node);
  const Node& at(Var v) const;

  std::vector<Node> nodes_;
  bool ran_backward_ = false;
};

}  // namespace wig::ad
