// SPDX-License-Identifier: Apache-2.0
#include "wig/autodiff.hpp"

#include <stdexcept>

namespace wig::ad {

namespace {

void require_same_shape(const Matrix& x, const Matrix& y, const char* what) {
  if (x.rows() != y.rows() || x.cols() != y.cols())
    throw std::invalid_argument(std::string(what) + ": shape mismatch");
}

}  // namespace

Var Tape::push(Node node) {
  nodes_.push_back(std::move(node));
  return Var{static_cast<int>(nodes_.size()) - 1};
}

const Tape::Node& Tape::at(Var v) const {
  if (!v.valid() || v.id >= size()) throw std::invalid_argument("Tape: invalid var");
  return nodes_[static_cast<std::size_t>(v.id)];
}

Var Tape::leaf(Matrix value, bool differentiable) {
  Node n;
  n.op = Op::kLeaf;
  n.value = std::move(value);
  n.differentiable = differentiable;
  return push(std::move(n));
}

Var Tape::matmul(Var a, Var b) {
  const Node &na = at(a), &nb = at(b);
  if (na.value.cols() != nb.value.rows()) throw std::invalid_argument("matmul: inner dims");
  Node n;
  n.op = Op::kMatMul;
  n.a = a.id;
  n.b = b.id;
  n.value = na.value * nb.value;
  n.differentiable = na.differentiable || nb.differentiable;
  return push(std::move(n));
}

Var Tape::add(Var a, Var b) {
  const Node &na = at(a), &nb = at(b);
  require_same_shape(na.value, nb.value, "add");
  Node n;
  n.op = Op::kAdd;
  n.a = a.id;
  n.b = b.id;
  n.value = na.value + nb.value;
  n.differentiable = na.differentiable || nb.differentiable;
  return push(std::move(n));
}

Var Tape::sub(Var a, Var b) {
  const Node &na = at(a), &nb = at(b);
  require_same_shape(na.value, nb.value, "sub");
  Node n;
  n.op = Op::kSub;
  n.a = a.id;
  n.b = b.id;
  n.value = na.value - nb.value;
  n.differentiable = na.differentiable || nb.differentiable;
  return push(std::move(n));
}

Var Tape::cwise_mul(Var a, Var b) {
  const Node &na = at(a), &nb = at(b);
  require_same_shape(na.value, nb.value, "cwise_mul");
  Node n;
  n.op = Op::kCwiseMul;
  n.a = a.id;
  n.b = b.id;
  n.value = na.value.cwiseProduct(nb.value);
  n.differentiable = na.differentiable || nb.differentiable;
  return push(std::move(n));
}

Var Tape::relu(Var a) {
  const Node& na = at(a);
  Node n;
  n.op = Op::kRelu;
  n.a = a.id;
  n.value = na.value.cwiseMax(0.0);
  n.differentiable = na.differentiable;
  return push(std::move(n));
}

Var Tape::sigmoid(Var a) {
  const Node& na = at(a);
  Node n;
  n.op = Op::kSigmoid;
  n.a = a.id;
  n.value = (1.0 / (1.0 + (-na.value.array()).exp())).matrix();
  n.differentiable = na.differentiable;
  return push(std::move(n));
}

Var Tape::scale(Var a, double s) {
  const Node& na = at(a);
  Node n;
  n.op = Op::kScale;
  n.a = a.id;
  n.factor = s;
  n.value = s * na.value;
  n.differentiable = na.differentiable;
  return push(std::move(n));
}

Var Tape::sum(Var a) {
  const Node& na = at(a);
  Node n;
  n.op = Op::kSum;
  n.a = a.id;
  n.value = Matrix::Constant(1, 1, na.value.sum());
  n.differentiable = na.differentiable;
  return push(std::move(n));
}

Var Tape::gather_rows(Var a, std::vector<int> rows) {
  const Node& na = at(a);
  Node n;
  n.op = Op::kGatherRows;
  n.a = a.id;
  n.value.resize(static_cast<Index>(rows.size()), na.value.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] < 0 || rows[i] >= na.value.rows())
      throw std::invalid_argument("gather_rows: index out of range");
    n.value.row(static_cast<Index>(i)) = na.value.row(rows[i]);
  }
  n.index = std::move(rows);
  n.differentiable = na.differentiable;
  return push(std::move(n));
}

Var Tape::segment_sum(Var a, std::vector<int> seg, int segments) {
  const Node& na = at(a);
  if (static_cast<Index>(seg.size()) != na.value.rows())
    throw std::invalid_argument("segment_sum: one segment id per row required");
  Node n;
  n.op = Op::kSegmentSum;
  n.a = a.id;
  n.value = Matrix::Zero(segments, na.value.cols());
  for (std::size_t i = 0; i < seg.size(); ++i) {
    if (seg[i] < 0 || seg[i] >= segments)
      throw std::invalid_argument("segment_sum: segment id out of range");
    n.value.row(seg[i]) += na.value.row(static_cast<Index>(i));
  }
  n.index = std::move(seg);
  n.differentiable = na.differentiable;
  return push(std::move(n));
}

Var Tape::broadcast_rows(Var a, int n_rows) {
  const Node& na = at(a);
  if (na.value.rows() != 1) throw std::invalid_argument("broadcast_rows: input must be one row");
  if (n_rows < 0) throw std::invalid_argument("broadcast_rows: negative row count");
  Node n;
  n.op = Op::kBroadcastRows;
  n.a = a.id;
  n.value = na.value.replicate(n_rows, 1);
  n.differentiable = na.differentiable;
  return push(std::move(n));
}

const Matrix& Tape::value(Var v) const { return at(v).value; }

const Matrix& Tape::grad(Var v) const {
  const Node& n = at(v);
  if (!ran_backward_) throw std::logic_error("Tape::grad: backward() has not run");
  // Constant or unreachable nodes get their zero gradient materialized lazily.
  if (n.grad.size() == 0)
    const_cast<Node&>(n).grad = Matrix::Zero(n.value.rows(), n.value.cols());
  return n.grad;
}

void Tape::backward(Var loss) {
  if (ran_backward_) throw std::logic_error("Tape::backward: already ran on this recording");
  const Node& top = at(loss);
  if (top.value.rows() != 1 || top.value.cols() != 1)
    throw std::invalid_argument("Tape::backward: loss must be 1x1");
  ran_backward_ = true;

  auto ensure = [](Node& n) {
    if (n.grad.size() == 0) n.grad = Matrix::Zero(n.value.rows(), n.value.cols());
  };
  ensure(nodes_[static_cast<std::size_t>(loss.id)]);
  nodes_[static_cast<std::size_t>(loss.id)].grad(0, 0) = 1.0;

  for (int id = loss.id; id >= 0; --id) {
    Node& n = nodes_[static_cast<std::size_t>(id)];
    if (!n.differentiable || n.grad.size() == 0 || n.op == Op::kLeaf) continue;
    Node* pa = n.a >= 0 ? &nodes_[static_cast<std::size_t>(n.a)] : nullptr;
    Node* pb = n.b >= 0 ? &nodes_[static_cast<std::size_t>(n.b)] : nullptr;
    const bool need_a = pa && pa->differentiable;
    const bool need_b = pb && pb->differentiable;
    if (need_a) ensure(*pa);
    if (need_b) ensure(*pb);

    switch (n.op) {
      case Op::kMatMul:
        if (need_a) pa->grad.noalias() += n.grad * pb->value.transpose();
        if (need_b) pb->grad.noalias() += pa->value.transpose() * n.grad;
        break;
      case Op::kAdd:
        if (need_a) pa->grad += n.grad;
        if (need_b) pb->grad += n.grad;
        break;
      case Op::kSub:
        if (need_a) pa->grad += n.grad;
        if (need_b) pb->grad -= n.grad;
        break;
      case Op::kCwiseMul:
        if (need_a) pa->grad += n.grad.cwiseProduct(pb->value);
        if (need_b) pb->grad += n.grad.cwiseProduct(pa->value);
        break;
      case Op::kRelu:
        if (need_a)
          pa->grad.array() += n.grad.array() * (pa->value.array() > 0.0).cast<double>();
        break;
      case Op::kSigmoid:
        if (need_a) pa->grad.array() += n.grad.array() * n.value.array() * (1.0 - n.value.array());
        break;
      case Op::kScale:
        if (need_a) pa->grad += n.factor * n.grad;
        break;
      case Op::kSum:
        if (need_a) pa->grad.array() += n.grad(0, 0);
        break;
      case Op::kGatherRows:
        if (need_a)
          for (std::size_t i = 0; i < n.index.size(); ++i)
            pa->grad.row(n.index[i]) += n.grad.row(static_cast<Index>(i));
        break;
      case Op::kSegmentSum:
        if (need_a)
          for (std::size_t i = 0; i < n.index.size(); ++i)
            pa->grad.row(static_cast<Index>(i)) += n.grad.row(n.index[i]);
        break;
      case Op::kBroadcastRows:
        if (need_a) pa->grad += n.grad.colwise().sum();
        break;
      case Op::kLeaf:
        break;
    }
  }
}

}  // namespace wig::ad
