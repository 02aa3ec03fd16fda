#include "hcr/nd/tape.h"

#include "hcr/common/error.h"

namespace hcr::nd {

const Tensor& Var::value() const { return tape_->value(id_); }

Var Tape::Append(Node node) {
  nodes_.push_back(std::move(node));
  return Var(this, static_cast<int>(nodes_.size()) - 1);
}

Var Tape::Constant(Tensor value) {
  Node node;
  node.value = std::move(value);
  return Append(std::move(node));
}

Var Tape::Leaf(Param& param) {
  const auto it = leaves_.find(&param);
  if (it != leaves_.end()) return Var(this, it->second);
  Node node;
  node.value = param.value;
  node.requires_grad = grad_enabled_ && param.trainable;
  node.param = &param;
  Var v = Append(std::move(node));
  leaves_[&param] = v.id();
  return v;
}

bool Tape::NeedsGrad(std::initializer_list<Var> inputs) const {
  for (const Var& v : inputs) {
    if (v.valid() && nodes_[v.id()].requires_grad) return true;
  }
  return false;
}

Var Tape::Record(Tensor value, std::initializer_list<Var> inputs, BackwardFn backward) {
  Node node;
  node.value = std::move(value);
  node.requires_grad = NeedsGrad(inputs);
  if (node.requires_grad) node.backward = std::move(backward);
  return Append(std::move(node));
}

Var Tape::Record(Tensor value, const std::vector<Var>& inputs, BackwardFn backward) {
  Node node;
  node.value = std::move(value);
  for (const Var& v : inputs) {
    if (v.valid() && nodes_[v.id()].requires_grad) node.requires_grad = true;
  }
  if (node.requires_grad) node.backward = std::move(backward);
  return Append(std::move(node));
}

Tensor Tape::grad(int id) const {
  const Node& n = nodes_[id];
  return n.has_grad ? n.grad : Tensor(n.value.shape());
}

Tensor& Tape::GradBuffer(int id) {
  Node& n = nodes_[id];
  if (!n.has_grad) {
    n.grad = Tensor(n.value.shape());
    n.has_grad = true;
  }
  return n.grad;
}

void Tape::MixSignature(std::uint64_t bits) {
  signature_ ^= bits + 0x9e3779b97f4a7c15ull + (signature_ << 6) + (signature_ >> 2);
}

void Tape::Backward(Var loss) {
  Check(loss.tape() == this, ErrorKind::kContract, "loss belongs to another tape");
  Check(grad_enabled_, ErrorKind::kContract, "backward on a tape recorded without gradients");
  Check(value(loss.id()).size() == 1, ErrorKind::kContract,
        "backward requires a scalar loss, got shape " + ShapeString(value(loss.id()).shape()));
  GradBuffer(loss.id()).Fill(1.0);
  for (int id = loss.id(); id >= 0; --id) {
    Node& n = nodes_[id];
    if (!n.has_grad || !n.requires_grad) continue;
    if (n.backward) n.backward(*this, id);
  }
  for (Node& n : nodes_) {
    if (n.param && n.has_grad && n.requires_grad) {
      auto dst = n.param->grad.data();
      auto src = n.grad.data();
      for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
    }
  }
}

}  // namespace hcr::nd
