#ifndef HCR_ND_TAPE_H_
#define HCR_ND_TAPE_H_

#include <cstdint>
#include <deque>
#include <functional>
#include <initializer_list>
#include <unordered_map>
#include <vector>

#include "hcr/nd/params.h"
#include "hcr/nd/tensor.h"

namespace hcr::nd {

class Tape;

// Handle to a node recorded on a tape.
class Var {
 public:
  Var() = default;
  Var(Tape* tape, int id) : tape_(tape), id_(id) {}

  Tape* tape() const { return tape_; }
  int id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }

 private:
  Tape* tape_ = nullptr;
  int id_ = -1;
};

// Reverse-mode autodiff record. Nodes are appended in forward order, so node
// ids increase along every edge and the graph is acyclic by construction.
// A tape is single-writer; build a fresh one per forward pass.
class Tape {
 public:
  // Receives the tape and the id of the node whose gradient is being
  // propagated to its inputs.
  using BackwardFn = std::function<void(Tape&, int)>;

  explicit Tape(bool grad_enabled = true) : grad_enabled_(grad_enabled) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var Constant(Tensor value);
  // One leaf per parameter per tape; repeated calls return the same node.
  Var Leaf(Param& param);

  // Appends an op node. The backward function is kept only if some input
  // requires a gradient.
  Var Record(Tensor value, std::initializer_list<Var> inputs, BackwardFn backward);
  Var Record(Tensor value, const std::vector<Var>& inputs, BackwardFn backward);

  // True if gradients must flow into any of the inputs.
  bool NeedsGrad(std::initializer_list<Var> inputs) const;
  bool requires_grad(int id) const { return nodes_[id].requires_grad; }
  bool requires_grad(Var v) const { return nodes_[v.id()].requires_grad; }

  // Seeds d(loss)/d(loss) = 1, propagates to every reachable node and adds
  // leaf gradients into the bound Param::grad arrays. Parameters off the
  // loss path are left untouched.
  void Backward(Var loss);

  const Tensor& value(int id) const { return nodes_[id].value; }
  // Gradient accumulated so far; zeros if none reached the node.
  Tensor grad(int id) const;
  // Mutable gradient accumulator, allocated on first use.
  Tensor& GradBuffer(int id);
  bool has_grad(int id) const { return nodes_[id].has_grad; }

  bool grad_enabled() const { return grad_enabled_; }
  std::size_t size() const { return nodes_.size(); }

  // Kink tracking for finite-difference checks: piecewise-linear ops fold
  // their branch pattern into a running hash when enabled.
  void set_track_activations(bool on) { track_activations_ = on; }
  bool track_activations() const { return track_activations_; }
  void MixSignature(std::uint64_t bits);
  std::uint64_t activation_signature() const { return signature_; }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    bool has_grad = false;
    bool requires_grad = false;
    BackwardFn backward;
    Param* param = nullptr;
  };

  Var Append(Node node);

  bool grad_enabled_;
  bool track_activations_ = false;
  std::uint64_t signature_ = 1469598103934665603ull;
  std::deque<Node> nodes_;
  std::unordered_map<const Param*, int> leaves_;
};

}  // namespace hcr::nd

#endif  // HCR_ND_TAPE_H_
