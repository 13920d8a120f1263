#pragma once

#include "nam/numerics/tensor.hpp"

#include <functional>
#include <vector>

namespace nam::numerics {

class Tape;

// Handle to a node on a tape. Cheap to copy; valid as long as the tape lives.
struct Var {
  Tape* tape = nullptr;
  int id = -1;
  bool valid() const { return tape != nullptr && id >= 0; }
};

// Reverse-mode autodiff tape. Nodes are recorded in topological order (an op
// can only consume earlier ids), so the backward sweep is a single reverse
// pass that visits each node exactly once. A tape is confined to one thread;
// values on it are immutable once recorded.
class Tape {
 public:
  // upstream: gradient of the final loss w.r.t. this node's value.
  // parent_grads[i]: accumulator for parent i, or nullptr if that parent does
  // not require gradients.
  using Backward = std::function<void(const Tensor& upstream, const std::vector<Tensor*>& parent_grads)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // Records an input value. Gradient participation follows value.requires_grad().
  Var leaf(Tensor value);

  // Records a trainable input: requires_grad is forced on.
  Var param(Tensor value);

  // Records an op result. The node requires gradients iff any parent does;
  // `backward` is dropped otherwise. All values are checked finite here.
  Var record(const char* op, Tensor value, const std::vector<Var>& parents, Backward backward);

  const Tensor& value(Var v) const;
  bool requires_grad(Var v) const;
  std::size_t size() const { return nodes_.size(); }

  // Gradients of a scalar loss w.r.t. the given nodes. Deterministic: two
  // calls on the same tape produce bit-identical results.
  std::vector<Tensor> gradients(Var loss, const std::vector<Var>& wrt) const;

 private:
  struct Node {
    Tensor value;
    std::vector<int> parents;
    Backward backward;  // empty for leaves and no-grad nodes
  };

  int check(Var v, const char* what) const;

  std::vector<Node> nodes_;
};

}  // namespace nam::numerics
