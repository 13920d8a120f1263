#include "nam/numerics/tape.hpp"

#include <memory>

namespace nam::numerics {

Var Tape::leaf(Tensor value) {
  check_finite(value, "leaf");
  nodes_.push_back(Node{std::move(value), {}, {}});
  return Var{this, static_cast<int>(nodes_.size()) - 1};
}

Var Tape::param(Tensor value) {
  value.set_requires_grad(true);
  return leaf(std::move(value));
}

Var Tape::record(const char* op, Tensor value, const std::vector<Var>& parents,
                 Backward backward) {
  check_finite(value, op);
  bool needs_grad = false;
  std::vector<int> parent_ids;
  parent_ids.reserve(parents.size());
  for (const Var& p : parents) {
    const int id = check(p, op);
    if (p.tape != this) throw ContractError(std::string(op) + ": inputs from different tapes");
    needs_grad = needs_grad || nodes_[id].value.requires_grad();
    parent_ids.push_back(id);
  }
  value.set_requires_grad(needs_grad);
  nodes_.push_back(Node{std::move(value), std::move(parent_ids),
                        needs_grad ? std::move(backward) : Backward{}});
  return Var{this, static_cast<int>(nodes_.size()) - 1};
}

const Tensor& Tape::value(Var v) const { return nodes_[check(v, "value")].value; }

bool Tape::requires_grad(Var v) const {
  return nodes_[check(v, "requires_grad")].value.requires_grad();
}

int Tape::check(Var v, const char* what) const {
  if (v.tape == nullptr || v.id < 0 || v.id >= static_cast<int>(nodes_.size())) {
    throw ContractError(std::string(what) + ": invalid tape handle");
  }
  return v.id;
}

std::vector<Tensor> Tape::gradients(Var loss, const std::vector<Var>& wrt) const {
  const int loss_id = check(loss, "gradients");
  const Tensor& loss_value = nodes_[loss_id].value;
  if (!loss_value.is_scalar()) {
    throw ContractError("gradients: loss must be scalar, got " + loss_value.shape_str());
  }

  // Adjoint buffers, allocated lazily; reverse id order is a valid reverse
  // topological order because ops only reference earlier nodes.
  std::vector<std::unique_ptr<Tensor>> adjoint(nodes_.size());
  adjoint[loss_id] = std::make_unique<Tensor>(
      Tensor(loss_value.shape(), Eigen::ArrayXd::Constant(1, 1.0)));

  for (int i = loss_id; i >= 0; --i) {
    const Node& node = nodes_[i];
    if (adjoint[i] == nullptr || !node.backward) continue;
    std::vector<Tensor*> parent_grads(node.parents.size(), nullptr);
    for (std::size_t k = 0; k < node.parents.size(); ++k) {
      const int p = node.parents[k];
      if (!nodes_[p].value.requires_grad()) continue;
      if (adjoint[p] == nullptr) {
        adjoint[p] = std::make_unique<Tensor>(Tensor::zeros(nodes_[p].value.shape()));
      }
      parent_grads[k] = adjoint[p].get();
    }
    node.backward(*adjoint[i], parent_grads);
  }

  std::vector<Tensor> out;
  out.reserve(wrt.size());
  for (const Var& v : wrt) {
    const int id = check(v, "gradients");
    if (adjoint[id] != nullptr) {
      out.push_back(*adjoint[id]);
    } else {
      out.push_back(Tensor::zeros(nodes_[id].value.shape()));
    }
  }
  return out;
}

}  // namespace nam::numerics
