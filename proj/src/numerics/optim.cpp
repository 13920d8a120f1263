#include "nam/numerics/optim.hpp"

#include <cmath>

namespace nam::numerics {

namespace {

void check_step_args(const std::vector<Tensor*>& params, const std::vector<Tensor>& grads) {
  if (params.size() != grads.size()) {
    throw ContractError("optimizer step: " + std::to_string(params.size()) + " params vs " +
                        std::to_string(grads.size()) + " grads");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!same_shape(*params[i], grads[i])) {
      shape_error("optimizer step", *params[i], grads[i]);
    }
  }
}

}  // namespace

void SgdMomentum::step(const std::vector<Tensor*>& params, const std::vector<Tensor>& grads) {
  check_step_args(params, grads);
  if (velocity_.empty()) {
    for (const Tensor* p : params) velocity_.emplace_back(Eigen::ArrayXd::Zero(p->size()));
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    velocity_[i] = momentum_ * velocity_[i] - lr_ * grads[i].array();
    params[i]->array() += velocity_[i];
    check_finite(*params[i], "sgd step");
  }
}

void Adam::step(const std::vector<Tensor*>& params, const std::vector<Tensor>& grads) {
  check_step_args(params, grads);
  if (m_.empty()) {
    for (const Tensor* p : params) {
      m_.emplace_back(Eigen::ArrayXd::Zero(p->size()));
      v_.emplace_back(Eigen::ArrayXd::Zero(p->size()));
    }
  }
  ++t_;
  const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * grads[i].array();
    v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * grads[i].array().square();
    params[i]->array() -= lr_ * (m_[i] / bc1) / ((v_[i] / bc2).sqrt() + eps_);
    check_finite(*params[i], "adam step");
  }
}

}  // namespace nam::numerics
