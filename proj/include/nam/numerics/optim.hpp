#pragma once

#include "nam/numerics/tensor.hpp"

#include <vector>

namespace nam::numerics {

// Gradient descent with classical momentum. State is keyed by parameter
// position, so pass the same parameter list in the same order every step.
class SgdMomentum {
 public:
  explicit SgdMomentum(double lr, double momentum = 0.9) : lr_(lr), momentum_(momentum) {}

  void step(const std::vector<Tensor*>& params, const std::vector<Tensor>& grads);

 private:
  double lr_;
  double momentum_;
  std::vector<Eigen::ArrayXd> velocity_;
};

class Adam {
 public:
  explicit Adam(double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
      : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

  void step(const std::vector<Tensor*>& params, const std::vector<Tensor>& grads);

 private:
  double lr_, beta1_, beta2_, eps_;
  long t_ = 0;
  std::vector<Eigen::ArrayXd> m_, v_;
};

}  // namespace nam::numerics
