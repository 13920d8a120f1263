#pragma once

#include "nam/numerics/ops.hpp"

#include <functional>

namespace nam::numerics {

// Builds a scalar loss from one input node. The callable may capture further
// (fixed) parameters; only `point` is perturbed.
using ScalarFn = std::function<Var(Tape&, Var)>;

// Max over coordinates of |analytic - numeric| / max(1e-8, |analytic| + |numeric|),
// with numeric gradients from central differences of width `epsilon`.
// The caller guarantees differentiability at `point`.
double grad_check(const ScalarFn& f, const Tensor& point, double epsilon = 1e-5);

}  // namespace nam::numerics
