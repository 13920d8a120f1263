#pragma once

#include "nam/common.hpp"

#include <string>

namespace nam::diffusion {

// beta / alpha / cumulative-alpha tables for T diffusion steps. Steps are
// 1-based; alpha_bar(0) == 1 by definition.
struct NoiseSchedule {
  int steps = 0;
  Vector beta;       // beta_1 .. beta_T
  Vector alpha;      // 1 - beta_t
  Vector alpha_bar;  // prod_{s<=t} alpha_s, strictly decreasing

  double alpha_bar_at(int t) const;  // t in [0, T]
  void check_step(int t, const char* op) const;
};

// Linear schedule from beta_start to beta_end inclusive. The desk-scale
// default is T=50, 1e-4 .. 0.02.
NoiseSchedule make_schedule(int steps, double beta_start = 1e-4, double beta_end = 0.02,
                            const std::string& shape = "linear");

// Closed-form forward marginal x_t = sqrt(abar_t) x0 + sqrt(1 - abar_t) noise.
// `noise` is caller-supplied for determinism and must match x0's shape.
Matrix forward_diffuse(const NoiseSchedule& schedule, const Matrix& x0, int t,
                       const Matrix& noise);

// Mean and (scalar, isotropic) variance of q(x_{t-1} | x_t, x0).
struct PosteriorParams {
  Matrix mean;
  double variance = 0.0;
};
PosteriorParams posterior_params(const NoiseSchedule& schedule, const Matrix& x_t,
                                 const Matrix& x0, int t);

}  // namespace nam::diffusion
