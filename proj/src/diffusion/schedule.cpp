#include "nam/diffusion/schedule.hpp"

#include <cmath>

namespace nam::diffusion {

double NoiseSchedule::alpha_bar_at(int t) const {
  if (t == 0) return 1.0;
  check_step(t, "alpha_bar_at");
  return alpha_bar[t - 1];
}

void NoiseSchedule::check_step(int t, const char* op) const {
  if (t < 1 || t > steps) {
    throw ContractError(std::string(op) + ": step " + std::to_string(t) + " outside [1, " +
                        std::to_string(steps) + "]");
  }
}

NoiseSchedule make_schedule(int steps, double beta_start, double beta_end,
                            const std::string& shape) {
  if (steps < 1) throw ContractError("make_schedule: need at least one step");
  if (!(beta_start > 0.0 && beta_start <= beta_end && beta_end < 1.0)) {
    throw ContractError("make_schedule: need 0 < beta_start <= beta_end < 1, got " +
                        std::to_string(beta_start) + " .. " + std::to_string(beta_end));
  }
  if (shape != "linear") throw ContractError("make_schedule: unknown shape '" + shape + "'");

  NoiseSchedule s;
  s.steps = steps;
  s.beta.resize(steps);
  s.alpha.resize(steps);
  s.alpha_bar.resize(steps);
  double running = 1.0;
  for (int t = 0; t < steps; ++t) {
    s.beta[t] = steps == 1 ? beta_start
                           : beta_start + (beta_end - beta_start) * t / (steps - 1);
    s.alpha[t] = 1.0 - s.beta[t];
    running *= s.alpha[t];
    s.alpha_bar[t] = running;
  }
  return s;
}

Matrix forward_diffuse(const NoiseSchedule& schedule, const Matrix& x0, int t,
                       const Matrix& noise) {
  schedule.check_step(t, "forward_diffuse");
  if (x0.rows() != noise.rows() || x0.cols() != noise.cols()) {
    throw ContractError("forward_diffuse: x0 and noise shapes differ");
  }
  const double abar = schedule.alpha_bar_at(t);
  return std::sqrt(abar) * x0 + std::sqrt(1.0 - abar) * noise;
}

PosteriorParams posterior_params(const NoiseSchedule& schedule, const Matrix& x_t,
                                 const Matrix& x0, int t) {
  schedule.check_step(t, "posterior_params");
  if (x_t.rows() != x0.rows() || x_t.cols() != x0.cols()) {
    throw ContractError("posterior_params: x_t and x0 shapes differ");
  }
  const double beta = schedule.beta[t - 1];
  const double alpha = schedule.alpha[t - 1];
  const double abar_t = schedule.alpha_bar_at(t);
  const double abar_prev = schedule.alpha_bar_at(t - 1);

  PosteriorParams p;
  p.mean = (std::sqrt(abar_prev) * beta * x0 + std::sqrt(alpha) * (1.0 - abar_prev) * x_t) /
           (1.0 - abar_t);
  p.variance = beta * (1.0 - abar_prev) / (1.0 - abar_t);
  return p;
}

}  // namespace nam::diffusion
