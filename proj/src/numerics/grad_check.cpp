#include "nam/numerics/grad_check.hpp"

#include <cmath>

namespace nam::numerics {

double grad_check(const ScalarFn& f, const Tensor& point, double epsilon) {
  // Analytic gradient through the tape.
  Tensor analytic;
  {
    Tape tape;
    Var x = tape.param(point);
    Var loss = f(tape, x);
    analytic = tape.gradients(loss, {x})[0];
  }

  // Central differences, one scratch tape per evaluation.
  const auto eval = [&](const Tensor& p) {
    Tape tape;
    Var x = tape.leaf(p);
    Var loss = f(tape, x);
    return tape.value(loss).value();
  };

  double max_rel = 0.0;
  Tensor perturbed = point;
  for (std::int64_t i = 0; i < point.size(); ++i) {
    const double orig = perturbed.at(i);
    perturbed.at(i) = orig + epsilon;
    const double hi = eval(perturbed);
    perturbed.at(i) = orig - epsilon;
    const double lo = eval(perturbed);
    perturbed.at(i) = orig;
    const double numeric = (hi - lo) / (2.0 * epsilon);
    const double a = analytic.at(i);
    const double rel = std::abs(a - numeric) / std::max(1e-8, std::abs(a) + std::abs(numeric));
    max_rel = std::max(max_rel, rel);
  }
  return max_rel;
}

}  // namespace nam::numerics
