#pragma once

#include <functional>

#include "kmp/saddle.hpp"

namespace kmp {

struct FlowState {
  double t = 0.0;
  RkhsFunction f;
  std::optional<DiscreteMeasure> mu;  // interacting system only
};

/// Energy V with its Frechet derivative and convexity modulus lambda.
struct Energy {
  std::function<double(const RkhsFunction&)> value;
  std::function<RkhsFunction(const RkhsFunction&)> derivative;
  double lambda = 0.0;
};

/// 1/2 ||f - target||^2; 1-convex, minimizer = target.
Energy quadratic_energy(const RkhsFunction& target);

/// Explicit Euler on the RKHS gradient flow: f <- f - dt V'(f).
FlowState rkhs_flow_step(const Energy& v, const FlowState& s, double dt);

/// Simultaneous explicit Euler on the interacting Fisher-Rao / RKHS system:
/// multiplicative reaction update on mu, gradient step on f, both evaluated
/// at the pre-step state. The problem must have exactly the (f, mu) blocks.
FlowState interacting_flow_step(const SaddleProblem& problem, const FlowState& s, double dt);

/// max over recorded pairs s < t of
///   1/2||f(t)-h||^2 - 1/2 e^{-lambda (t-s)} ||f(s)-h||^2
///   - M_lambda(t-s) (V(h) - V(f(t)))
/// with M_lambda(tau) = (1 - e^{-lambda tau}) / lambda.
double evi_residual(const Energy& v, const std::vector<FlowState>& trajectory,
                    const RkhsFunction& h_ref);

}  // namespace kmp
