#include "kmp/flow.hpp"

#include <cmath>
#include <limits>

namespace kmp {

Energy quadratic_energy(const RkhsFunction& target) {
  Energy v;
  v.value = [target](const RkhsFunction& f) {
    return 0.5 * combine(1.0, f, -1.0, target).norm_sq();
  };
  v.derivative = [target](const RkhsFunction& f) { return combine(1.0, f, -1.0, target); };
  v.lambda = 1.0;
  return v;
}

FlowState rkhs_flow_step(const Energy& v, const FlowState& s, double dt) {
  if (!(dt > 0.0)) throw ConfigError("flow: dt must be positive");
  return {s.t + dt, dictionary_compress(combine(1.0, s.f, -dt, v.derivative(s.f)), 0.0), s.mu};
}

FlowState interacting_flow_step(const SaddleProblem& problem, const FlowState& s, double dt) {
  if (!(dt > 0.0)) throw ConfigError("flow: dt must be positive");
  const BlockActive act = problem.blocks();
  if (act.theta || act.h || !act.f || !act.mu)
    throw ConfigError("interacting flow: problem must have exactly the (f, mu) blocks");
  if (!s.mu) throw ConfigError("interacting flow: state carries no measure");

  SaddleState u;
  u.f = s.f;
  u.mu = s.mu;
  const BlockDerivatives d = problem.derivatives(u);

  const Vector& g = d.d_mu->values;
  const Vector w = s.mu->weights();
  const double g_mean = w.dot(g);
  const double dev = (g.array() - g_mean).abs().maxCoeff();
  if (dev > 0.0 && dt > 1.0 / (2.0 * dev))
    throw ConfigError("interacting flow: dt exceeds the positivity cap 1/(2 max|g - mean|)");

  return {s.t + dt, dictionary_compress(combine(1.0, s.f, -dt, *d.d_f), 0.0),
          DiscreteMeasure(s.mu->atoms(),
                          s.mu->log_weights() + dt * (g.array() - g_mean).matrix())};
}

double evi_residual(const Energy& v, const std::vector<FlowState>& trajectory,
                    const RkhsFunction& h_ref) {
  if (trajectory.empty()) throw ConfigError("evi_residual: empty trajectory");
  const std::size_t n = trajectory.size();
  std::vector<double> dist_sq(n), energy(n);
  for (std::size_t i = 0; i < n; ++i) {
    dist_sq[i] = combine(1.0, trajectory[i].f, -1.0, h_ref).norm_sq();
    energy[i] = v.value(trajectory[i].f);
  }
  const double v_h = v.value(h_ref);
  const double lambda = v.lambda;
  auto m_lambda = [lambda](double tau) {
    return lambda != 0.0 ? (1.0 - std::exp(-lambda * tau)) / lambda : tau;
  };
  if (n < 2) return 0.0;  // vacuous
  double residual = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double tau = trajectory[j].t - trajectory[i].t;
      const double r = 0.5 * dist_sq[j] - 0.5 * std::exp(-lambda * tau) * dist_sq[i] -
                       m_lambda(tau) * (v_h - energy[j]);
      if (r > residual) residual = r;
    }
  }
  return residual;
}

}  // namespace kmp
