#include "kmp/solver.hpp"

#include <chrono>
#include <cmath>
#include <functional>
#include <set>

#include "kmp/rng.hpp"

namespace kmp {

StepSizes step_size_theorem(double lipschitz_max, double eta_max) {
  if (lipschitz_max < 0.0) throw ConfigError("step_size_theorem: negative Lipschitz constant");
  if (lipschitz_max == 0.0) return StepSizes::all(eta_max);
  return StepSizes::all(1.0 / (16.0 * lipschitz_max));
}

DiameterStep step_size_diameter(double lipschitz_max, double sigma_sq, double omega_sq,
                                int n_steps, double eta_max, bool optimizing_variant) {
  if (n_steps < 1) throw ConfigError("step_size_diameter: N must be >= 1");
  if (sigma_sq < 0.0 || omega_sq < 0.0 || lipschitz_max < 0.0)
    throw ConfigError("step_size_diameter: negative input");
  if (sigma_sq == 0.0) return {step_size_theorem(lipschitz_max, eta_max), 0.0};
  const double sigma = std::sqrt(sigma_sq);
  const double omega = std::sqrt(omega_sq);
  const double theorem_term =
      lipschitz_max > 0.0 ? 1.0 / (16.0 * lipschitz_max) : eta_max;
  const double sigma_term = optimizing_variant
                                ? omega / (sigma * std::sqrt(6.0 * n_steps))
                                : omega * sigma / std::sqrt(6.0 * n_steps);
  const double eta = std::min(theorem_term, sigma_term);
  const double bound = std::max(8.0 * lipschitz_max * omega_sq / n_steps,
                                std::sqrt(3.0 * sigma_sq * omega_sq / (2.0 * n_steps)));
  return {StepSizes::all(eta), bound};
}

GapSets default_gap_sets(const SaddleProblem& problem) {
  const FeasibleSets fs = problem.feasible();
  return {fs.theta_box, fs.f_ball};
}

double theorem_gap_bound(double lipschitz_max, double diameter_sq, int n_steps) {
  return 8.0 * lipschitz_max * diameter_sq / n_steps;
}

namespace {

void require_positive_steps(const BlockActive& act, const StepSizes& eta) {
  if ((act.theta && !(eta.theta > 0.0)) || (act.f && !(eta.f > 0.0)) ||
      (act.mu && !(eta.mu > 0.0)) || (act.h && !(eta.h > 0.0)))
    throw ConfigError("solver: step sizes must be positive on active blocks");
}

/// One simultaneous mirror step from `base` along derivatives `d`.
SaddleState mirror_step(const SaddleProblem& p, const FeasibleSets& fs, const SaddleState& base,
                        const BlockDerivatives& d, const StepSizes& eta, double compress_tol) {
  SaddleState out = base;
  if (base.theta) {
    Vector t = *base.theta - eta.theta * *d.d_theta;
    out.theta = fs.theta_box ? fs.theta_box->project(t) : std::move(t);
  }
  if (base.f) {
    const HilbertBall ball =
        fs.f_ball ? *fs.f_ball : HilbertBall(p.kernel(), HilbertBall::unbounded());
    out.f = dictionary_compress(md_step_hilbert(*base.f, *d.d_f, eta.f, ball), compress_tol);
  }
  if (base.mu) {
    out.mu = md_step_measure(*base.mu, DualFunctionValues(-d.d_mu->values), eta.mu);
  }
  if (base.h) {
    const HilbertBall unit(p.kernel(), 1.0);
    out.h = dictionary_compress(md_step_hilbert(*base.h, d.d_h->scaled(-1.0), eta.h, unit),
                                compress_tol);
  }
  return out;
}

std::set<int> gap_schedule(GapCadence cadence, int n_steps) {
  std::set<int> s;
  switch (cadence) {
    case GapCadence::Every:
      for (int k = 1; k <= n_steps; ++k) s.insert(k);
      break;
    case GapCadence::Log:
      for (int j = 0;; ++j) {
        const int c = static_cast<int>(std::llround(std::pow(10.0, 0.5 * j)));
        if (c > n_steps) break;
        s.insert(c);
      }
      s.insert(n_steps);
      break;
    case GapCadence::Final:
      s.insert(n_steps);
      break;
    case GapCadence::None:
      break;
  }
  return s;
}

struct Averager {
  std::optional<Vector> theta_sum;
  std::optional<RkhsFunction> f_sum;
  std::optional<Vector> mu_w_sum;
  std::optional<RkhsFunction> h_sum;
  int count = 0;

  void add(const SaddleState& u) {
    ++count;
    if (u.theta) theta_sum = theta_sum ? Vector(*theta_sum + *u.theta) : *u.theta;
    if (u.f) f_sum = f_sum ? dictionary_compress(combine(1.0, *f_sum, 1.0, *u.f), 0.0) : *u.f;
    if (u.mu)
      mu_w_sum = mu_w_sum ? Vector(*mu_w_sum + u.mu->weights()) : Vector(u.mu->weights());
    if (u.h) h_sum = h_sum ? dictionary_compress(combine(1.0, *h_sum, 1.0, *u.h), 0.0) : *u.h;
  }

  SaddleState mean(const SaddleProblem& p) const {
    SaddleState out;
    const double inv = 1.0 / count;
    if (theta_sum) out.theta = inv * *theta_sum;
    if (f_sum) out.f = f_sum->scaled(inv);
    if (mu_w_sum) out.mu = DiscreteMeasure::from_weights(p.grid(), inv * *mu_w_sum);
    if (h_sum) out.h = h_sum->scaled(inv);
    return out;
  }
};

using DerivFn = std::function<BlockDerivatives(const SaddleState&, int iter, bool leader)>;

RunRecord run_loop(const SaddleProblem& p, const SaddleState& u0, const StepSizes& eta,
                   int n_steps, const RunOptions& opts, const DerivFn& deriv) {
  if (n_steps < 1) throw ConfigError("solver: N must be >= 1");
  require_positive_steps(p.blocks(), eta);
  p.check_feasible(u0);

  const auto t_start = std::chrono::steady_clock::now();
  const FeasibleSets fs = p.feasible();
  const std::set<int> schedule = gap_schedule(opts.cadence, n_steps);

  RunRecord rec;
  Averager avg;
  SaddleState extra = u0;  // the extrapolation point \tilde u_k
  for (int k = 0; k < n_steps; ++k) {
    const BlockDerivatives d_extra = deriv(extra, k, false);
    const SaddleState leader = mirror_step(p, fs, extra, d_extra, eta, opts.compress_tol);
    const BlockDerivatives d_leader = deriv(leader, k, true);
    extra = mirror_step(p, fs, extra, d_leader, eta, opts.compress_tol);

    avg.add(leader);
    if (opts.record_history && (k % opts.history_stride == 0)) rec.history.push_back(leader);

    if (schedule.count(k + 1)) {
      const SaddleState bar = avg.mean(p);
      const double wall_ms =
          std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t_start)
              .count();
      rec.trace.push_back(
          {k + 1, duality_gap(p, bar, opts.gap_sets), p.value(bar), wall_ms});
    }
  }
  rec.averaged = avg.mean(p);
  rec.iterations = n_steps;
  rec.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
  return rec;
}

}  // namespace

RunRecord kmp_run(const SaddleProblem& problem, const SaddleState& u0, const StepSizes& steps,
                  int n_steps, const RunOptions& opts) {
  return run_loop(problem, u0, steps, n_steps, opts,
                  [&](const SaddleState& u, int, bool) { return problem.derivatives(u); });
}

RunRecord kmp_run_stochastic(const SaddleProblem& problem, const SaddleState& u0,
                             const StepSizes& steps, int n_steps, int batch, uint64_t seed,
                             const RunOptions& opts) {
  if (!problem.has_noise()) throw ConfigError("stochastic run: problem declares no noise source");
  if (batch < 1) throw ConfigError("stochastic run: batch must be >= 1");
  RunRecord rec = run_loop(
      problem, u0, steps, n_steps, opts, [&](const SaddleState& u, int iter, bool leader) {
        const uint64_t call_seed =
            derive_seed(seed, 2ULL * static_cast<uint64_t>(iter) + (leader ? 1ULL : 0ULL));
        return problem.stochastic_derivatives(u, batch, call_seed);
      });
  rec.batch = batch;
  rec.seed = seed;
  return rec;
}

namespace {

/// min over the ball of psi(f) = (q/2)||f||^2 + <g, f>, reported as
/// psi(argmin) - psi(fbar) <= 0.
double f_inner_min_delta(const SaddleProblem& p, const RkhsFunction& fbar,
                         const RkhsFunction& d_f, const HilbertBall& ball) {
  const double q = p.f_curvature();
  const RkhsFunction g = combine(1.0, d_f, -q, fbar);  // linear coefficient of F in f
  auto psi = [&](const RkhsFunction& f) { return 0.5 * q * f.norm_sq() + inner(g, f); };
  const double psi_bar = psi(fbar);
  if (q > 0.0) {
    const RkhsFunction unconstrained = g.scaled(-1.0 / q);
    if (ball.contains(unconstrained)) return -0.5 * g.norm_sq() / q - psi_bar;
    const RkhsFunction offset = combine(1.0, unconstrained, -1.0, ball.center);
    const RkhsFunction boundary = combine(1.0, ball.center, ball.radius / offset.norm(), offset);
    return psi(boundary) - psi_bar;
  }
  const double gn = g.norm();
  if (gn == 0.0) return 0.0;
  if (ball.is_unbounded())
    throw NumericalError("duality_gap: linear f-objective unbounded on an infinite ball");
  const RkhsFunction boundary = combine(1.0, ball.center, -ball.radius / gn, g);
  return psi(boundary) - psi_bar;
}

/// Projected gradient descent on phi(theta) = F(theta, rest of u fixed);
/// budget 500 iterations, improvement tolerance 1e-9.
double theta_inner_min_delta(const SaddleProblem& p, const SaddleState& u, const Box& box) {
  constexpr int kBudget = 500;
  constexpr double kTol = 1e-9;
  SaddleState probe = u;
  auto phi = [&](const Vector& t) {
    probe.theta = t;
    return p.value(probe);
  };
  auto grad = [&](const Vector& t) {
    probe.theta = t;
    return *p.derivatives(probe).d_theta;
  };
  const double l_tt = p.lipschitz().table(0, 0);
  double step = l_tt > 0.0 ? 1.0 / l_tt : 1.0;
  Vector theta = *u.theta;
  double best = phi(theta);
  const double phi_bar = best;
  for (int it = 0; it < kBudget; ++it) {
    const Vector g = grad(theta);
    bool moved = false;
    for (int halving = 0; halving < 40 && !moved; ++halving) {
      const Vector cand = box.project(theta - step * g);
      if ((cand - theta).norm() <= kTol * (1.0 + theta.norm())) return best - phi_bar;
      const double v = phi(cand);
      if (v <= best) {
        theta = cand;
        best = v;
        moved = true;
      } else {
        step *= 0.5;
      }
    }
    if (!moved) break;
  }
  return best - phi_bar;
}

}  // namespace

double duality_gap(const SaddleProblem& problem, const SaddleState& u, const GapSets& sets) {
  problem.check_feasible(u);
  if (u.theta) {
    if (!sets.theta_box) throw ConfigError("duality_gap: theta block needs a gap box");
    if (!sets.theta_box->contains(*u.theta, 1e-7))
      throw NumericalError("duality_gap: state outside U_theta");
  }
  if (u.f) {
    if (!sets.f_ball) throw ConfigError("duality_gap: f block needs a gap ball");
    if (!sets.f_ball->contains(*u.f, 1e-7 * std::max(1.0, sets.f_ball->radius)))
      throw NumericalError("duality_gap: state outside U_f");
  }

  const BlockDerivatives d = problem.derivatives(u);
  const double value_u = problem.value(u);
  double g_max = value_u;
  double g_min = value_u;

  // F is linear in mu and in h with no mu-h coupling, so the joint max
  // separates: best simplex vertex for mu, radial for h.
  if (u.mu) {
    const Vector& g = d.d_mu->values;
    double best = g[0];
    for (Eigen::Index i = 1; i < g.size(); ++i)
      if (g[i] > best) best = g[i];
    g_max += best - u.mu->weights().dot(g);
  }
  if (u.h) g_max += d.d_h->norm() - inner(*d.d_h, *u.h);

  if (u.f) g_min += f_inner_min_delta(problem, *u.f, *d.d_f, *sets.f_ball);
  if (u.theta) g_min += theta_inner_min_delta(problem, u, *sets.theta_box);

  return g_max - g_min;
}

double gap_diameter_sq(const SaddleProblem& problem, const GapSets& sets, const SaddleState& u0) {
  const BlockActive act = problem.blocks();
  double d_sq = 0.0;
  if (act.theta) {
    if (!sets.theta_box || !u0.theta) throw ConfigError("gap_diameter_sq: missing theta data");
    d_sq += sets.theta_box->max_dist_sq(*u0.theta);
  }
  if (act.f) {
    if (!sets.f_ball || !u0.f) throw ConfigError("gap_diameter_sq: missing f data");
    if (sets.f_ball->is_unbounded())
      throw ConfigError("gap_diameter_sq: U_f must be compact");
    const double r = sets.f_ball->radius + dist(sets.f_ball->center, *u0.f);
    d_sq += r * r;
  }
  if (act.mu) {
    if (!u0.mu) throw ConfigError("gap_diameter_sq: missing mu data");
    // max over the simplex of KL(mu, mu0) is attained at a vertex.
    d_sq += 2.0 * (-u0.mu->log_weights().minCoeff());
  }
  if (act.h) {
    if (!u0.h) throw ConfigError("gap_diameter_sq: missing h data");
    const double r = 1.0 + u0.h->norm();
    d_sq += r * r;
  }
  return d_sq;
}

}  // namespace kmp
