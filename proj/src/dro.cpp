#include "kmp/dro.hpp"

#include <algorithm>
#include <cmath>

#include "kmp/oracle.hpp"
#include "kmp/rng.hpp"

namespace kmp {

LossSpec make_logistic_loss(const std::vector<Vector>& grid) {
  double r = 0.0;
  for (const auto& z : grid) r = std::max(r, z.norm());
  LossSpec spec;
  spec.kind = "logistic";
  spec.value = [](const Vector& theta, const Vector& x) {
    const double t = theta.dot(x);
    // log(1 + e^{-t}) without overflow
    return t >= 0.0 ? std::log1p(std::exp(-t)) : -t + std::log1p(std::exp(t));
  };
  spec.grad_theta = [](const Vector& theta, const Vector& x) {
    const double t = theta.dot(x);
    const double s = t >= 0.0 ? std::exp(-t) / (1.0 + std::exp(-t)) : 1.0 / (1.0 + std::exp(t));
    return Vector(-s * x);
  };
  spec.l0 = r;
  spec.l1 = 0.25 * r * r;
  spec.l1_sup_mean = 0.25 * r * r;        // sup over the discretized M = max over atoms
  spec.l1_sup_mean_sq = std::pow(0.25 * r * r, 2);
  spec.convex_in_theta = true;
  spec.nonconvex_in_x = false;
  return spec;
}

LossSpec make_clipped_quadratic_loss(const std::vector<Vector>&, double clip) {
  if (!(clip > 0.0)) throw ConfigError("clipped quadratic loss: clip must be positive");
  LossSpec spec;
  spec.kind = "clipped_quadratic";
  spec.value = [clip](const Vector& theta, const Vector& x) {
    return std::min((theta - x).squaredNorm(), clip);
  };
  spec.grad_theta = [clip](const Vector& theta, const Vector& x) {
    const Vector d = theta - x;
    return d.squaredNorm() < clip ? Vector(2.0 * d) : Vector(Vector::Zero(theta.size()));
  };
  spec.l0 = 2.0 * std::sqrt(clip);
  spec.l1 = 2.0;
  spec.l1_sup_mean = 2.0;
  spec.l1_sup_mean_sq = 4.0;
  spec.convex_in_theta = false;  // min(convex, const) loses convexity
  spec.nonconvex_in_x = true;
  return spec;
}

namespace {

DroConfig validate_dro_config(DroConfig cfg) {
  if (cfg.grid.empty()) throw ConfigError("dro: empty grid");
  if (cfg.data.empty()) throw ConfigError("dro: needs at least one data point");
  if (!(cfg.epsilon > 0.0)) throw ConfigError("dro: epsilon must be positive");
  if (!(cfg.f_radius > 0.0)) throw ConfigError("dro: f radius must be positive");
  if (cfg.theta_box.dim() != cfg.grid.front().size())
    throw ConfigError("dro: theta box dimension != point dimension");
  if (!cfg.loss.value || !cfg.loss.grad_theta) throw ConfigError("dro: loss not registered");
  return cfg;
}

Vector empirical_weights_on_grid(const DroConfig& cfg) {
  const Eigen::Index m = static_cast<Eigen::Index>(cfg.grid.size());
  Vector w = Vector::Zero(m);
  for (std::size_t i = 0; i < cfg.data.size(); ++i) {
    bool found = false;
    for (Eigen::Index j = 0; j < m; ++j) {
      if (cfg.data[i].size() == cfg.grid[static_cast<std::size_t>(j)].size() &&
          (cfg.data[i] - cfg.grid[static_cast<std::size_t>(j)]).lpNorm<Eigen::Infinity>() <
              1e-9) {
        w[j] += 1.0;
        found = true;
        break;
      }
    }
    if (!found)
      throw ConfigError("dro: data point " + std::to_string(i) + " is not a grid atom");
  }
  return w / static_cast<double>(cfg.data.size());
}

RkhsFunction embedding_of_support(const Kernel& kernel, const std::vector<Vector>& grid,
                                  const Vector& weights) {
  std::vector<Vector> support;
  std::vector<double> support_w;
  for (Eigen::Index j = 0; j < weights.size(); ++j) {
    if (weights[j] > 0.0) {
      support.push_back(grid[static_cast<std::size_t>(j)]);
      support_w.push_back(weights[j]);
    }
  }
  Vector sw(static_cast<Eigen::Index>(support_w.size()));
  for (std::size_t j = 0; j < support_w.size(); ++j)
    sw[static_cast<Eigen::Index>(j)] = support_w[j];
  return RkhsFunction(kernel, std::move(support), std::move(sw));
}

}  // namespace

DroProblem::DroProblem(DroConfig cfg)
    : cfg_(validate_dro_config(std::move(cfg))),
      emp_weights_(empirical_weights_on_grid(cfg_)),
      emp_embedding_(embedding_of_support(cfg_.kernel, cfg_.grid, emp_weights_)),
      grid_gram_(cfg_.kernel.gram(cfg_.grid)) {
  gram_eig_.compute(grid_gram_);
  if (gram_eig_.info() != Eigen::Success)
    throw NumericalError("dro: Gram eigendecomposition failed");
}

Vector DroProblem::loss_values(const Vector& theta) const {
  Vector lz(static_cast<Eigen::Index>(cfg_.grid.size()));
  for (std::size_t j = 0; j < cfg_.grid.size(); ++j)
    lz[static_cast<Eigen::Index>(j)] = cfg_.loss.value(theta, cfg_.grid[j]);
  return lz;
}

double DroProblem::value(const SaddleState& u) const {
  check_feasible(u);
  const Vector fz = u.f->eval_at(cfg_.grid);
  const Vector lz = loss_values(*u.theta);
  return emp_weights_.dot(fz) + cfg_.epsilon * inner(*u.h, *u.f) +
         u.mu->weights().dot(lz - fz);
}

BlockDerivatives DroProblem::derivatives(const SaddleState& u) const {
  check_feasible(u);
  BlockDerivatives d;
  const Vector w = u.mu->weights();
  Vector g = Vector::Zero(u.theta->size());
  for (std::size_t j = 0; j < cfg_.grid.size(); ++j)
    g += w[static_cast<Eigen::Index>(j)] * cfg_.loss.grad_theta(*u.theta, cfg_.grid[j]);
  d.d_theta = std::move(g);
  const RkhsFunction e_mu = mean_embedding(*u.mu, cfg_.kernel);
  d.d_f = combine(1.0, combine(1.0, emp_embedding_, cfg_.epsilon, *u.h), -1.0, e_mu);
  d.d_mu = DualFunctionValues(loss_values(*u.theta) - u.f->eval_at(cfg_.grid));
  d.d_h = u.f->scaled(cfg_.epsilon);
  return d;
}

BlockLipschitz DroProblem::lipschitz() const {
  BlockLipschitz l;
  const double sqrt_c = std::sqrt(cfg_.kernel.sup_diag());
  l.table(0, 0) = cfg_.loss.l1;      // theta-theta
  l.table(0, 2) = cfg_.loss.l0;      // theta-mu
  l.table(1, 2) = sqrt_c;            // f-mu
  l.table(1, 3) = cfg_.epsilon;      // f-h
  l.table(2, 0) = cfg_.loss.l0;      // mu-theta
  l.table(2, 1) = sqrt_c;            // mu-f
  l.table(3, 1) = cfg_.epsilon;      // h-f
  return l;
}

Eigen::Vector4d DroProblem::noise_variances() const {
  Eigen::Vector4d v = Eigen::Vector4d::Zero();
  v[0] = cfg_.loss.l0 * cfg_.loss.l0;
  v[1] = 4.0 * cfg_.kernel.sup_diag();
  return v;
}

BlockDerivatives DroProblem::stochastic_derivatives(const SaddleState& u, int batch,
                                                    uint64_t seed) const {
  return stochastic_derivatives_split(u, batch, batch, seed);
}

BlockDerivatives DroProblem::stochastic_derivatives_split(const SaddleState& u, int n_theta,
                                                          int n_f, uint64_t seed) const {
  if (n_theta < 1 || n_f < 1) throw ConfigError("dro: stochastic batch sizes must be >= 1");
  check_feasible(u);
  BlockDerivatives d;
  const Vector w = u.mu->weights();

  {
    Rng rng(derive_seed(seed, 0x64726f2d746865ULL));
    Vector g = Vector::Zero(u.theta->size());
    for (int i = 0; i < n_theta; ++i) {
      const auto& x = cfg_.grid[static_cast<std::size_t>(rng.categorical(w))];
      g += cfg_.loss.grad_theta(*u.theta, x);
    }
    d.d_theta = Vector(g / n_theta);
  }
  {
    Rng rng(derive_seed(seed, 0x64726f2d66ULL));
    // eps h + 1/N_f Sum (k(.,Xhat_i) - k(.,X_i)); the printed variant keeps
    // the "+" on the mu-sample term and is biased (fidelity flag only).
    const double mu_sign = cfg_.paper_sign_variant ? 1.0 : -1.0;
    std::vector<Vector> atoms;
    Vector coeffs(2 * n_f);
    atoms.reserve(static_cast<std::size_t>(2 * n_f));
    for (int i = 0; i < n_f; ++i) {
      atoms.push_back(cfg_.grid[static_cast<std::size_t>(rng.categorical(emp_weights_))]);
      coeffs[2 * i] = 1.0 / n_f;
      atoms.push_back(cfg_.grid[static_cast<std::size_t>(rng.categorical(w))]);
      coeffs[2 * i + 1] = mu_sign / n_f;
    }
    d.d_f = combine(1.0, u.h->scaled(cfg_.epsilon), 1.0,
                    RkhsFunction(cfg_.kernel, std::move(atoms), std::move(coeffs)));
  }
  d.d_mu = DualFunctionValues(loss_values(*u.theta) - u.f->eval_at(cfg_.grid));
  d.d_h = u.f->scaled(cfg_.epsilon);
  return d;
}

namespace {

/// Euclidean projection onto the probability simplex (sort-based).
Vector project_simplex(const Vector& v) {
  const Eigen::Index n = v.size();
  std::vector<double> u(v.data(), v.data() + n);
  std::sort(u.begin(), u.end(), std::greater<double>());
  double css = 0.0, tau = 0.0;
  int rho = 0;
  for (Eigen::Index j = 0; j < n; ++j) {
    css += u[static_cast<std::size_t>(j)];
    const double t = (css - 1.0) / static_cast<double>(j + 1);
    if (u[static_cast<std::size_t>(j)] - t > 0.0) {
      rho = static_cast<int>(j + 1);
      tau = t;
    }
  }
  (void)rho;
  return (v.array() - tau).max(0.0);
}

/// Euclidean projection onto {w : (w-c)^T K (w-c) <= eps^2} via the spectral
/// secular equation.
class EllipsoidProjector {
 public:
  EllipsoidProjector(const Eigen::SelfAdjointEigenSolver<Matrix>& eig, Vector center, double eps)
      : q_(eig.eigenvectors()),
        lambda_(eig.eigenvalues().cwiseMax(0.0).eval()),
        center_(std::move(center)),
        eps_sq_(eps * eps) {}

  bool inside(const Vector& w) const {
    const Vector y = q_.transpose() * (w - center_);
    return lambda_.dot(y.cwiseProduct(y)) <= eps_sq_;
  }

  Vector project(const Vector& p) const {
    const Vector y0 = q_.transpose() * (p - center_);
    const double g0 = lambda_.dot(y0.cwiseProduct(y0));
    if (g0 <= eps_sq_) return p;
    // phi(nu) = Sum lambda_i y0_i^2 / (1 + nu lambda_i)^2 is decreasing;
    // bracket then Newton with bisection safeguard.
    auto phi = [&](double nu) {
      double s = 0.0;
      for (Eigen::Index i = 0; i < lambda_.size(); ++i) {
        const double den = 1.0 + nu * lambda_[i];
        s += lambda_[i] * y0[i] * y0[i] / (den * den);
      }
      return s;
    };
    auto dphi = [&](double nu) {
      double s = 0.0;
      for (Eigen::Index i = 0; i < lambda_.size(); ++i) {
        const double den = 1.0 + nu * lambda_[i];
        s += -2.0 * lambda_[i] * lambda_[i] * y0[i] * y0[i] / (den * den * den);
      }
      return s;
    };
    double lo = 0.0, hi = 1.0;
    while (phi(hi) > eps_sq_) {
      lo = hi;
      hi *= 2.0;
      if (hi > 1e18) throw NumericalError("ellipsoid projection failed to bracket");
    }
    double nu = 0.5 * (lo + hi);
    for (int it = 0; it < 200; ++it) {
      const double f = phi(nu) - eps_sq_;
      if (std::abs(f) <= 1e-15 * eps_sq_) break;
      if (f > 0.0)
        lo = nu;
      else
        hi = nu;
      const double step = f / dphi(nu);
      double next = nu - step;
      if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
      nu = next;
    }
    Vector y(y0.size());
    for (Eigen::Index i = 0; i < y0.size(); ++i) y[i] = y0[i] / (1.0 + nu * lambda_[i]);
    return center_ + q_ * y;
  }

 private:
  Matrix q_;
  Vector lambda_;
  Vector center_;
  double eps_sq_;
};

/// Dykstra alternation between the simplex and the ellipsoid.
Vector project_intersection(const Vector& p, const EllipsoidProjector& ell) {
  Vector x = p;
  Vector inc_s = Vector::Zero(p.size());
  Vector inc_e = Vector::Zero(p.size());
  for (int sweep = 0; sweep < 500; ++sweep) {
    const Vector y = project_simplex(x + inc_s);
    inc_s = x + inc_s - y;
    const Vector x_next = ell.project(y + inc_e);
    inc_e = y + inc_e - x_next;
    const double move = (x_next - x).lpNorm<Eigen::Infinity>();
    x = x_next;
    if (move < 1e-14) break;
  }
  // Last half-step lands on the simplex so iterates stay strictly feasible
  // for the linear objective bookkeeping.
  return project_simplex(x + inc_s);
}

}  // namespace

double dro_risk_with_center(const DroProblem& p, const Vector& theta, const Vector& center_w,
                            double epsilon) {
  if (!p.config().theta_box.contains(theta))
    throw NumericalError("dro_risk: theta outside the decision box");
  const Vector c = p.loss_values(theta);
  if (epsilon == 0.0) return c.dot(center_w);

  constexpr int kBudget = 2000;
  constexpr double kTol = 1e-8;
  const EllipsoidProjector ell(p.gram_eigensolver(), center_w, epsilon);
  const double c_spread = c.maxCoeff() - c.minCoeff();
  const double step = c_spread > 0.0 ? 1.0 / c_spread : 1.0;

  Vector w = center_w;
  double best = c.dot(w);
  for (int k = 0; k < kBudget; ++k) {
    const Vector w_next = project_intersection(w + step * c, ell);
    const double v = c.dot(w_next);
    if (v > best) best = v;
    const double move = (w_next - w).lpNorm<Eigen::Infinity>();
    w = w_next;
    if (move < kTol * 1e-2) break;
  }
  return best;
}

double dro_risk(const DroProblem& p, const Vector& theta) {
  return dro_risk_with_center(p, theta, p.empirical_weights(), p.epsilon());
}

double epsilon_n(int n, double delta, double c) {
  if (n < 1) throw ConfigError("epsilon_n: n must be >= 1");
  if (!(delta > 0.0 && delta < 1.0)) throw ConfigError("epsilon_n: delta must lie in (0,1)");
  if (!(c > 0.0)) throw ConfigError("epsilon_n: C must be positive");
  return std::sqrt(c / n) + std::sqrt(2.0 * c * std::log(1.0 / delta) / n);
}

SuboptimalityReport kmp_suboptimality_certificate(const DroProblem& p, const RunRecord& record,
                                                  const GapSets& sets) {
  if (!record.averaged.theta) throw ConfigError("certificate: record has no theta block");
  SuboptimalityReport rep;
  rep.theta_kmp = *record.averaged.theta;
  rep.theta_oracle = oracle_dro_minimizer(p, MeshSpec{});
  rep.risk_kmp = dro_risk(p, rep.theta_kmp);
  rep.risk_oracle = dro_risk(p, rep.theta_oracle);
  rep.risk_difference = rep.risk_kmp - rep.risk_oracle;
  rep.duality_gap_value = duality_gap(p, record.averaged, sets);
  rep.gap_bound = theorem_gap_bound(p.lipschitz().max(),
                                    gap_diameter_sq(p, sets, p.initial_state()),
                                    record.iterations);
  rep.l1_used = p.loss().l1;
  rep.l1_sup_mean = p.loss().l1_sup_mean;
  rep.l1_sup_mean_sq = p.loss().l1_sup_mean_sq;
  rep.holds = rep.risk_difference <= rep.duality_gap_value + rep.subsolver_tol;
  return rep;
}

RobustnessReport robustness_report(const DroProblem& p, const Vector& theta_hat,
                                   const DiscreteMeasure& mu0, double delta, double epsilon) {
  if (mu0.size() != static_cast<Eigen::Index>(p.grid().size()))
    throw ConfigError("robustness_report: mu0 must live on the problem grid");
  RobustnessReport rep;
  rep.epsilon = epsilon;
  rep.epsilon_n_value = epsilon_n(static_cast<int>(p.data_size()), delta, p.kernel().sup_diag());
  rep.epsilon_warning = epsilon <= rep.epsilon_n_value;

  const DiscreteMeasure mu_hat = DiscreteMeasure::from_weights(p.grid(), p.empirical_weights());
  rep.mmd_emp_pop = mmd(mu_hat, mu0, p.kernel());
  rep.population_risk = mu0.weights().dot(p.loss_values(theta_hat));
  rep.dro_risk_emp = dro_risk_with_center(p, theta_hat, p.empirical_weights(), epsilon);
  rep.population_clause_applicable = rep.mmd_emp_pop <= epsilon;
  rep.population_clause_holds = rep.population_risk <= rep.dro_risk_emp + 1e-9;

  rep.shifted_risk = dro_risk_with_center(p, theta_hat, mu0.weights(), epsilon);
  const Vector theta_star = oracle_dro_minimizer(p, MeshSpec{}, p.empirical_weights(), epsilon);
  rep.oracle_risk_emp = dro_risk_with_center(p, theta_star, p.empirical_weights(), epsilon);
  rep.shift_slack = rep.shifted_risk - rep.oracle_risk_emp;
  return rep;
}

}  // namespace kmp
