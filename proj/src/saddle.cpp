#include "kmp/saddle.hpp"

#include <cmath>

#include "kmp/rng.hpp"

namespace kmp {

BlockDerivatives SaddleProblem::stochastic_derivatives(const SaddleState&, int, uint64_t) const {
  throw ConfigError("problem declares no noise source");
}

SaddleState SaddleProblem::initial_state() const {
  const BlockActive act = blocks();
  const FeasibleSets fs = feasible();
  SaddleState u;
  if (act.theta) {
    if (!fs.theta_box) throw ConfigError("theta block active but no box configured");
    u.theta = fs.theta_box->center();
  }
  if (act.f) u.f = RkhsFunction::zero(kernel());
  if (act.mu) u.mu = DiscreteMeasure::uniform(grid());
  if (act.h) u.h = RkhsFunction::zero(kernel());
  return u;
}

void SaddleProblem::check_feasible(const SaddleState& u, double tol) const {
  const BlockActive act = blocks();
  const FeasibleSets fs = feasible();
  if (act.theta) {
    if (!u.theta) throw NumericalError("state missing active theta block");
    if (fs.theta_box && !fs.theta_box->contains(*u.theta, tol))
      throw NumericalError("infeasible state: theta outside box");
  }
  if (act.f) {
    if (!u.f) throw NumericalError("state missing active f block");
    if (fs.f_ball && !fs.f_ball->contains(*u.f, tol * std::max(1.0, fs.f_ball->radius)))
      throw NumericalError("infeasible state: f outside ball");
  }
  if (act.mu) {
    if (!u.mu) throw NumericalError("state missing active mu block");
    if (u.mu->size() != static_cast<Eigen::Index>(grid().size()))
      throw NumericalError("infeasible state: mu not on the problem grid");
  }
  if (act.h) {
    if (!u.h) throw NumericalError("state missing active h block");
    if (u.h->norm() > 1.0 + tol) throw NumericalError("infeasible state: ||h|| > 1");
  }
}

MatchingGame::MatchingGame(Kernel kernel, std::vector<Vector> atoms, DiscreteMeasure nu,
                           double f_radius)
    : kernel_(kernel),
      atoms_(std::move(atoms)),
      nu_(std::move(nu)),
      e_nu_(mean_embedding(nu_, kernel_)),
      f_radius_(f_radius) {
  if (atoms_.empty()) throw ConfigError("matching game: empty atom grid");
  if (!(f_radius_ > 0.0)) throw ConfigError("matching game: f radius must be positive");
  for (const auto& x : nu_.atoms()) {
    bool on_grid = false;
    for (const auto& z : atoms_)
      if (z.size() == x.size() && (z - x).lpNorm<Eigen::Infinity>() < 1e-12) {
        on_grid = true;
        break;
      }
    if (!on_grid) throw ConfigError("matching game: nu atom outside grid");
  }
}

double MatchingGame::value(const SaddleState& u) const {
  check_feasible(u);
  const RkhsFunction& f = *u.f;
  const DiscreteMeasure& mu = *u.mu;
  const double f_mean_mu = mu.weights().dot(f.eval_at(mu.atoms()));
  const double f_mean_nu = nu_.weights().dot(f.eval_at(nu_.atoms()));
  return 0.5 * f.norm_sq() + f_mean_mu - f_mean_nu;
}

BlockDerivatives MatchingGame::derivatives(const SaddleState& u) const {
  check_feasible(u);
  BlockDerivatives d;
  const RkhsFunction e_mu = mean_embedding(*u.mu, kernel_);
  d.d_f = combine(1.0, combine(1.0, *u.f, 1.0, e_mu), -1.0, e_nu_);
  d.d_mu = DualFunctionValues(u.f->eval_at(u.mu->atoms()));
  return d;
}

BlockLipschitz MatchingGame::lipschitz() const {
  BlockLipschitz l;
  const double sqrt_c = std::sqrt(kernel_.sup_diag());
  l.table(1, 1) = 1.0;      // f-f
  l.table(1, 2) = sqrt_c;   // f-mu
  l.table(2, 1) = sqrt_c;   // mu-f
  return l;
}

double MatchingGame::closed_form_gap(const SaddleState& u) const {
  check_feasible(u);
  const RkhsFunction& f = *u.f;
  const double best_atom = f.eval_at(atoms_).maxCoeff();
  const double f_mean_nu = nu_.weights().dot(f.eval_at(nu_.atoms()));
  const double m = mmd(*u.mu, nu_, kernel_);
  return (0.5 * f.norm_sq() + best_atom - f_mean_nu) + 0.5 * m * m;
}

std::shared_ptr<MatchingGame> make_mmd_matching_game(Kernel kernel, std::vector<Vector> atoms,
                                                     DiscreteMeasure nu, double f_radius) {
  return std::make_shared<MatchingGame>(kernel, std::move(atoms), std::move(nu), f_radius);
}

AdditiveNoiseProblem::AdditiveNoiseProblem(std::shared_ptr<const SaddleProblem> base,
                                           double sigma_f, double sigma_mu, double sigma_theta,
                                           double sigma_h)
    : base_(std::move(base)),
      sigma_theta_(sigma_theta),
      sigma_f_(sigma_f),
      sigma_mu_(sigma_mu),
      sigma_h_(sigma_h) {
  double tr = 0.0;
  for (const auto& z : base_->grid()) tr += base_->kernel()(z, z);
  // Coefficient noise v ~ N(0, s^2 I) on the grid dictionary has
  // E||Sum v_j k(z_j,.)||_H^2 = s^2 tr(K); s = sigma / sqrt(tr K) hits the
  // declared variance exactly.
  inv_sqrt_trace_ = 1.0 / std::sqrt(tr);
}

Eigen::Vector4d AdditiveNoiseProblem::noise_variances() const {
  const BlockActive act = base_->blocks();
  Eigen::Vector4d v = Eigen::Vector4d::Zero();
  if (act.theta) v[0] = sigma_theta_ * sigma_theta_;
  if (act.f) v[1] = sigma_f_ * sigma_f_;
  if (act.mu) v[2] = sigma_mu_ * sigma_mu_;
  if (act.h) v[3] = sigma_h_ * sigma_h_;
  return v;
}

BlockDerivatives AdditiveNoiseProblem::stochastic_derivatives(const SaddleState& u, int batch,
                                                              uint64_t seed) const {
  if (batch < 1) throw ConfigError("stochastic_derivatives: batch must be >= 1");
  BlockDerivatives d = base_->derivatives(u);
  if (noise_variances().isZero()) return d;

  const Eigen::Index m = static_cast<Eigen::Index>(base_->grid().size());
  if (d.d_theta && sigma_theta_ > 0.0) {
    Rng rng(derive_seed(seed, 0x7468657461ULL));
    const Eigen::Index dim = d.d_theta->size();
    Vector acc = Vector::Zero(dim);
    for (int b = 0; b < batch; ++b)
      acc += rng.normal_vector(dim) * (sigma_theta_ / std::sqrt(static_cast<double>(dim)));
    *d.d_theta += acc / batch;
  }
  if (d.d_f && sigma_f_ > 0.0) {
    Rng rng(derive_seed(seed, 0x66626c6bULL));
    Vector acc = Vector::Zero(m);
    for (int b = 0; b < batch; ++b) acc += rng.normal_vector(m) * (sigma_f_ * inv_sqrt_trace_);
    d.d_f = combine(1.0, *d.d_f, 1.0, RkhsFunction(base_->kernel(), base_->grid(), acc / batch));
  }
  if (d.d_mu && sigma_mu_ > 0.0) {
    // One random coordinate per draw: E||noise||_inf^2 = sigma_mu^2 exactly,
    // and a batch mean has E||.||_inf^2 <= sigma_mu^2 / batch.
    Rng rng(derive_seed(seed, 0x6d75626c6bULL));
    Vector acc = Vector::Zero(d.d_mu->size());
    for (int b = 0; b < batch; ++b) {
      const Eigen::Index j =
          static_cast<Eigen::Index>(rng.next_u64() % static_cast<uint64_t>(d.d_mu->size()));
      acc[j] += sigma_mu_ * rng.normal();
    }
    d.d_mu->values += acc / batch;
  }
  if (d.d_h && sigma_h_ > 0.0) {
    Rng rng(derive_seed(seed, 0x68626c6bULL));
    Vector acc = Vector::Zero(m);
    for (int b = 0; b < batch; ++b) acc += rng.normal_vector(m) * (sigma_h_ * inv_sqrt_trace_);
    d.d_h = combine(1.0, *d.d_h, 1.0,
                    RkhsFunction(base_->kernel(), base_->grid(), acc / batch));
  }
  return d;
}

}  // namespace kmp
