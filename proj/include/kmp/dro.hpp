#pragma once

#include <Eigen/Eigenvalues>
#include <functional>
#include <string>

#include "kmp/solver.hpp"

namespace kmp {

/// Registered loss l(theta; x) with gradient and Lipschitz metadata.
struct LossSpec {
  std::string kind;
  std::function<double(const Vector& theta, const Vector& x)> value;
  std::function<Vector(const Vector& theta, const Vector& x)> grad_theta;
  double l0 = 0.0;            // sup ||grad_theta l||_2
  double l1 = 0.0;            // curvature bound used as L_theta_theta (sup_x L(x))
  double l1_sup_mean = 0.0;   // sup_mu E L(x) candidate
  double l1_sup_mean_sq = 0.0;// sup_mu E L(x)^2 candidate
  bool convex_in_theta = false;
  bool nonconvex_in_x = false;
};

/// log(1 + exp(-<theta, x>)); labels absorbed into x. Constants derived from
/// the grid radius.
LossSpec make_logistic_loss(const std::vector<Vector>& grid);

/// min(||theta - x||^2, clip): deliberately non-convex in x (and theta).
LossSpec make_clipped_quadratic_loss(const std::vector<Vector>& grid, double clip);

struct DroConfig {
  Kernel kernel;
  std::vector<Vector> grid;
  std::vector<Vector> data;
  double epsilon = 0.0;
  LossSpec loss;
  Box theta_box;
  double f_radius = 10.0;
  bool paper_sign_variant = false;  // keep the printed "+k(.,X_i)" f-estimator
};

/// MMD-ball DRO as the smooth 4-block saddle problem
///   F(theta,f,mu,h) = 1/n Sum f(x_i) + eps <h,f> + E_mu[l(theta;x) - f(x)].
class DroProblem : public SaddleProblem {
 public:
  explicit DroProblem(DroConfig cfg);

  BlockActive blocks() const override { return {.theta = true, .f = true, .mu = true, .h = true}; }
  double value(const SaddleState& u) const override;
  BlockDerivatives derivatives(const SaddleState& u) const override;
  BlockLipschitz lipschitz() const override;
  const Kernel& kernel() const override { return cfg_.kernel; }
  const std::vector<Vector>& grid() const override { return cfg_.grid; }
  FeasibleSets feasible() const override {
    return {cfg_.theta_box, HilbertBall(cfg_.kernel, cfg_.f_radius)};
  }

  bool has_noise() const override { return true; }
  Eigen::Vector4d noise_variances() const override;
  BlockDerivatives stochastic_derivatives(const SaddleState& u, int batch,
                                          uint64_t seed) const override;
  /// Separate batch sizes for the theta and f estimators; mu/h blocks are
  /// exact (they are cheap).
  BlockDerivatives stochastic_derivatives_split(const SaddleState& u, int n_theta, int n_f,
                                                uint64_t seed) const;

  const DroConfig& config() const { return cfg_; }
  const LossSpec& loss() const { return cfg_.loss; }
  double epsilon() const { return cfg_.epsilon; }
  Eigen::Index data_size() const { return static_cast<Eigen::Index>(cfg_.data.size()); }
  const Vector& empirical_weights() const { return emp_weights_; }
  const RkhsFunction& empirical_embedding() const { return emp_embedding_; }
  const Matrix& grid_gram() const { return grid_gram_; }
  const Eigen::SelfAdjointEigenSolver<Matrix>& gram_eigensolver() const { return gram_eig_; }

  Vector loss_values(const Vector& theta) const;  // l(theta; z) over the grid

 private:
  DroConfig cfg_;
  Vector emp_weights_;          // empirical measure on the grid
  RkhsFunction emp_embedding_;  // \hat e = 1/n Sum k(x_i, .)
  Matrix grid_gram_;
  Eigen::SelfAdjointEigenSolver<Matrix> gram_eig_;
};

/// Worst-case risk Z_{eps,center}(theta): maximize E_w l(theta;.) over
/// simplex weights w with (w - center)^T K (w - center) <= eps^2. Projected
/// gradient ascent with Dykstra projections; budget 2000, tolerance 1e-8.
double dro_risk(const DroProblem& p, const Vector& theta);
double dro_risk_with_center(const DroProblem& p, const Vector& theta, const Vector& center_w,
                            double epsilon);

/// eps_n(delta) = sqrt(C/n) + sqrt(2 C log(1/delta) / n).
double epsilon_n(int n, double delta, double c);

struct SuboptimalityReport {
  Vector theta_kmp;
  Vector theta_oracle;
  double risk_kmp = 0.0;
  double risk_oracle = 0.0;
  double risk_difference = 0.0;
  double duality_gap_value = 0.0;
  double gap_bound = 0.0;        // 8 L D^2 / N
  double subsolver_tol = 1e-6;
  bool holds = false;            // risk_difference <= gap + tol
  double l1_used = 0.0;
  double l1_sup_mean = 0.0;
  double l1_sup_mean_sq = 0.0;
};

/// Compares the DRO risk of the averaged decision against the oracle
/// minimizer; the risk difference, the certified duality gap, and the
/// theorem bound are reported together.
SuboptimalityReport kmp_suboptimality_certificate(const DroProblem& p, const RunRecord& record,
                                                  const GapSets& sets);

struct RobustnessReport {
  double epsilon = 0.0;
  double epsilon_n_value = 0.0;
  bool epsilon_warning = false;       // epsilon <= eps_n: clauses not asserted
  double mmd_emp_pop = 0.0;           // mmd(mu_hat, mu0)
  double population_risk = 0.0;       // E_mu0 l(theta)
  double dro_risk_emp = 0.0;          // Z_{eps, mu_hat}(theta)
  bool population_clause_applicable = false;  // mmd <= eps
  bool population_clause_holds = false;
  double shifted_risk = 0.0;          // Z_{eps, mu0}(theta)
  double oracle_risk_emp = 0.0;       // Z_{eps, mu_hat}(theta*)
  double shift_slack = 0.0;           // shifted_risk - oracle_risk_emp
};

RobustnessReport robustness_report(const DroProblem& p, const Vector& theta_hat,
                                   const DiscreteMeasure& mu0, double delta, double epsilon);

}  // namespace kmp
