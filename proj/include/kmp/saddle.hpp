#pragma once

#include <memory>
#include <optional>

#include "kmp/rkhs.hpp"

namespace kmp {

/// Block tuple u = (theta, f, mu, h); a problem activates a subset.
struct SaddleState {
  std::optional<Vector> theta;          // min block, Euclidean
  std::optional<RkhsFunction> f;        // min block, RKHS
  std::optional<DiscreteMeasure> mu;    // max block, simplex over a fixed grid
  std::optional<RkhsFunction> h;        // max block, unit RKHS ball
};

struct BlockActive {
  bool theta = false;
  bool f = false;
  bool mu = false;
  bool h = false;
};

/// Exact Frechet derivatives F'_kappa per active block. The solver owns the
/// update signs: descent on (theta, f), ascent on (mu, h).
struct BlockDerivatives {
  std::optional<Vector> d_theta;
  std::optional<RkhsFunction> d_f;
  std::optional<DualFunctionValues> d_mu;  // values at the state's mu atoms
  std::optional<RkhsFunction> d_h;
};

/// Cross-block Lipschitz table; rows/cols ordered (theta, f, mu, h).
struct BlockLipschitz {
  Eigen::Matrix4d table = Eigen::Matrix4d::Zero();
  double max() const { return table.maxCoeff(); }
};

enum class Block { Theta, F, Mu, H };

/// Feasibility sets the solver projects onto. The mu block is always the
/// full simplex over the problem grid; the h block the closed unit ball.
struct FeasibleSets {
  std::optional<Box> theta_box;
  std::optional<HilbertBall> f_ball;
};

/// Compact sets over which the duality gap is certified.
struct GapSets {
  std::optional<Box> theta_box;
  std::optional<HilbertBall> f_ball;
};

class SaddleProblem {
 public:
  virtual ~SaddleProblem() = default;

  virtual BlockActive blocks() const = 0;
  virtual double value(const SaddleState& u) const = 0;
  virtual BlockDerivatives derivatives(const SaddleState& u) const = 0;
  virtual BlockLipschitz lipschitz() const = 0;
  virtual const Kernel& kernel() const = 0;
  virtual const std::vector<Vector>& grid() const = 0;
  virtual FeasibleSets feasible() const = 0;

  virtual bool has_noise() const { return false; }
  /// Per-block variances (sigma_theta^2, sigma_f^2, sigma_mu^2, sigma_h^2)
  /// of a single stochastic draw; a batch divides them by its size.
  virtual Eigen::Vector4d noise_variances() const { return Eigen::Vector4d::Zero(); }
  virtual BlockDerivatives stochastic_derivatives(const SaddleState& u, int batch,
                                                  uint64_t seed) const;

  /// Coefficient q of (q/2)||f||^2 in F; the rest of F is linear in f.
  /// Drives the exact f-inner minimization of the duality gap.
  virtual double f_curvature() const { return 0.0; }

  /// Initial point: theta at the box center, f = h = 0, mu uniform.
  SaddleState initial_state() const;

  void check_feasible(const SaddleState& u, double tol = 1e-7) const;
};

/// MMD matching game F(f, mu) = 1/2 ||f||^2 + <f, e_mu - e_nu>.
///
/// Convex-concave with known saddle (f* = 0, mu* = nu) and a closed-form
/// duality gap; the main verification problem for the solver.
class MatchingGame : public SaddleProblem {
 public:
  MatchingGame(Kernel kernel, std::vector<Vector> atoms, DiscreteMeasure nu, double f_radius);

  BlockActive blocks() const override { return {.theta = false, .f = true, .mu = true, .h = false}; }
  double value(const SaddleState& u) const override;
  BlockDerivatives derivatives(const SaddleState& u) const override;
  BlockLipschitz lipschitz() const override;
  const Kernel& kernel() const override { return kernel_; }
  const std::vector<Vector>& grid() const override { return atoms_; }
  FeasibleSets feasible() const override { return {std::nullopt, HilbertBall(kernel_, f_radius_)}; }
  double f_curvature() const override { return 1.0; }

  const DiscreteMeasure& nu() const { return nu_; }
  const RkhsFunction& target_embedding() const { return e_nu_; }

  /// Closed-form gap over (ball(R_f), simplex):
  ///   [1/2||f||^2 + max_i f(z_i) - <f, e_nu>] + 1/2 mmd(mu, nu)^2.
  double closed_form_gap(const SaddleState& u) const;

 private:
  Kernel kernel_;
  std::vector<Vector> atoms_;
  DiscreteMeasure nu_;
  RkhsFunction e_nu_;
  double f_radius_;
};

std::shared_ptr<MatchingGame> make_mmd_matching_game(Kernel kernel, std::vector<Vector> atoms,
                                                     DiscreteMeasure nu, double f_radius = 10.0);

/// Wraps a problem with centered stochastic noise of exactly the declared
/// per-block variances; used by the stochastic-solver tests.
class AdditiveNoiseProblem : public SaddleProblem {
 public:
  AdditiveNoiseProblem(std::shared_ptr<const SaddleProblem> base, double sigma_f, double sigma_mu,
                       double sigma_theta = 0.0, double sigma_h = 0.0);

  BlockActive blocks() const override { return base_->blocks(); }
  double value(const SaddleState& u) const override { return base_->value(u); }
  BlockDerivatives derivatives(const SaddleState& u) const override {
    return base_->derivatives(u);
  }
  BlockLipschitz lipschitz() const override { return base_->lipschitz(); }
  const Kernel& kernel() const override { return base_->kernel(); }
  const std::vector<Vector>& grid() const override { return base_->grid(); }
  FeasibleSets feasible() const override { return base_->feasible(); }
  double f_curvature() const override { return base_->f_curvature(); }

  bool has_noise() const override { return true; }
  Eigen::Vector4d noise_variances() const override;
  BlockDerivatives stochastic_derivatives(const SaddleState& u, int batch,
                                          uint64_t seed) const override;

  const SaddleProblem& base() const { return *base_; }

 private:
  std::shared_ptr<const SaddleProblem> base_;
  double sigma_theta_, sigma_f_, sigma_mu_, sigma_h_;
  double inv_sqrt_trace_;  // 1 / sqrt(tr K_grid)
};

}  // namespace kmp
