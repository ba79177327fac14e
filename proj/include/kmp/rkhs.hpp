#pragma once

#include <limits>
#include <vector>

#include "kmp/kernel.hpp"
#include "kmp/measure.hpp"

namespace kmp {

/// Finite kernel expansion f = Sum_j alpha_j k(z_j, .).
///
/// Immutable; the dictionary Gram matrix and the squared RKHS norm are
/// computed once at construction. All arithmetic returns new objects.
class RkhsFunction {
 public:
  RkhsFunction(Kernel kernel, std::vector<Vector> dictionary, Vector coefficients);

  static RkhsFunction zero(Kernel kernel) { return RkhsFunction(kernel, {}, Vector(0)); }

  double eval(const Vector& x) const;

  /// Values at a list of points (convenience for measure pairings).
  Vector eval_at(const std::vector<Vector>& pts) const;

  double norm_sq() const { return norm_sq_; }
  double norm() const;

  const Kernel& kernel() const { return kernel_; }
  const std::vector<Vector>& dictionary() const { return dict_; }
  const Vector& coefficients() const { return coeffs_; }
  const Matrix& gram() const { return gram_; }
  bool is_zero() const { return dict_.empty(); }

  RkhsFunction scaled(double s) const;

 private:
  Kernel kernel_;
  std::vector<Vector> dict_;
  Vector coeffs_;
  Matrix gram_;
  double norm_sq_ = 0.0;
};

/// a*f + b*g; duplicate atoms (distance < 1e-12) are merged.
RkhsFunction combine(double a, const RkhsFunction& f, double b, const RkhsFunction& g);

/// <f, g>_H = alpha^T K_fg beta; kernels must match.
double inner(const RkhsFunction& f, const RkhsFunction& g);

double dist(const RkhsFunction& f, const RkhsFunction& g);

/// Merge duplicate atoms; with tol > 0 also drop atoms whose total removal
/// effect on the RKHS norm is below tol.
RkhsFunction dictionary_compress(const RkhsFunction& f, double tol);

/// Kernel mean embedding e_mu = Sum_i w_i k(z_i, .).
RkhsFunction mean_embedding(const DiscreteMeasure& mu, const Kernel& kernel);

/// ||e_mu - e_nu||_H, clamped at zero against round-off.
double mmd(const DiscreteMeasure& mu, const DiscreteMeasure& nu, const Kernel& kernel);

/// Closed RKHS-norm ball; radius may be infinity (no projection).
struct HilbertBall {
  RkhsFunction center;
  double radius;

  HilbertBall(RkhsFunction c, double r) : center(std::move(c)), radius(r) {
    if (!(r > 0.0)) throw ConfigError("ball radius must be positive");
  }
  HilbertBall(Kernel kernel, double r) : HilbertBall(RkhsFunction::zero(kernel), r) {}

  static double unbounded() { return std::numeric_limits<double>::infinity(); }
  bool is_unbounded() const { return std::isinf(radius); }

  bool contains(const RkhsFunction& f, double tol = 1e-12) const;

  /// Metric projection: radial scaling toward the center (exact in Hilbert space).
  RkhsFunction project(const RkhsFunction& f) const;
};

/// Mirror step for a Hilbert block: projection of f0 - eta*xi onto H.
RkhsFunction md_step_hilbert(const RkhsFunction& f0, const RkhsFunction& xi, double eta,
                             const HilbertBall& ball);

}  // namespace kmp
