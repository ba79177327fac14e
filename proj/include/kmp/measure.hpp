#pragma once

#include <cstdint>
#include <vector>

#include "kmp/common.hpp"

namespace kmp {

/// A bounded dual function xi represented by its values at a measure's atoms.
struct DualFunctionValues {
  Vector values;

  DualFunctionValues() = default;
  explicit DualFunctionValues(Vector v) : values(std::move(v)) {}
  Eigen::Index size() const { return values.size(); }
};

double logsumexp(const Vector& v);

/// Discrete probability measure stored as atoms + log-weights.
///
/// Weights are strictly positive and sum to one: log-weights are clamped at
/// -700 before normalization and logsumexp-normalized on construction, so
/// the multiplicative mirror update never under- or overflows.
class DiscreteMeasure {
 public:
  DiscreteMeasure(std::vector<Vector> atoms, Vector log_weights);

  static DiscreteMeasure uniform(std::vector<Vector> atoms);
  static DiscreteMeasure from_weights(std::vector<Vector> atoms, const Vector& weights);

  const std::vector<Vector>& atoms() const { return atoms_; }
  const Vector& log_weights() const { return log_w_; }
  Vector weights() const { return log_w_.array().exp(); }
  Eigen::Index size() const { return log_w_.size(); }

  bool same_atoms(const DiscreteMeasure& o, double tol = 1e-12) const;

 private:
  std::vector<Vector> atoms_;
  Vector log_w_;
};

/// Sum_i |w_i|: discrete total-variation norm of a signed weight vector.
double tv_norm(const Vector& w);

/// Relative entropy Sum_i w_i^mu (l_i^mu - l_i^nu); requires identical atoms.
double kl_divergence(const DiscreteMeasure& mu, const DiscreteMeasure& nu);

/// Entropic mirror step: log-weights l0 - eta*xi, renormalized. Atoms unchanged.
DiscreteMeasure md_step_measure(const DiscreteMeasure& mu0, const DualFunctionValues& xi,
                                double eta);

/// <xi, mu> = Sum_i w_i xi_i.
double linear_functional(const DiscreteMeasure& mu, const DualFunctionValues& xi);

/// n i.i.d. categorical draws; deterministic given seed.
std::vector<Vector> sample(const DiscreteMeasure& mu, int n, uint64_t seed);

}  // namespace kmp
