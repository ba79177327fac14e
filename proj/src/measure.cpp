#include "kmp/measure.hpp"

#include <algorithm>
#include <cmath>

#include "kmp/rng.hpp"

namespace kmp {

double logsumexp(const Vector& v) {
  const double m = v.maxCoeff();
  if (!std::isfinite(m)) return m;
  return m + std::log((v.array() - m).exp().sum());
}

DiscreteMeasure::DiscreteMeasure(std::vector<Vector> atoms, Vector log_weights)
    : atoms_(std::move(atoms)), log_w_(std::move(log_weights)) {
  if (atoms_.empty()) throw ConfigError("measure needs at least one atom");
  if (static_cast<Eigen::Index>(atoms_.size()) != log_w_.size())
    throw ConfigError("measure: atom/weight count mismatch");
  const Eigen::Index d = atoms_.front().size();
  for (const auto& a : atoms_)
    if (a.size() != d) throw ConfigError("measure: atoms of mixed dimension");
  for (Eigen::Index i = 0; i < log_w_.size(); ++i) {
    if (std::isnan(log_w_[i])) throw NumericalError("measure: NaN log-weight");
    log_w_[i] = std::max(log_w_[i], -700.0);  // keeps weights strictly positive
  }
  log_w_.array() -= logsumexp(log_w_);
}

DiscreteMeasure DiscreteMeasure::uniform(std::vector<Vector> atoms) {
  const Eigen::Index m = static_cast<Eigen::Index>(atoms.size());
  return DiscreteMeasure(std::move(atoms), Vector::Zero(m));
}

DiscreteMeasure DiscreteMeasure::from_weights(std::vector<Vector> atoms, const Vector& weights) {
  for (Eigen::Index i = 0; i < weights.size(); ++i)
    if (!(weights[i] >= 0.0)) throw ConfigError("measure: negative weight");
  return DiscreteMeasure(std::move(atoms), weights.array().max(1e-300).log());
}

bool DiscreteMeasure::same_atoms(const DiscreteMeasure& o, double tol) const {
  if (atoms_.size() != o.atoms_.size()) return false;
  for (std::size_t i = 0; i < atoms_.size(); ++i) {
    if (atoms_[i].size() != o.atoms_[i].size()) return false;
    if ((atoms_[i] - o.atoms_[i]).lpNorm<Eigen::Infinity>() > tol) return false;
  }
  return true;
}

double tv_norm(const Vector& w) {
  for (Eigen::Index i = 0; i < w.size(); ++i)
    if (!std::isfinite(w[i])) throw NumericalError("tv_norm: non-finite entry");
  return w.lpNorm<1>();
}

double kl_divergence(const DiscreteMeasure& mu, const DiscreteMeasure& nu) {
  if (!mu.same_atoms(nu)) throw NumericalError("kl_divergence: atom mismatch");
  const Vector w = mu.weights();
  double s = 0.0;
  for (Eigen::Index i = 0; i < w.size(); ++i)
    s += w[i] * (mu.log_weights()[i] - nu.log_weights()[i]);
  return std::max(s, 0.0);
}

DiscreteMeasure md_step_measure(const DiscreteMeasure& mu0, const DualFunctionValues& xi,
                                double eta) {
  if (!(eta > 0.0)) throw ConfigError("md_step_measure: step size must be positive");
  if (xi.size() != mu0.size()) throw ConfigError("md_step_measure: xi length mismatch");
  for (Eigen::Index i = 0; i < xi.size(); ++i)
    if (std::isnan(xi.values[i])) throw NumericalError("md_step_measure: NaN in xi");
  return DiscreteMeasure(mu0.atoms(), mu0.log_weights() - eta * xi.values);
}

double linear_functional(const DiscreteMeasure& mu, const DualFunctionValues& xi) {
  if (xi.size() != mu.size()) throw ConfigError("linear_functional: length mismatch");
  return mu.weights().dot(xi.values);
}

std::vector<Vector> sample(const DiscreteMeasure& mu, int n, uint64_t seed) {
  if (n < 1) throw ConfigError("sample: n must be >= 1");
  Rng rng(derive_seed(seed, 0x73616d706cULL));
  const Vector w = mu.weights();
  std::vector<Vector> out;
  out.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) out.push_back(mu.atoms()[static_cast<std::size_t>(rng.categorical(w))]);
  return out;
}

}  // namespace kmp
