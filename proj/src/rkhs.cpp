#include "kmp/rkhs.hpp"

#include <algorithm>
#include <cmath>

namespace kmp {

namespace {
constexpr double kDuplicateAtomTol = 1e-12;
constexpr double kNormSqRoundoff = 1e-10;

double clamp_norm_sq(double v) {
  if (v >= 0.0) return v;
  if (v >= -kNormSqRoundoff) return 0.0;
  throw NumericalError("rkhs: squared norm below -1e-10; Gram matrix not PSD");
}
}  // namespace

RkhsFunction::RkhsFunction(Kernel kernel, std::vector<Vector> dictionary, Vector coefficients)
    : kernel_(kernel), dict_(std::move(dictionary)), coeffs_(std::move(coefficients)) {
  if (static_cast<Eigen::Index>(dict_.size()) != coeffs_.size())
    throw ConfigError("rkhs: dictionary/coefficient length mismatch");
  if (!dict_.empty()) {
    const Eigen::Index d = dict_.front().size();
    for (const auto& z : dict_)
      if (z.size() != d) throw ConfigError("rkhs: dictionary points of mixed dimension");
  }
  gram_ = kernel_.gram(dict_);
  norm_sq_ = dict_.empty() ? 0.0 : clamp_norm_sq(coeffs_.dot(gram_ * coeffs_));
}

double RkhsFunction::eval(const Vector& x) const {
  double s = 0.0;
  for (std::size_t j = 0; j < dict_.size(); ++j)
    s += coeffs_[static_cast<Eigen::Index>(j)] * kernel_(dict_[j], x);
  return s;
}

Vector RkhsFunction::eval_at(const std::vector<Vector>& pts) const {
  Vector v(static_cast<Eigen::Index>(pts.size()));
  for (std::size_t i = 0; i < pts.size(); ++i) v[static_cast<Eigen::Index>(i)] = eval(pts[i]);
  return v;
}

double RkhsFunction::norm() const { return std::sqrt(norm_sq_); }

RkhsFunction RkhsFunction::scaled(double s) const {
  return RkhsFunction(kernel_, dict_, s * coeffs_);
}

RkhsFunction combine(double a, const RkhsFunction& f, double b, const RkhsFunction& g) {
  if (f.kernel() != g.kernel()) throw NumericalError("combine: kernel mismatch");
  std::vector<Vector> dict;
  std::vector<double> coeffs;
  dict.reserve(f.dictionary().size() + g.dictionary().size());
  auto add = [&](const Vector& z, double c) {
    for (std::size_t j = 0; j < dict.size(); ++j) {
      if (dict[j].size() == z.size() &&
          (dict[j] - z).lpNorm<Eigen::Infinity>() < kDuplicateAtomTol) {
        coeffs[j] += c;
        return;
      }
    }
    dict.push_back(z);
    coeffs.push_back(c);
  };
  for (std::size_t j = 0; j < f.dictionary().size(); ++j)
    add(f.dictionary()[j], a * f.coefficients()[static_cast<Eigen::Index>(j)]);
  for (std::size_t j = 0; j < g.dictionary().size(); ++j)
    add(g.dictionary()[j], b * g.coefficients()[static_cast<Eigen::Index>(j)]);
  Vector c(static_cast<Eigen::Index>(coeffs.size()));
  for (std::size_t j = 0; j < coeffs.size(); ++j) c[static_cast<Eigen::Index>(j)] = coeffs[j];
  return RkhsFunction(f.kernel(), std::move(dict), std::move(c));
}

double inner(const RkhsFunction& f, const RkhsFunction& g) {
  if (f.kernel() != g.kernel()) throw NumericalError("inner: kernel mismatch");
  if (f.is_zero() || g.is_zero()) return 0.0;
  const Matrix kfg = f.kernel().cross_gram(f.dictionary(), g.dictionary());
  return f.coefficients().dot(kfg * g.coefficients());
}

double dist(const RkhsFunction& f, const RkhsFunction& g) {
  return combine(1.0, f, -1.0, g).norm();
}

RkhsFunction dictionary_compress(const RkhsFunction& f, double tol) {
  if (tol < 0.0) throw ConfigError("dictionary_compress: negative tolerance");
  RkhsFunction merged = combine(1.0, f, 0.0, RkhsFunction::zero(f.kernel()));
  if (tol == 0.0 || merged.is_zero()) return merged;

  // Greedy drop by removal-effect bound |alpha_j| sqrt(K_jj); the triangle
  // inequality keeps the accumulated norm change below tol.
  const Eigen::Index n = merged.coefficients().size();
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  for (Eigen::Index j = 0; j < n; ++j) order[static_cast<std::size_t>(j)] = j;
  auto effect = [&](Eigen::Index j) {
    return std::abs(merged.coefficients()[j]) * std::sqrt(merged.gram()(j, j));
  };
  std::sort(order.begin(), order.end(),
            [&](Eigen::Index a, Eigen::Index b) { return effect(a) < effect(b); });
  std::vector<bool> keep(static_cast<std::size_t>(n), true);
  double budget = tol;
  for (Eigen::Index j : order) {
    const double e = effect(j);
    if (e <= budget) {
      keep[static_cast<std::size_t>(j)] = false;
      budget -= e;
    } else {
      break;
    }
  }
  std::vector<Vector> dict;
  std::vector<double> coeffs;
  for (Eigen::Index j = 0; j < n; ++j) {
    if (keep[static_cast<std::size_t>(j)]) {
      dict.push_back(merged.dictionary()[static_cast<std::size_t>(j)]);
      coeffs.push_back(merged.coefficients()[j]);
    }
  }
  Vector c(static_cast<Eigen::Index>(coeffs.size()));
  for (std::size_t j = 0; j < coeffs.size(); ++j) c[static_cast<Eigen::Index>(j)] = coeffs[j];
  return RkhsFunction(f.kernel(), std::move(dict), std::move(c));
}

RkhsFunction mean_embedding(const DiscreteMeasure& mu, const Kernel& kernel) {
  return RkhsFunction(kernel, mu.atoms(), mu.weights());
}

double mmd(const DiscreteMeasure& mu, const DiscreteMeasure& nu, const Kernel& kernel) {
  const RkhsFunction diff =
      combine(1.0, mean_embedding(mu, kernel), -1.0, mean_embedding(nu, kernel));
  return diff.norm();
}

bool HilbertBall::contains(const RkhsFunction& f, double tol) const {
  if (is_unbounded()) return true;
  return dist(f, center) <= radius + tol;
}

RkhsFunction HilbertBall::project(const RkhsFunction& f) const {
  if (is_unbounded()) return f;
  const RkhsFunction offset = combine(1.0, f, -1.0, center);
  const double d = offset.norm();
  if (d <= radius) return f;
  return combine(1.0, center, radius / d, offset);
}

RkhsFunction md_step_hilbert(const RkhsFunction& f0, const RkhsFunction& xi, double eta,
                             const HilbertBall& ball) {
  if (!(eta > 0.0)) throw ConfigError("md_step_hilbert: step size must be positive");
  return ball.project(combine(1.0, f0, -eta, xi));
}

}  // namespace kmp
