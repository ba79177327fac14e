#pragma once

#include <Eigen/Core>
#include <stdexcept>
#include <string>

namespace kmp {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Invalid configuration or ill-formed inputs (CLI exit code 2).
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

/// Numerical breakdown during a run (CLI exit code 3).
class NumericalError : public std::runtime_error {
 public:
  explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

/// Axis-aligned box in R^d.
struct Box {
  Vector lo;
  Vector hi;

  Box() = default;
  Box(Vector lo_in, Vector hi_in) : lo(std::move(lo_in)), hi(std::move(hi_in)) {
    if (lo.size() != hi.size()) throw ConfigError("box bounds dimension mismatch");
    for (Eigen::Index i = 0; i < lo.size(); ++i) {
      if (!(lo[i] <= hi[i])) throw ConfigError("box has lo > hi");
    }
  }

  Eigen::Index dim() const { return lo.size(); }

  Vector center() const { return 0.5 * (lo + hi); }

  Vector project(const Vector& x) const {
    return x.cwiseMax(lo).cwiseMin(hi);
  }

  bool contains(const Vector& x, double tol = 1e-9) const {
    if (x.size() != lo.size()) return false;
    return ((x.array() >= lo.array() - tol) && (x.array() <= hi.array() + tol)).all();
  }

  /// max over the box of ||x - c||^2 (attained at a corner).
  double max_dist_sq(const Vector& c) const {
    double s = 0.0;
    for (Eigen::Index i = 0; i < lo.size(); ++i) {
      const double a = lo[i] - c[i], b = hi[i] - c[i];
      s += std::max(a * a, b * b);
    }
    return s;
  }
};

}  // namespace kmp
