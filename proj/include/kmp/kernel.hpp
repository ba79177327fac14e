#pragma once

#include <cmath>
#include <vector>

#include "kmp/common.hpp"

namespace kmp {

enum class KernelKind { Gaussian, Laplacian };

/// Translation-invariant positive-definite kernel on R^d.
///
/// Both supported kinds satisfy k(x,x) = 1, so C = sup_x k(x,x) = 1.
class Kernel {
 public:
  Kernel(KernelKind kind, double bandwidth) : kind_(kind), bandwidth_(bandwidth) {
    if (!(bandwidth > 0.0)) throw ConfigError("kernel bandwidth must be positive");
  }

  double operator()(const Vector& x, const Vector& y) const {
    if (x.size() != y.size()) throw NumericalError("kernel: point dimension mismatch");
    switch (kind_) {
      case KernelKind::Gaussian: {
        const double d2 = (x - y).squaredNorm();
        return std::exp(-d2 / (2.0 * bandwidth_ * bandwidth_));
      }
      case KernelKind::Laplacian: {
        const double d1 = (x - y).lpNorm<1>();
        return std::exp(-d1 / bandwidth_);
      }
    }
    return 0.0;  // unreachable
  }

  /// C = sup_x k(x,x); equals 1 for the supported kinds.
  double sup_diag() const { return 1.0; }

  KernelKind kind() const { return kind_; }
  double bandwidth() const { return bandwidth_; }

  bool operator==(const Kernel& o) const {
    return kind_ == o.kind_ && bandwidth_ == o.bandwidth_;
  }
  bool operator!=(const Kernel& o) const { return !(*this == o); }

  Matrix gram(const std::vector<Vector>& pts) const {
    const Eigen::Index n = static_cast<Eigen::Index>(pts.size());
    Matrix k(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
      k(i, i) = (*this)(pts[i], pts[i]);
      for (Eigen::Index j = i + 1; j < n; ++j) {
        const double v = (*this)(pts[i], pts[j]);
        k(i, j) = v;
        k(j, i) = v;
      }
    }
    return k;
  }

  Matrix cross_gram(const std::vector<Vector>& a, const std::vector<Vector>& b) const {
    Matrix k(static_cast<Eigen::Index>(a.size()), static_cast<Eigen::Index>(b.size()));
    for (Eigen::Index i = 0; i < k.rows(); ++i)
      for (Eigen::Index j = 0; j < k.cols(); ++j)
        k(i, j) = (*this)(a[static_cast<std::size_t>(i)], b[static_cast<std::size_t>(j)]);
    return k;
  }

 private:
  KernelKind kind_;
  double bandwidth_;
};

}  // namespace kmp
