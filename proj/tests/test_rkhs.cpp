#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <Eigen/Eigenvalues>

#include "doctest.h"
#include "kmp/rkhs.hpp"
#include "test_util.hpp"

using namespace kmp;
using testref::vec1;
using testref::vec2;

namespace {
const Kernel kGauss(KernelKind::Gaussian, 1.0);

RkhsFunction single_atom(double z, double alpha, const Kernel& k = kGauss) {
  return RkhsFunction(k, {vec1(z)}, Vector::Constant(1, alpha));
}
}  // namespace

TEST_CASE("kernel basics") {
  CHECK(kGauss(vec1(0.3), vec1(0.3)) == doctest::Approx(1.0));
  CHECK(kGauss(vec1(0.0), vec1(1.0)) == doctest::Approx(kGauss(vec1(1.0), vec1(0.0))));
  CHECK(kGauss.sup_diag() == 1.0);

  const Kernel lap(KernelKind::Laplacian, 2.0);
  CHECK(lap(vec1(0.0), vec1(1.0)) == doctest::Approx(std::exp(-0.5)));
  CHECK(lap(vec2(1.0, 1.0), vec2(1.0, 1.0)) == doctest::Approx(1.0));

  CHECK_THROWS_AS(Kernel(KernelKind::Gaussian, 0.0), ConfigError);
  CHECK_THROWS_AS(kGauss(vec1(0.0), vec2(0.0, 1.0)), NumericalError);
}

TEST_CASE("gram matrices are psd") {
  Rng rng(101);
  for (int trial = 0; trial < 5; ++trial) {
    const int n = 8 + static_cast<int>(rng.next_u64() % 57);  // up to 64 points
    std::vector<Vector> pts;
    for (int i = 0; i < n; ++i) pts.push_back(rng.normal_vector(2));
    const Matrix k = kGauss.gram(pts);
    CHECK((k - k.transpose()).lpNorm<Eigen::Infinity>() == 0.0);
    Eigen::SelfAdjointEigenSolver<Matrix> eig(k);
    CHECK(eig.eigenvalues().minCoeff() >= -1e-10);
  }
}

TEST_CASE("eval") {
  const RkhsFunction zero2(kGauss, {vec1(0.0), vec1(1.0)}, Vector::Zero(2));
  CHECK(zero2.eval(vec1(0.7)) == 0.0);

  const RkhsFunction f = single_atom(0.0, 1.0);
  CHECK(f.eval(vec1(0.0)) == doctest::Approx(1.0));

  // direct evaluation of e^{-||x-z||^2/(2 sigma^2)}
  const double expected = std::exp(-0.5);
  CHECK(expected == doctest::Approx(0.6065306597126334).epsilon(1e-15));
  CHECK(f.eval(vec1(1.0)) == doctest::Approx(expected).epsilon(1e-14));

  CHECK_THROWS(f.eval(vec2(0.0, 0.0)));
}

TEST_CASE("inner products") {
  const RkhsFunction f = single_atom(0.0, 2.0);
  CHECK(inner(f, RkhsFunction::zero(kGauss)) == 0.0);
  CHECK(inner(f, f) == doctest::Approx(4.0));
  CHECK(inner(f, f) == doctest::Approx(f.norm_sq()));

  const RkhsFunction g = single_atom(1.0, 1.0);
  const RkhsFunction f1 = single_atom(0.0, 1.0);
  CHECK(inner(f1, g) == doctest::Approx(std::exp(-0.5)).epsilon(1e-14));
  CHECK(inner(f1, g) == doctest::Approx(inner(g, f1)));

  const Kernel other(KernelKind::Gaussian, 2.0);
  CHECK_THROWS_AS(inner(f, single_atom(0.0, 1.0, other)), NumericalError);
}

TEST_CASE("reproducing consistency: inner(f, k(x,.)) = f(x)") {
  Rng rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<Vector> dict;
    const int n = 1 + static_cast<int>(rng.next_u64() % 6);
    for (int i = 0; i < n; ++i) dict.push_back(rng.normal_vector(1));
    const RkhsFunction f(kGauss, dict, rng.normal_vector(n));
    const Vector x = rng.normal_vector(1);
    const RkhsFunction section(kGauss, {x}, Vector::Ones(1));
    const double lhs = inner(f, section);
    const double rhs = f.eval(x);
    CHECK(std::abs(lhs - rhs) <= 1e-12 * std::max(1.0, std::abs(rhs)));
  }
}

TEST_CASE("pointwise bound |f(x)| <= sqrt(C) ||f||") {
  Rng rng(13);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<Vector> dict;
    for (int i = 0; i < 4; ++i) dict.push_back(rng.normal_vector(2));
    const RkhsFunction f(kGauss, dict, rng.normal_vector(4));
    for (int probe = 0; probe < 5; ++probe) {
      const Vector x = rng.normal_vector(2);
      CHECK(std::abs(f.eval(x)) <= std::sqrt(kGauss.sup_diag()) * f.norm() + 1e-12);
    }
  }
}

TEST_CASE("mean embedding") {
  const std::vector<Vector> atoms{vec1(0.0), vec1(1.0)};

  const DiscreteMeasure point = DiscreteMeasure::uniform({vec1(0.5)});
  const RkhsFunction e_point = mean_embedding(point, kGauss);
  CHECK(e_point.dictionary().size() == 1);
  CHECK(e_point.coefficients()[0] == doctest::Approx(1.0));

  const DiscreteMeasure uni = DiscreteMeasure::uniform(atoms);
  const RkhsFunction e_uni = mean_embedding(uni, kGauss);
  CHECK(e_uni.coefficients()[0] == doctest::Approx(0.5));
  CHECK(e_uni.coefficients()[1] == doctest::Approx(0.5));

  // w^T K w with K = [[1, e^{-1/2}], [e^{-1/2}, 1]]
  const double expected = 0.25 * (2.0 + 2.0 * std::exp(-0.5));
  CHECK(expected == doctest::Approx(0.8032653298563167).epsilon(1e-15));
  CHECK(e_uni.norm_sq() == doctest::Approx(expected).epsilon(1e-14));
}

TEST_CASE("mmd closed forms") {
  const std::vector<Vector> atoms{vec1(0.0), vec1(1.0)};
  const DiscreteMeasure uni = DiscreteMeasure::uniform(atoms);
  CHECK(mmd(uni, uni, kGauss) == doctest::Approx(0.0));

  const DiscreteMeasure dx = DiscreteMeasure::uniform({vec1(0.0)});
  const DiscreteMeasure dy = DiscreteMeasure::uniform({vec1(1.0)});
  const double m2 = 2.0 - 2.0 * std::exp(-0.5);  // k(x,x)+k(y,y)-2k(x,y)
  CHECK(m2 == doctest::Approx(0.7869386805747332).epsilon(1e-15));
  CHECK(mmd(dx, dy, kGauss) * mmd(dx, dy, kGauss) == doctest::Approx(m2).epsilon(1e-13));

  Vector w(2), v(2);
  w << 0.3, 0.7;
  v << 0.5, 0.5;
  const DiscreteMeasure mu = DiscreteMeasure::from_weights(atoms, w);
  const DiscreteMeasure nu = DiscreteMeasure::from_weights(atoms, v);
  const double m2b = 0.08 * (1.0 - std::exp(-0.5));  // (w-v)^T K (w-v)
  CHECK(m2b == doctest::Approx(0.031477547222989335).epsilon(1e-14));
  CHECK(mmd(mu, nu, kGauss) * mmd(mu, nu, kGauss) == doctest::Approx(m2b).epsilon(1e-12));
}

TEST_CASE("mmd symmetry and triangle inequality") {
  Rng rng(23);
  const std::vector<Vector> atoms{vec1(-1.0), vec1(0.0), vec1(0.7), vec1(2.0)};
  for (int trial = 0; trial < 30; ++trial) {
    auto rand_measure = [&] {
      return DiscreteMeasure(atoms, rng.normal_vector(4));
    };
    const DiscreteMeasure a = rand_measure(), b = rand_measure(), c = rand_measure();
    CHECK(mmd(a, b, kGauss) == doctest::Approx(mmd(b, a, kGauss)).epsilon(1e-14));
    CHECK(mmd(a, c, kGauss) <= mmd(a, b, kGauss) + mmd(b, c, kGauss) + 1e-10);
  }
}

TEST_CASE("hilbert ball projection and mirror step") {
  const HilbertBall unit(kGauss, 1.0);

  SUBCASE("zero direction returns f0") {
    const RkhsFunction f0 = single_atom(0.3, 0.4);
    const RkhsFunction out = md_step_hilbert(f0, RkhsFunction::zero(kGauss), 0.5, unit);
    CHECK(dist(out, f0) == doctest::Approx(0.0));
  }

  SUBCASE("radial projection scales coefficients") {
    const RkhsFunction xi = single_atom(0.0, 8.0);  // ||0 - 0.5*xi|| = 4
    const RkhsFunction out = md_step_hilbert(RkhsFunction::zero(kGauss), xi, 0.5, unit);
    CHECK(out.norm() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(out.coefficients()[0] == doctest::Approx(-4.0 / 4.0).epsilon(1e-12));
  }

  SUBCASE("unbounded ball is the identity projection") {
    const HilbertBall free(kGauss, HilbertBall::unbounded());
    const RkhsFunction f0 = single_atom(0.0, 1.0);
    const RkhsFunction xi = single_atom(1.0, 2.0);
    const RkhsFunction out = md_step_hilbert(f0, xi, 0.25, free);
    CHECK(out.dictionary().size() == 2);
    CHECK(dist(out, combine(1.0, f0, -0.25, xi)) == doctest::Approx(0.0));
  }

  SUBCASE("nonpositive step size rejected") {
    CHECK_THROWS_AS(md_step_hilbert(single_atom(0, 1), single_atom(0, 1), 0.0, unit),
                    ConfigError);
  }
}

TEST_CASE("projection is firmly nonexpansive (distance contraction)") {
  Rng rng(37);
  const HilbertBall ball(kGauss, 0.8);
  const std::vector<Vector> dict{vec1(-0.5), vec1(0.5), vec1(1.5)};
  for (int trial = 0; trial < 40; ++trial) {
    const RkhsFunction a(kGauss, dict, rng.normal_vector(3));
    const RkhsFunction b(kGauss, dict, rng.normal_vector(3));
    CHECK(dist(ball.project(a), ball.project(b)) <= dist(a, b) + 1e-12);
  }
}

TEST_CASE("hilbert mirror-step three-point inequality") {
  Rng rng(41);
  const std::vector<Vector> dict{vec1(-1.0), vec1(0.0), vec1(1.0)};
  for (int trial = 0; trial < 200; ++trial) {
    const double radius = 0.2 + 2.0 * rng.uniform();
    const HilbertBall ball(kGauss, radius);
    auto in_ball = [&] {
      RkhsFunction raw(kGauss, dict, rng.normal_vector(3));
      const double target = radius * rng.uniform();
      return raw.norm() > 0 ? raw.scaled(target / raw.norm()) : raw;
    };
    const RkhsFunction h_tilde = in_ball();
    const RkhsFunction h_hat = in_ball();
    const RkhsFunction xi(kGauss, dict, rng.normal_vector(3));
    const RkhsFunction xi_tilde(kGauss, dict, rng.normal_vector(3));
    const double eta = std::pow(10.0, rng.uniform(-2.0, 0.5));

    const RkhsFunction h = md_step_hilbert(h_tilde, xi, eta, ball);
    const RkhsFunction h_plus = md_step_hilbert(h_tilde, xi_tilde, eta, ball);

    const double lhs = eta * inner(combine(1.0, h, -1.0, h_hat), xi_tilde);
    const double rhs = 0.5 * combine(1.0, h_hat, -1.0, h_tilde).norm_sq() -
                       0.5 * combine(1.0, h_hat, -1.0, h_plus).norm_sq() +
                       0.5 * eta * eta * combine(1.0, xi_tilde, -1.0, xi).norm_sq() -
                       0.5 * combine(1.0, h, -1.0, h_tilde).norm_sq();
    CHECK(rhs - lhs >= -1e-10);
  }
}

TEST_CASE("dictionary compress") {
  SUBCASE("duplicate atoms with cancelling coefficients give the zero function") {
    Vector c(2);
    c << 1.0, -1.0;
    const RkhsFunction f(kGauss, {vec1(0.5), vec1(0.5)}, c);
    const RkhsFunction g = dictionary_compress(f, 0.0);
    CHECK(g.dictionary().size() == 1);
    CHECK(g.norm() == doctest::Approx(0.0));
    CHECK(g.eval(vec1(0.3)) == doctest::Approx(0.0));
  }

  SUBCASE("tol = 0 with no duplicates is the identity") {
    Vector c(2);
    c << 0.7, 0.0;
    const RkhsFunction f(kGauss, {vec1(0.0), vec1(2.0)}, c);
    const RkhsFunction g = dictionary_compress(f, 0.0);
    CHECK(g.dictionary().size() == 2);
    CHECK(g.coefficients()[0] == 0.7);
    CHECK(g.coefficients()[1] == 0.0);
  }

  SUBCASE("tiny isolated coefficient dropped under a norm budget") {
    Vector c(2);
    c << 1.0, 1e-16;
    const RkhsFunction f(kGauss, {vec1(0.0), vec1(5.0)}, c);
    const RkhsFunction g = dictionary_compress(f, 1e-8);
    CHECK(g.dictionary().size() == 1);
    CHECK(dist(f, g) <= 1e-8);
  }

  SUBCASE("output evaluates identically within tol * sqrt(C)") {
    Rng rng(5);
    const std::vector<Vector> dict{vec1(0.0), vec1(0.0), vec1(1.0), vec1(2.0)};
    const RkhsFunction f(kGauss, dict, rng.normal_vector(4));
    const double tol = 1e-6;
    const RkhsFunction g = dictionary_compress(f, tol);
    for (int probe = 0; probe < 10; ++probe) {
      const Vector x = rng.normal_vector(1);
      CHECK(std::abs(f.eval(x) - g.eval(x)) <= tol * std::sqrt(kGauss.sup_diag()) + 1e-12);
    }
  }
}
