#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>

#include "doctest.h"
#include "kmp/measure.hpp"
#include "test_util.hpp"

using namespace kmp;
using testref::vec1;

namespace {
const std::vector<Vector> kAtoms{vec1(0.0), vec1(1.0)};
}

TEST_CASE("measure invariants") {
  Vector w(2);
  w << 0.3, 0.7;
  const DiscreteMeasure mu = DiscreteMeasure::from_weights(kAtoms, w);
  CHECK(std::abs(logsumexp(mu.log_weights())) <= 1e-10);
  CHECK(mu.weights().minCoeff() > 0.0);

  CHECK_THROWS_AS(DiscreteMeasure({}, Vector(0)), ConfigError);
  Vector bad(2);
  bad << 0.5, std::nan("");
  CHECK_THROWS_AS(DiscreteMeasure(kAtoms, bad), NumericalError);

  // log-weights clamped at -700 keep strict positivity
  Vector lw(2);
  lw << 0.0, -1e9;
  const DiscreteMeasure clamped(kAtoms, lw);
  CHECK(clamped.weights().minCoeff() > 0.0);
}

TEST_CASE("tv norm") {
  Vector p(3);
  p << 0.2, 0.5, 0.3;
  CHECK(tv_norm(p) == doctest::Approx(1.0));
  CHECK(tv_norm(Vector::Zero(4)) == 0.0);
  Vector d(2);
  d << 0.3 - 0.5, 0.7 - 0.5;
  CHECK(tv_norm(d) == doctest::Approx(0.4));
  Vector inf_v(1);
  inf_v << std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(tv_norm(inf_v), NumericalError);
}

TEST_CASE("kl divergence") {
  const DiscreteMeasure uni = DiscreteMeasure::uniform(kAtoms);
  CHECK(kl_divergence(uni, uni) == doctest::Approx(0.0));

  Vector w(2);
  w << 2.0 / 3.0, 1.0 / 3.0;
  const DiscreteMeasure mu = DiscreteMeasure::from_weights(kAtoms, w);
  // (2/3) ln(4/3) + (1/3) ln(2/3)
  const double expected = (2.0 / 3.0) * std::log(4.0 / 3.0) + (1.0 / 3.0) * std::log(2.0 / 3.0);
  CHECK(expected == doctest::Approx(0.05663301226513244).epsilon(1e-14));
  CHECK(kl_divergence(mu, uni) == doctest::Approx(expected).epsilon(1e-12));
  CHECK(kl_divergence(mu, uni) >= 0.0);

  const DiscreteMeasure other = DiscreteMeasure::uniform({vec1(0.0), vec1(2.0)});
  CHECK_THROWS_AS(kl_divergence(uni, other), NumericalError);
}

TEST_CASE("entropic mirror step") {
  const DiscreteMeasure uni = DiscreteMeasure::uniform(kAtoms);

  SUBCASE("constant xi leaves the measure unchanged") {
    const DiscreteMeasure out = md_step_measure(uni, DualFunctionValues(Vector::Constant(2, 3.7)), 2.0);
    CHECK((out.weights() - uni.weights()).lpNorm<1>() <= 1e-14);
  }

  SUBCASE("worked multiplicative update") {
    Vector xi(2);
    xi << 0.0, std::log(2.0);
    const DiscreteMeasure out = md_step_measure(uni, DualFunctionValues(xi), 1.0);
    CHECK(out.weights()[0] == doctest::Approx(2.0 / 3.0).epsilon(1e-14));
    CHECK(out.weights()[1] == doctest::Approx(1.0 / 3.0).epsilon(1e-14));
  }

  SUBCASE("eta -> 0 recovers the input") {
    Vector xi(2);
    xi << 1.0, -2.0;
    const DiscreteMeasure out = md_step_measure(uni, DualFunctionValues(xi), 1e-12);
    CHECK(tv_norm(out.weights() - uni.weights()) <= 1e-10);
  }

  SUBCASE("errors") {
    CHECK_THROWS_AS(md_step_measure(uni, DualFunctionValues(Vector::Zero(2)), 0.0), ConfigError);
    Vector bad(2);
    bad << 0.0, std::nan("");
    CHECK_THROWS_AS(md_step_measure(uni, DualFunctionValues(bad), 1.0), NumericalError);
    CHECK_THROWS_AS(md_step_measure(uni, DualFunctionValues(Vector::Zero(3)), 1.0), ConfigError);
  }

  SUBCASE("overflow-safe for extreme xi and eta") {
    Vector xi(2);
    xi << 1e4, -1e4;
    const DiscreteMeasure out = md_step_measure(uni, DualFunctionValues(xi), 1e4);
    CHECK(std::abs(logsumexp(out.log_weights())) <= 1e-10);
    CHECK(out.weights().minCoeff() > 0.0);
  }
}

TEST_CASE("linear functional") {
  const DiscreteMeasure uni = DiscreteMeasure::uniform(kAtoms);
  CHECK(linear_functional(uni, DualFunctionValues(Vector::Ones(2))) == doctest::Approx(1.0));
  CHECK(linear_functional(uni, DualFunctionValues(Vector::Zero(2))) == 0.0);
  Vector w(2), xi(2);
  w << 0.3, 0.7;
  xi << 1.0, -1.0;
  CHECK(linear_functional(DiscreteMeasure::from_weights(kAtoms, w), DualFunctionValues(xi)) ==
        doctest::Approx(-0.4).epsilon(1e-14));
  CHECK_THROWS_AS(linear_functional(uni, DualFunctionValues(Vector::Zero(5))), ConfigError);
}

TEST_CASE("sampling") {
  SUBCASE("point mass") {
    const DiscreteMeasure point = DiscreteMeasure::uniform({vec1(2.5)});
    for (const auto& x : sample(point, 20, 9)) CHECK(x[0] == 2.5);
  }

  SUBCASE("law of large numbers at n = 1e5") {
    const DiscreteMeasure uni = DiscreteMeasure::uniform(kAtoms);
    const auto draws = sample(uni, 100000, 1234);
    double f0 = 0;
    for (const auto& x : draws) f0 += (x[0] == 0.0) ? 1.0 : 0.0;
    f0 /= static_cast<double>(draws.size());
    CHECK(std::abs(f0 - 0.5) <= 0.01);
  }

  SUBCASE("fixed seed reproduces the sequence") {
    const DiscreteMeasure uni = DiscreteMeasure::uniform(kAtoms);
    const auto a = sample(uni, 50, 77);
    const auto b = sample(uni, 50, 77);
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i][0] == b[i][0]);
    const auto c = sample(uni, 50, 78);
    bool any_diff = false;
    for (std::size_t i = 0; i < a.size(); ++i) any_diff = any_diff || (a[i][0] != c[i][0]);
    CHECK(any_diff);
  }
}

// Three-point inequality of the entropic step. The dual-function norm is
// the oscillation seminorm (sup-norm modulo constants, which measure
// differences annihilate) and the TV distance the half-normalized one;
// under the plain sup-norm / Sum|w| pair the printed constants fail by a
// factor of four.
TEST_CASE("measure mirror-step three-point inequality") {
  Rng rng(55);
  const std::vector<Vector> atoms{vec1(-1.0), vec1(0.0), vec1(1.0), vec1(2.0)};
  for (int trial = 0; trial < 500; ++trial) {
    const DiscreteMeasure mu_tilde(atoms, rng.normal_vector(4));
    const DiscreteMeasure mu_hat(atoms, rng.normal_vector(4));
    const Vector xi = 3.0 * rng.normal_vector(4);
    const Vector xi_tilde = 3.0 * rng.normal_vector(4);
    const double eta = std::pow(10.0, rng.uniform(-2.0, 0.5));

    const DiscreteMeasure mu = md_step_measure(mu_tilde, DualFunctionValues(xi), eta);
    const DiscreteMeasure mu_plus = md_step_measure(mu_tilde, DualFunctionValues(xi_tilde), eta);

    const double lhs = eta * (mu.weights() - mu_hat.weights()).dot(xi_tilde);
    const Vector dxi = xi_tilde - xi;
    const double osc = dxi.maxCoeff() - dxi.minCoeff();
    const double tv_half = 0.5 * tv_norm(mu.weights() - mu_tilde.weights());
    const double rhs = kl_divergence(mu_hat, mu_tilde) - kl_divergence(mu_hat, mu_plus) +
                       eta * eta / 8.0 * osc * osc - 2.0 * tv_half * tv_half;
    CHECK(rhs - lhs >= -1e-9);
  }
}

TEST_CASE("pinsker consistency") {
  Rng rng(66);
  const std::vector<Vector> atoms{vec1(0.0), vec1(1.0), vec1(2.0)};
  for (int trial = 0; trial < 100; ++trial) {
    const DiscreteMeasure mu(atoms, rng.normal_vector(3));
    const DiscreteMeasure nu(atoms, rng.normal_vector(3));
    const double tv = tv_norm(mu.weights() - nu.weights());
    CHECK(tv * tv <= 2.0 * kl_divergence(mu, nu) + 1e-12);
  }
}

TEST_CASE("step composition in log weights") {
  Rng rng(78);
  const std::vector<Vector> atoms{vec1(0.0), vec1(1.0), vec1(2.0)};
  for (int trial = 0; trial < 50; ++trial) {
    const DiscreteMeasure mu0(atoms, rng.normal_vector(3));
    const Vector xi1 = rng.normal_vector(3);
    const Vector xi2 = rng.normal_vector(3);
    const double eta = 0.3;
    const DiscreteMeasure two =
        md_step_measure(md_step_measure(mu0, DualFunctionValues(xi1), eta),
                        DualFunctionValues(xi2), eta);
    const DiscreteMeasure one = md_step_measure(mu0, DualFunctionValues(xi1 + xi2), eta);
    CHECK((two.log_weights() - one.log_weights()).lpNorm<Eigen::Infinity>() <= 1e-12);
  }
}
