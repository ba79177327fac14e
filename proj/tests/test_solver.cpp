#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>

#include "doctest.h"
#include "kmp/config.hpp"
#include "test_util.hpp"

using namespace kmp;
using testref::vec1;

namespace {

/// F identically zero on (f, mu): the solver must sit still.
class ZeroProblem : public SaddleProblem {
 public:
  ZeroProblem()
      : kernel_(KernelKind::Gaussian, 1.0), grid_{vec1(0.0), vec1(1.0)} {}
  BlockActive blocks() const override { return {.theta = false, .f = true, .mu = true, .h = false}; }
  double value(const SaddleState&) const override { return 0.0; }
  BlockDerivatives derivatives(const SaddleState& u) const override {
    BlockDerivatives d;
    d.d_f = RkhsFunction::zero(kernel_);
    d.d_mu = DualFunctionValues(Vector::Zero(u.mu->size()));
    return d;
  }
  BlockLipschitz lipschitz() const override { return {}; }
  const Kernel& kernel() const override { return kernel_; }
  const std::vector<Vector>& grid() const override { return grid_; }
  FeasibleSets feasible() const override { return {std::nullopt, HilbertBall(kernel_, 1.0)}; }
  double f_curvature() const override { return 0.0; }

 private:
  Kernel kernel_;
  std::vector<Vector> grid_;
};

std::shared_ptr<MatchingGame> five_atom_game(double f_radius = 10.0) {
  const Kernel kernel(KernelKind::Gaussian, 1.0);
  std::vector<Vector> atoms;
  for (int i = 0; i < 5; ++i) atoms.push_back(vec1(0.5 * i));
  Vector nu_w(5);
  nu_w << 0.1, 0.2, 0.4, 0.2, 0.1;
  return make_mmd_matching_game(kernel, atoms, DiscreteMeasure::from_weights(atoms, nu_w),
                                f_radius);
}

double ls_slope(const std::vector<double>& xs, const std::vector<double>& ys) {
  const double n = static_cast<double>(xs.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sx += xs[i];
    sy += ys[i];
    sxx += xs[i] * xs[i];
    sxy += xs[i] * ys[i];
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

}  // namespace

TEST_CASE("step size rules") {
  CHECK(step_size_theorem(1.0).f == doctest::Approx(0.0625));
  CHECK(step_size_theorem(16.0).mu == doctest::Approx(1.0 / 256.0));
  CHECK(step_size_theorem(0.0).f == doctest::Approx(1.0));        // eta_max fallback
  CHECK(step_size_theorem(0.0, 0.3).theta == doctest::Approx(0.3));
  CHECK_THROWS_AS(step_size_theorem(-1.0), ConfigError);

  // sigma = 0 falls back to the theorem rule
  CHECK(step_size_diameter(2.0, 0.0, 5.0, 100).steps.f == doctest::Approx(1.0 / 32.0));
  // printed rule: min{1/(16L), Omega sigma / sqrt(6N)}
  const DiameterStep ds = step_size_diameter(1.0, 1.0, 1.0, 6);
  CHECK(ds.steps.f == doctest::Approx(1.0 / 16.0));  // min{1/16, 1/6}
  CHECK(ds.predicted_bound ==
        doctest::Approx(std::max(8.0 / 6.0, std::sqrt(3.0 / 12.0))));
  // large N: the theorem term is the smaller one for the printed rule
  CHECK(step_size_diameter(1.0, 1e-6, 1.0, 1000000).steps.f == doctest::Approx(1.0 / 16.0));
  // optimizing variant divides by sigma instead
  const DiameterStep opt = step_size_diameter(1.0, 4.0, 1.0, 6, 1.0, true);
  CHECK(opt.steps.f == doctest::Approx(std::min(1.0 / 16.0, 1.0 / (2.0 * 6.0))));
}

TEST_CASE("zero-derivative problem is a fixed point") {
  ZeroProblem p;
  const SaddleState u0 = p.initial_state();
  const RunRecord rec = kmp_run(p, u0, StepSizes::all(0.5), 7);
  CHECK(dist(*rec.averaged.f, *u0.f) == doctest::Approx(0.0));
  CHECK(tv_norm(rec.averaged.mu->weights() - u0.mu->weights()) <= 1e-15);
}

TEST_CASE("one iteration from the saddle stays at the saddle") {
  auto game = five_atom_game();
  SaddleState saddle;
  saddle.f = RkhsFunction::zero(game->kernel());
  saddle.mu = game->nu();
  const RunRecord rec = kmp_run(*game, saddle, step_size_theorem(game->lipschitz().max()), 1);
  CHECK(dist(*rec.averaged.f, *saddle.f) <= 1e-14);
  CHECK(tv_norm(rec.averaged.mu->weights() - saddle.mu->weights()) <= 1e-13);
}

TEST_CASE("duality gap") {
  auto game = five_atom_game();
  const GapSets sets = default_gap_sets(*game);

  SUBCASE("zero at the exact saddle") {
    SaddleState saddle;
    saddle.f = RkhsFunction::zero(game->kernel());
    saddle.mu = game->nu();
    CHECK(duality_gap(*game, saddle, sets) <= 1e-9);
    CHECK(duality_gap(*game, saddle, sets) >= -1e-9);
  }

  SUBCASE("closed-form two-atom value") {
    const std::vector<Vector> atoms{vec1(0.0), vec1(1.0)};
    Vector nu_w(2);
    nu_w << 0.3, 0.7;
    auto g2 =
        make_mmd_matching_game(game->kernel(), atoms, DiscreteMeasure::from_weights(atoms, nu_w),
                               10.0);
    SaddleState u;
    u.f = RkhsFunction::zero(game->kernel());
    u.mu = DiscreteMeasure::uniform(atoms);
    const double expected = 0.5 * 0.08 * (1.0 - std::exp(-0.5));
    CHECK(expected == doctest::Approx(0.015738773611494667).epsilon(1e-14));
    CHECK(duality_gap(*g2, u, default_gap_sets(*g2)) ==
          doctest::Approx(expected).epsilon(1e-10));
    CHECK(g2->closed_form_gap(u) == doctest::Approx(expected).epsilon(1e-12));
  }

  SUBCASE("weak duality and agreement with the closed form on random states") {
    for (int s = 0; s < 40; ++s) {
      const SaddleState u = random_feasible_state(*game, derive_seed(17, s));
      const double gap = duality_gap(*game, u, sets);
      CHECK(gap >= -1e-9);
      CHECK(gap == doctest::Approx(game->closed_form_gap(u)).epsilon(1e-9));
    }
  }
}

TEST_CASE("matching game run: theorem bound, rate, feasibility, averaging") {
  auto game = five_atom_game();
  const double big_l = game->lipschitz().max();
  CHECK(big_l == doctest::Approx(1.0));

  RunOptions opts;
  opts.cadence = GapCadence::Log;
  opts.gap_sets = default_gap_sets(*game);
  opts.record_history = true;
  const SaddleState u0 = game->initial_state();
  const RunRecord rec = kmp_run(*game, u0, step_size_theorem(big_l), 1000, opts);

  const double d_sq = gap_diameter_sq(*game, opts.gap_sets, u0);
  CHECK(d_sq == doctest::Approx(100.0 + 2.0 * std::log(5.0)));

  std::vector<double> log_n, log_gap;
  for (const GapPoint& pt : rec.trace) {
    CHECK(pt.gap <= theorem_gap_bound(big_l, d_sq, pt.iter));
    CHECK(pt.gap >= -1e-9);
    for (int n : {10, 32, 100, 316, 1000})
      if (pt.iter == n) {
        log_n.push_back(std::log(static_cast<double>(n)));
        log_gap.push_back(std::log(std::max(pt.gap, 1e-300)));
      }
  }
  CHECK(log_n.size() == 5);
  CHECK(ls_slope(log_n, log_gap) <= -0.9);

  // every leader iterate is feasible
  for (const SaddleState& u : rec.history) CHECK_NOTHROW(game->check_feasible(u, 1e-12));

  // the averaged state equals the arithmetic mean of the leader iterates
  CHECK(rec.history.size() == 1000);
  Vector w_mean = Vector::Zero(5);
  for (const SaddleState& u : rec.history) w_mean += u.mu->weights();
  w_mean /= 1000.0;
  CHECK(tv_norm(rec.averaged.mu->weights() - w_mean) <= 1e-12);
  RkhsFunction f_mean = RkhsFunction::zero(game->kernel());
  for (const SaddleState& u : rec.history) f_mean = combine(1.0, f_mean, 1.0, *u.f);
  f_mean = f_mean.scaled(1.0 / 1000.0);
  CHECK(dist(rec.averaged.f.value(), f_mean) <= 1e-12);
}

TEST_CASE("determinism of deterministic and stochastic runs") {
  auto game = five_atom_game();
  auto noisy = std::make_shared<AdditiveNoiseProblem>(game, 0.1, 0.1);
  RunOptions opts;
  opts.cadence = GapCadence::Final;
  opts.gap_sets = default_gap_sets(*game);

  const RunRecord a = kmp_run_stochastic(*noisy, noisy->initial_state(),
                                         step_size_theorem(1.0), 50, 2, 31337, opts);
  const RunRecord b = kmp_run_stochastic(*noisy, noisy->initial_state(),
                                         step_size_theorem(1.0), 50, 2, 31337, opts);
  CHECK(dist(*a.averaged.f, *b.averaged.f) == 0.0);
  CHECK((a.averaged.mu->log_weights() - b.averaged.mu->log_weights()).lpNorm<Eigen::Infinity>() ==
        0.0);
  CHECK(a.trace.back().gap == b.trace.back().gap);

  const RunRecord c = kmp_run_stochastic(*noisy, noisy->initial_state(),
                                         step_size_theorem(1.0), 50, 2, 31338, opts);
  CHECK(dist(*a.averaged.f, *c.averaged.f) > 0.0);
}

TEST_CASE("sigma = 0 stochastic run is bit-identical to the deterministic run") {
  auto game = five_atom_game();
  auto noiseless = std::make_shared<AdditiveNoiseProblem>(game, 0.0, 0.0);
  const RunRecord det = kmp_run(*game, game->initial_state(), step_size_theorem(1.0), 40);
  const RunRecord sto = kmp_run_stochastic(*noiseless, noiseless->initial_state(),
                                           step_size_theorem(1.0), 40, 1, 5);
  CHECK(dist(*det.averaged.f, *sto.averaged.f) == 0.0);
  CHECK((det.averaged.mu->log_weights() - sto.averaged.mu->log_weights())
            .lpNorm<Eigen::Infinity>() == 0.0);
}

TEST_CASE("stochastic vicinity and mini-batch variance reduction") {
  auto game = five_atom_game(1.0);  // U_f = feasible ball of radius 1
  const double sigma_sq = 0.01;
  auto noisy = std::make_shared<AdditiveNoiseProblem>(game, std::sqrt(sigma_sq / 2.0),
                                                      std::sqrt(sigma_sq / 2.0));
  const double big_l = game->lipschitz().max();
  RunOptions opts;
  opts.cadence = GapCadence::Final;
  opts.gap_sets = default_gap_sets(*game);
  const double d_sq = gap_diameter_sq(*game, opts.gap_sets, game->initial_state());

  SUBCASE("batch = N drives the gap to the deterministic bound") {
    const int n = 200;
    double mean_gap = 0.0;
    for (int seed = 0; seed < 5; ++seed) {
      const RunRecord rec = kmp_run_stochastic(*noisy, noisy->initial_state(),
                                               step_size_theorem(big_l), n, n, seed, opts);
      mean_gap += rec.trace.back().gap;
    }
    mean_gap /= 5.0;
    CHECK(mean_gap <= 2.0 * theorem_gap_bound(big_l, d_sq, n));
  }

  SUBCASE("batch-1 noise floor stays in the theorem vicinity") {
    const int n = 2000;
    double mean_gap = 0.0;
    for (int seed = 0; seed < 5; ++seed) {
      const RunRecord rec = kmp_run_stochastic(*noisy, noisy->initial_state(),
                                               step_size_theorem(big_l), n, 1, seed, opts);
      mean_gap += rec.trace.back().gap;
    }
    mean_gap /= 5.0;
    const double bound = theorem_gap_bound(big_l, d_sq, n) + 3.0 * sigma_sq / (16.0 * big_l);
    CHECK(mean_gap <= bound);
    // the plateau does not collapse far below the vicinity term
    CHECK(mean_gap >= 3.0 * sigma_sq / (16.0 * big_l) / 4.0);
  }
}

TEST_CASE("gap cadence schedules") {
  auto game = five_atom_game();
  RunOptions opts;
  opts.gap_sets = default_gap_sets(*game);

  opts.cadence = GapCadence::Every;
  CHECK(kmp_run(*game, game->initial_state(), step_size_theorem(1.0), 12, opts).trace.size() ==
        12);
  opts.cadence = GapCadence::Final;
  const RunRecord fin = kmp_run(*game, game->initial_state(), step_size_theorem(1.0), 12, opts);
  CHECK(fin.trace.size() == 1);
  CHECK(fin.trace.back().iter == 12);
  opts.cadence = GapCadence::None;
  CHECK(kmp_run(*game, game->initial_state(), step_size_theorem(1.0), 12, opts).trace.empty());
}

TEST_CASE("solver input validation") {
  auto game = five_atom_game();
  CHECK_THROWS_AS(kmp_run(*game, game->initial_state(), StepSizes::all(0.0), 5), ConfigError);
  CHECK_THROWS_AS(kmp_run(*game, game->initial_state(), StepSizes::all(0.1), 0), ConfigError);
  CHECK_THROWS_AS(
      kmp_run_stochastic(*game, game->initial_state(), StepSizes::all(0.1), 5, 1, 0),
      ConfigError);  // no noise source
}
