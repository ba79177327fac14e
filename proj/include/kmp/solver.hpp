#pragma once

#include <cstdint>
#include <vector>

#include "kmp/saddle.hpp"

namespace kmp {

struct StepSizes {
  double theta = 0.0;
  double f = 0.0;
  double mu = 0.0;
  double h = 0.0;

  static StepSizes all(double eta) { return {eta, eta, eta, eta}; }
};

/// Theorem rule: every block gets 1/(16L); the degenerate L = 0 case falls
/// back to the configured cap.
StepSizes step_size_theorem(double lipschitz_max, double eta_max = 1.0);

struct DiameterStep {
  StepSizes steps;
  double predicted_bound;  // max{ 8 L Omega^2 / N, sqrt(3 sigma^2 Omega^2 / (2N)) }
};

/// Diameter-based stochastic rule, eta = min{1/(16L), Omega*sigma/sqrt(6N)}
/// as printed; `optimizing_variant` switches the second term to
/// Omega/(sigma*sqrt(6N)) (the stationary point of the derived bound). With
/// sigma = 0 this falls back to the theorem rule.
DiameterStep step_size_diameter(double lipschitz_max, double sigma_sq, double omega_sq, int n_steps,
                                double eta_max = 1.0, bool optimizing_variant = false);

enum class GapCadence { Every, Log, Final, None };

struct GapPoint {
  int iter;        // number of averaged leader iterates
  double gap;
  double value_f;  // F at the running average
  double wall_ms;
};

struct RunOptions {
  GapCadence cadence = GapCadence::None;
  GapSets gap_sets;                 // required unless cadence == None
  double compress_tol = 0.0;        // duplicate merge only by default
  bool record_history = false;
  int history_stride = 1;
};

struct RunRecord {
  SaddleState averaged;             // mean of the leader iterates u_0..u_{N-1}
  std::vector<GapPoint> trace;
  std::vector<SaddleState> history; // leader iterates, thinned, when requested
  int iterations = 0;
  int batch = 0;                    // 0 marks a deterministic run
  uint64_t seed = 0;
  double wall_seconds = 0.0;
};

/// Mirror prox: per iteration a leader step from the extrapolation point and
/// an extrapolated step re-using the leader's derivatives, all blocks
/// simultaneously; returns the averaged leader sequence.
RunRecord kmp_run(const SaddleProblem& problem, const SaddleState& u0, const StepSizes& steps,
                  int n_steps, const RunOptions& opts = {});

/// Same control flow with the problem's stochastic derivatives; deterministic
/// given the seed.
RunRecord kmp_run_stochastic(const SaddleProblem& problem, const SaddleState& u0,
                             const StepSizes& steps, int n_steps, int batch, uint64_t seed,
                             const RunOptions& opts = {});

/// max over (mu, h) in U of F(min-blocks of u, .) minus min over (theta, f)
/// in U of F(., max-blocks of u). Exact inner solves on the simplex, the
/// h-ball and the f-ball; projected-gradient subsolver on the theta box.
double duality_gap(const SaddleProblem& problem, const SaddleState& u, const GapSets& sets);

/// D^2_U = max over U of ||theta - theta0||^2 + ||f - f0||^2
///         + 2 KL(mu, mu0) + ||h - h0||^2, per active block.
double gap_diameter_sq(const SaddleProblem& problem, const GapSets& sets, const SaddleState& u0);

/// Gap sets matching the problem's own feasibility sets.
GapSets default_gap_sets(const SaddleProblem& problem);

/// 8 L D^2_U / N at the given iterate count.
double theorem_gap_bound(double lipschitz_max, double diameter_sq, int n_steps);

}  // namespace kmp
