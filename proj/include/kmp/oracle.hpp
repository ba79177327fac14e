#pragma once

#include "kmp/dro.hpp"

namespace kmp {

/// Mesh controls for the brute-force scans. The total evaluation count is
/// capped; the oracle refuses larger problems.
struct MeshSpec {
  double simplex_step = 0.02;
  double coeff_lo = -2.0;
  double coeff_hi = 2.0;
  double coeff_step = 0.1;
  double theta_step = 0.01;
  std::size_t max_evals = 10'000'000;
};

struct SaddleScanResult {
  double value = 0.0;
  SaddleState arg_min;        // best min-blocks with their worst-case max-blocks
  double error_bound = 0.0;   // mesh * probed local Lipschitz estimate
  std::size_t evaluations = 0;
};

/// Exhaustive min over meshed min-blocks of max over meshed max-blocks of F.
/// Uses only problem.value(); independent of the derivative path.
SaddleScanResult brute_force_saddle(const SaddleProblem& problem, const MeshSpec& mesh);

/// Exhaustive simplex-mesh scan of E_w l(theta;.) subject to
/// (w - what)^T K (w - what) <= eps^2.
double brute_force_dro_risk(const DroProblem& p, const Vector& theta, const MeshSpec& mesh);

/// Central finite differences in the block's coordinate chart against the
/// analytic derivative; returns the max relative error.
double finite_difference_check(const SaddleProblem& problem, const SaddleState& u, Block block,
                               double step);

/// Oracle DRO minimizer: theta mesh scan over the decision box plus local
/// ternary refinement (1-D decision spaces).
Vector oracle_dro_minimizer(const DroProblem& p, const MeshSpec& mesh);
Vector oracle_dro_minimizer(const DroProblem& p, const MeshSpec& mesh, const Vector& center_w,
                            double epsilon);

}  // namespace kmp
