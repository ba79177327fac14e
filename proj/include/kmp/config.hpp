#pragma once

#include <filesystem>
#include <memory>

#include "kmp/oracle.hpp"
#include "kmp/serialize.hpp"

namespace kmp {

struct CliArgs {
  std::filesystem::path config_path;
  std::filesystem::path out_dir;
};

// Each command validates the config up front (unknown keys rejected), runs,
// and writes its artifacts into out_dir. Exit codes: 0 success, 2 config
// error, 3 numerical failure.
int cmd_solve(const CliArgs& args);
int cmd_dro(const CliArgs& args);
int cmd_flow(const CliArgs& args);
int cmd_oracle(const CliArgs& args);
int cmd_gradcheck(const CliArgs& args);

struct ParsedProblem {
  std::shared_ptr<SaddleProblem> problem;  // noise-wrapped when configured
  std::shared_ptr<MatchingGame> game;      // non-null for kind == matching_game
  std::shared_ptr<DroProblem> dro;         // non-null for kind == dro
};

ParsedProblem parse_problem(const json& problem_cfg, const std::filesystem::path& base_dir);
MeshSpec parse_mesh(const json& oracle_cfg);

/// Named instances used by gradcheck and the test suites.
ParsedProblem built_in_problem(const std::string& name);

/// Deterministic feasible state; strictly inside every set so finite
/// differences stay feasible.
SaddleState random_feasible_state(const SaddleProblem& problem, uint64_t seed);

}  // namespace kmp
