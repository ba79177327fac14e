#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "kmp/config.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Primal-dual kernel mirror prox toolkit"};
  app.require_subcommand(1);

  std::string config_path, out_dir;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "experiment config (JSON)")->required();
    sub->add_option("--out", out_dir, "output directory")->required();
  };
  CLI::App* solve = app.add_subcommand("solve", "run mirror prox on a saddle problem");
  CLI::App* dro = app.add_subcommand("dro", "run the DRO pipeline end to end");
  CLI::App* flow = app.add_subcommand("flow", "integrate a gradient flow trajectory");
  CLI::App* oracle = app.add_subcommand("oracle", "brute-force saddle / risk scan");
  CLI::App* gradcheck = app.add_subcommand("gradcheck", "finite-difference derivative audit");
  for (CLI::App* sub : {solve, dro, flow, oracle, gradcheck}) add_common(sub);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  }

  const kmp::CliArgs args{config_path, out_dir};
  if (solve->parsed()) return kmp::cmd_solve(args);
  if (dro->parsed()) return kmp::cmd_dro(args);
  if (flow->parsed()) return kmp::cmd_flow(args);
  if (oracle->parsed()) return kmp::cmd_oracle(args);
  if (gradcheck->parsed()) return kmp::cmd_gradcheck(args);
  return 2;
}
