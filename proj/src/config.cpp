#include "kmp/config.hpp"

#include <fstream>
#include <iostream>

#include "kmp/flow.hpp"
#include "kmp/rng.hpp"

namespace kmp {

namespace {

void check_keys(const json& obj, const std::string& ctx,
                std::initializer_list<const char*> allowed) {
  if (!obj.is_object()) throw ConfigError(ctx + ": expected an object");
  for (const auto& [key, _] : obj.items()) {
    bool ok = false;
    for (const char* a : allowed)
      if (key == a) {
        ok = true;
        break;
      }
    if (!ok) throw ConfigError(ctx + ": unknown key '" + key + "'");
  }
}

Vector vec_from(const json& a, const std::string& ctx) {
  if (!a.is_array()) throw ConfigError(ctx + ": expected an array");
  Vector v(static_cast<Eigen::Index>(a.size()));
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!a[i].is_number()) throw ConfigError(ctx + ": expected numbers");
    v[static_cast<Eigen::Index>(i)] = a[i].get<double>();
  }
  return v;
}

std::vector<Vector> points_from(const json& a, const std::string& ctx) {
  if (!a.is_array() || a.empty()) throw ConfigError(ctx + ": expected a non-empty array");
  std::vector<Vector> pts;
  for (std::size_t i = 0; i < a.size(); ++i)
    pts.push_back(vec_from(a[i], ctx + "[" + std::to_string(i) + "]"));
  return pts;
}

Box box_from(const json& j, const std::string& ctx) {
  check_keys(j, ctx, {"lo", "hi"});
  return Box(vec_from(j.at("lo"), ctx + ".lo"), vec_from(j.at("hi"), ctx + ".hi"));
}

std::vector<Vector> grid_from(const json& j, const std::string& ctx) {
  if (j.is_array()) return points_from(j, ctx);
  check_keys(j, ctx, {"lo", "hi", "count"});
  const double lo = j.at("lo").get<double>();
  const double hi = j.at("hi").get<double>();
  const int count = j.at("count").get<int>();
  if (count < 1 || !(hi > lo)) throw ConfigError(ctx + ": bad 1-D grid spec");
  std::vector<Vector> pts;
  for (int i = 0; i < count; ++i) {
    Vector v(1);
    v[0] = count == 1 ? lo : lo + (hi - lo) * i / (count - 1);
    pts.push_back(v);
  }
  return pts;
}

LossSpec loss_from(const json& j, const std::vector<Vector>& grid) {
  check_keys(j, "problem.loss", {"kind", "clip"});
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "logistic") return make_logistic_loss(grid);
  if (kind == "clipped_quadratic")
    return make_clipped_quadratic_loss(grid, j.value("clip", 4.0));
  throw ConfigError("problem.loss.kind: unknown loss '" + kind + "'");
}

}  // namespace

ParsedProblem parse_problem(const json& j, const std::filesystem::path& base_dir) {
  ParsedProblem out;
  const std::string kind = j.value("kind", "");
  if (kind == "matching_game") {
    check_keys(j, "problem", {"kind", "kernel", "atoms", "nu_weights", "f_radius", "noise"});
    const Kernel kernel = kernel_from_json(j.at("kernel"));
    auto atoms = points_from(j.at("atoms"), "problem.atoms");
    const Vector nu_w = vec_from(j.at("nu_weights"), "problem.nu_weights");
    if (nu_w.size() != static_cast<Eigen::Index>(atoms.size()))
      throw ConfigError("problem.nu_weights: length must match atoms");
    const double rf = j.value("f_radius", 10.0);
    out.game = make_mmd_matching_game(kernel, atoms,
                                      DiscreteMeasure::from_weights(atoms, nu_w), rf);
    out.problem = out.game;
  } else if (kind == "dro") {
    check_keys(j, "problem",
               {"kind", "kernel", "grid", "data", "epsilon", "loss", "theta_box", "f_radius",
                "paper_sign_variant", "noise"});
    DroConfig cfg{kernel_from_json(j.at("kernel")),
                  grid_from(j.at("grid"), "problem.grid"),
                  {},
                  j.at("epsilon").get<double>(),
                  {},
                  box_from(j.at("theta_box"), "problem.theta_box"),
                  j.value("f_radius", 10.0),
                  j.value("paper_sign_variant", false)};
    const json& data = j.at("data");
    if (data.is_string())
      cfg.data = read_points_csv(base_dir / data.get<std::string>());
    else
      cfg.data = points_from(data, "problem.data");
    cfg.loss = loss_from(j.at("loss"), cfg.grid);
    out.dro = std::make_shared<DroProblem>(std::move(cfg));
    out.problem = out.dro;
  } else {
    throw ConfigError("problem.kind: expected 'matching_game' or 'dro'");
  }

  if (j.contains("noise")) {
    const json& n = j.at("noise");
    check_keys(n, "problem.noise", {"sigma_theta", "sigma_f", "sigma_mu", "sigma_h"});
    out.problem = std::make_shared<AdditiveNoiseProblem>(
        out.problem, n.value("sigma_f", 0.0), n.value("sigma_mu", 0.0),
        n.value("sigma_theta", 0.0), n.value("sigma_h", 0.0));
  }
  return out;
}

MeshSpec parse_mesh(const json& j) {
  check_keys(j, "oracle",
             {"simplex_step", "coeff_lo", "coeff_hi", "coeff_step", "theta_step", "max_evals",
              "risk_theta"});
  MeshSpec m;
  m.simplex_step = j.value("simplex_step", m.simplex_step);
  m.coeff_lo = j.value("coeff_lo", m.coeff_lo);
  m.coeff_hi = j.value("coeff_hi", m.coeff_hi);
  m.coeff_step = j.value("coeff_step", m.coeff_step);
  m.theta_step = j.value("theta_step", m.theta_step);
  m.max_evals = j.value("max_evals", m.max_evals);
  return m;
}

namespace {

struct SolverSpec {
  std::string mode = "deterministic";
  int iterations = 100;
  std::string step_rule = "theorem";
  double eta = 0.0;
  double eta_max = 1.0;
  int batch = 1;
  uint64_t seed = 0;
};

SolverSpec solver_from(const json& j) {
  check_keys(j, "solver",
             {"mode", "iterations", "step_rule", "eta", "eta_max", "batch", "seed"});
  SolverSpec s;
  s.mode = j.value("mode", s.mode);
  if (s.mode != "deterministic" && s.mode != "stochastic")
    throw ConfigError("solver.mode: expected 'deterministic' or 'stochastic'");
  s.iterations = j.value("iterations", s.iterations);
  if (s.iterations < 1) throw ConfigError("solver.iterations: must be >= 1");
  s.step_rule = j.value("step_rule", s.step_rule);
  s.eta = j.value("eta", s.eta);
  s.eta_max = j.value("eta_max", s.eta_max);
  s.batch = j.value("batch", s.batch);
  if (s.batch < 1) throw ConfigError("solver.batch: must be >= 1");
  s.seed = j.value("seed", s.seed);
  if (s.step_rule == "fixed" && !(s.eta > 0.0))
    throw ConfigError("solver.eta: must be > 0 for the fixed step rule");
  return s;
}

GapSets gap_sets_from(const json& cfg, const SaddleProblem& p) {
  GapSets sets = default_gap_sets(p);
  if (!cfg.contains("gap")) return sets;
  const json& g = cfg.at("gap");
  check_keys(g, "gap", {"cadence", "f_radius", "theta_box"});
  if (g.contains("f_radius")) sets.f_ball = HilbertBall(p.kernel(), g.at("f_radius").get<double>());
  if (g.contains("theta_box")) sets.theta_box = box_from(g.at("theta_box"), "gap.theta_box");
  return sets;
}

GapCadence cadence_from(const json& cfg) {
  const std::string c =
      cfg.contains("gap") ? cfg.at("gap").value("cadence", "final") : std::string("final");
  if (c == "every") return GapCadence::Every;
  if (c == "log") return GapCadence::Log;
  if (c == "final") return GapCadence::Final;
  if (c == "none") return GapCadence::None;
  throw ConfigError("gap.cadence: expected every|log|final|none");
}

StepSizes steps_from(const SolverSpec& s, const SaddleProblem& p, const GapSets& sets) {
  const double big_l = p.lipschitz().max();
  if (s.step_rule == "theorem") return step_size_theorem(big_l, s.eta_max);
  if (s.step_rule == "fixed") return StepSizes::all(s.eta);
  if (s.step_rule == "diameter" || s.step_rule == "diameter_optimizing") {
    const double omega_sq = gap_diameter_sq(p, sets, p.initial_state());
    const double sigma_sq = p.noise_variances().sum() / s.batch;
    return step_size_diameter(big_l, sigma_sq, omega_sq, s.iterations, s.eta_max,
                              s.step_rule == "diameter_optimizing")
        .steps;
  }
  throw ConfigError("solver.step_rule: expected theorem|fixed|diameter|diameter_optimizing");
}

json artifact_header(const json& cfg) {
  char hex[24];
  std::snprintf(hex, sizeof(hex), "%016llx",
                static_cast<unsigned long long>(config_hash(cfg)));
  return {{"config", cfg}, {"config_hash", hex}};
}

std::filesystem::path ensure_out_dir(const CliArgs& args) {
  std::error_code ec;
  std::filesystem::create_directories(args.out_dir, ec);
  if (ec) throw ConfigError("cannot create output dir: " + args.out_dir.string());
  return args.out_dir;
}

std::string prefix_from(const json& cfg) {
  if (!cfg.contains("output")) return "run";
  check_keys(cfg.at("output"), "output", {"prefix"});
  return cfg.at("output").value("prefix", "run");
}

int guarded(const std::function<void()>& body) {
  try {
    body();
    return 0;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const json::exception& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return 3;
  }
}

RunRecord run_from_config(const json& cfg, const ParsedProblem& parsed, const GapSets& sets) {
  const SolverSpec spec = solver_from(cfg.value("solver", json::object()));
  const SaddleProblem& p = *parsed.problem;
  RunOptions opts;
  opts.cadence = cadence_from(cfg);
  opts.gap_sets = sets;
  const StepSizes steps = steps_from(spec, p, sets);
  if (spec.mode == "stochastic")
    return kmp_run_stochastic(p, p.initial_state(), steps, spec.iterations, spec.batch, spec.seed,
                              opts);
  return kmp_run(p, p.initial_state(), steps, spec.iterations, opts);
}

}  // namespace

int cmd_solve(const CliArgs& args) {
  return guarded([&] {
    const json cfg = read_json(args.config_path);
    check_keys(cfg, "config", {"problem", "solver", "gap", "output"});
    const ParsedProblem parsed = parse_problem(cfg.at("problem"), args.config_path.parent_path());
    const GapSets sets = gap_sets_from(cfg, *parsed.problem);
    const RunRecord rec = run_from_config(cfg, parsed, sets);
    const auto out = ensure_out_dir(args);
    const std::string prefix = prefix_from(cfg);
    json j = artifact_header(cfg);
    j["record"] = run_record_to_json(rec);
    j["gap_bound_final"] = theorem_gap_bound(
        parsed.problem->lipschitz().max(),
        gap_diameter_sq(*parsed.problem, sets, parsed.problem->initial_state()), rec.iterations);
    write_json(out / (prefix + "_record.json"), j);
    write_gap_trace_csv(out / (prefix + "_trace.csv"), rec.trace);
  });
}

int cmd_dro(const CliArgs& args) {
  return guarded([&] {
    const json cfg = read_json(args.config_path);
    check_keys(cfg, "config", {"problem", "solver", "gap", "dro", "output"});
    const ParsedProblem parsed = parse_problem(cfg.at("problem"), args.config_path.parent_path());
    if (!parsed.dro) throw ConfigError("cmd dro: problem.kind must be 'dro'");
    const DroProblem& p = *parsed.dro;
    const GapSets sets = gap_sets_from(cfg, *parsed.problem);
    const RunRecord rec = run_from_config(cfg, parsed, sets);
    const SuboptimalityReport sub = kmp_suboptimality_certificate(p, rec, sets);

    json dro_cfg = cfg.value("dro", json::object());
    check_keys(dro_cfg, "dro", {"delta", "mu0_weights", "report_epsilon"});
    const double delta = dro_cfg.value("delta", 0.05);
    const double rep_eps = dro_cfg.value("report_epsilon", p.epsilon());
    const DiscreteMeasure mu0 =
        dro_cfg.contains("mu0_weights")
            ? DiscreteMeasure::from_weights(
                  p.grid(), vec_from(dro_cfg.at("mu0_weights"), "dro.mu0_weights"))
            : DiscreteMeasure::from_weights(p.grid(), p.empirical_weights());
    const RobustnessReport rob =
        robustness_report(p, *rec.averaged.theta, mu0, delta, rep_eps);
    if (rob.epsilon_warning)
      std::cerr << "warning: epsilon " << rob.epsilon << " <= epsilon_n(" << delta << ") = "
                << rob.epsilon_n_value << "; population clause not asserted\n";

    const auto out = ensure_out_dir(args);
    const std::string prefix = prefix_from(cfg);
    json j = artifact_header(cfg);
    j["risk_kmp"] = sub.risk_kmp;
    j["risk_oracle"] = sub.risk_oracle;
    j["gap_bound"] = sub.gap_bound;
    j["epsilon"] = p.epsilon();
    j["epsilon_n"] = rob.epsilon_n_value;
    j["suboptimality"] = suboptimality_report_to_json(sub);
    j["clauses"] = robustness_report_to_json(rob)["clauses"];
    j["epsilon_warning"] = rob.epsilon_warning;
    j["loss"] = {{"kind", p.loss().kind},
                 {"convex_in_theta", p.loss().convex_in_theta},
                 {"nonconvex_in_x", p.loss().nonconvex_in_x}};
    write_json(out / (prefix + "_report.json"), j);
    json r = artifact_header(cfg);
    r["record"] = run_record_to_json(rec);
    write_json(out / (prefix + "_record.json"), r);
    write_gap_trace_csv(out / (prefix + "_trace.csv"), rec.trace);
  });
}

int cmd_flow(const CliArgs& args) {
  return guarded([&] {
    const json cfg = read_json(args.config_path);
    check_keys(cfg, "config", {"problem", "flow", "output"});
    const json& f = cfg.at("flow");
    check_keys(f, "flow",
               {"kind", "kernel", "dt", "t_end", "lambda", "target", "f0"});
    const double dt = f.value("dt", 1e-3);
    const double t_end = f.value("t_end", 1.0);
    if (!(dt > 0.0) || !(t_end > 0.0)) throw ConfigError("flow.dt/t_end: must be positive");
    const int n_steps = static_cast<int>(std::llround(t_end / dt));
    const std::string kind = f.value("kind", "quadratic");

    const auto out = ensure_out_dir(args);
    const std::string prefix = prefix_from(cfg);
    std::ofstream csv(out / (prefix + "_trajectory.csv"));
    json summary = artifact_header(cfg);

    if (kind == "quadratic") {
      const Kernel kernel = kernel_from_json(f.at("kernel"));
      auto fn_from = [&](const json& spec, const std::string& ctx) {
        check_keys(spec, ctx, {"atoms", "coefficients"});
        return RkhsFunction(kernel, points_from(spec.at("atoms"), ctx + ".atoms"),
                            vec_from(spec.at("coefficients"), ctx + ".coefficients"));
      };
      const RkhsFunction target = fn_from(f.at("target"), "flow.target");
      Energy v = quadratic_energy(target);
      v.lambda = f.value("lambda", 1.0);
      FlowState s{0.0, fn_from(f.at("f0"), "flow.f0"), std::nullopt};
      std::vector<FlowState> traj{s};
      csv << "t,f_norm,energy\n";
      csv << format_double(s.t) << ',' << format_double(s.f.norm()) << ','
          << format_double(v.value(s.f)) << '\n';
      for (int k = 0; k < n_steps; ++k) {
        s = rkhs_flow_step(v, s, dt);
        traj.push_back(s);
        csv << format_double(s.t) << ',' << format_double(s.f.norm()) << ','
            << format_double(v.value(s.f)) << '\n';
      }
      const double init_dist = dist(traj.front().f, target);
      summary["terminal_ratio"] =
          init_dist > 0.0 ? dist(s.f, target) / init_dist : 0.0;
      summary["evi_residual"] = evi_residual(v, traj, target);
    } else if (kind == "interacting") {
      const ParsedProblem parsed =
          parse_problem(cfg.at("problem"), args.config_path.parent_path());
      const SaddleProblem& p = *parsed.problem;
      SaddleState u0 = p.initial_state();
      FlowState s{0.0, *u0.f, u0.mu};
      csv << "t,f_norm,value_F";
      for (Eigen::Index i = 0; i < s.mu->size(); ++i) csv << ",w" << i;
      csv << '\n';
      auto emit = [&](const FlowState& st) {
        SaddleState u;
        u.f = st.f;
        u.mu = st.mu;
        csv << format_double(st.t) << ',' << format_double(st.f.norm()) << ','
            << format_double(p.value(u));
        const Vector w = st.mu->weights();
        for (Eigen::Index i = 0; i < w.size(); ++i) csv << ',' << format_double(w[i]);
        csv << '\n';
      };
      emit(s);
      for (int k = 0; k < n_steps; ++k) {
        s = interacting_flow_step(p, s, dt);
        emit(s);
      }
      SaddleState u;
      u.f = s.f;
      u.mu = s.mu;
      summary["terminal_value_F"] = p.value(u);
      summary["terminal_f_norm"] = s.f.norm();
    } else {
      throw ConfigError("flow.kind: expected 'quadratic' or 'interacting'");
    }
    write_json(out / (prefix + "_summary.json"), summary);
  });
}

int cmd_oracle(const CliArgs& args) {
  return guarded([&] {
    const json cfg = read_json(args.config_path);
    check_keys(cfg, "config", {"problem", "oracle", "output"});
    const ParsedProblem parsed = parse_problem(cfg.at("problem"), args.config_path.parent_path());
    const json oracle_cfg = cfg.value("oracle", json::object());
    const MeshSpec mesh = parse_mesh(oracle_cfg);

    const auto out = ensure_out_dir(args);
    json j = artifact_header(cfg);
    j["mesh"] = {{"simplex_step", mesh.simplex_step}, {"coeff_lo", mesh.coeff_lo},
                 {"coeff_hi", mesh.coeff_hi},         {"coeff_step", mesh.coeff_step},
                 {"theta_step", mesh.theta_step},     {"max_evals", mesh.max_evals}};
    if (parsed.dro && oracle_cfg.contains("risk_theta")) {
      const Vector theta = vec_from(oracle_cfg.at("risk_theta"), "oracle.risk_theta");
      j["risk_brute_force"] = brute_force_dro_risk(*parsed.dro, theta, mesh);
      j["risk_subsolver"] = dro_risk(*parsed.dro, theta);
    } else {
      const SaddleScanResult res = brute_force_saddle(*parsed.problem, mesh);
      j["value"] = res.value;
      j["error_bound"] = res.error_bound;
      j["evaluations"] = res.evaluations;
    }
    write_json(out / (prefix_from(cfg) + "_oracle.json"), j);
  });
}

int cmd_gradcheck(const CliArgs& args) {
  return guarded([&] {
    const json cfg = read_json(args.config_path);
    check_keys(cfg, "config", {"gradcheck", "output"});
    const json& g = cfg.at("gradcheck");
    check_keys(g, "gradcheck", {"problems", "states", "fd_step", "seed", "tolerance"});
    const int n_states = g.value("states", 50);
    const double fd_step = g.value("fd_step", 1e-5);
    const uint64_t seed = g.value("seed", 7ULL);
    const double tol = g.value("tolerance", 1e-5);
    std::vector<std::string> names;
    if (g.contains("problems"))
      for (const auto& n : g.at("problems")) names.push_back(n.get<std::string>());
    else
      names = {"matching_game", "dro_logistic", "dro_clipped"};

    json table = json::object();
    bool all_ok = true;
    for (const std::string& name : names) {
      const ParsedProblem parsed = built_in_problem(name);
      const SaddleProblem& p = *parsed.problem;
      const BlockActive act = p.blocks();
      json row = json::object();
      auto run_block = [&](Block b, const char* label) {
        double worst = 0.0;
        for (int s = 0; s < n_states; ++s) {
          const SaddleState u = random_feasible_state(p, derive_seed(seed, s));
          worst = std::max(worst, finite_difference_check(p, u, b, fd_step));
        }
        row[label] = worst;
        if (worst > tol) all_ok = false;
      };
      if (act.theta) run_block(Block::Theta, "theta");
      if (act.f) run_block(Block::F, "f");
      if (act.mu) run_block(Block::Mu, "mu");
      if (act.h) run_block(Block::H, "h");
      table[name] = row;
    }
    const auto out = ensure_out_dir(args);
    json j = artifact_header(cfg);
    j["tolerance"] = tol;
    j["max_relative_errors"] = table;
    j["pass"] = all_ok;
    write_json(out / (prefix_from(cfg) + "_gradcheck.json"), j);
    if (!all_ok) throw NumericalError("gradcheck: finite-difference error above tolerance");
  });
}

ParsedProblem built_in_problem(const std::string& name) {
  auto grid_1d = [](double lo, double hi, int count) {
    std::vector<Vector> pts;
    for (int i = 0; i < count; ++i) {
      Vector v(1);
      v[0] = lo + (hi - lo) * i / (count - 1);
      pts.push_back(v);
    }
    return pts;
  };
  if (name == "matching_game") {
    const Kernel kernel(KernelKind::Gaussian, 1.0);
    auto atoms = grid_1d(0.0, 2.0, 5);
    Vector nu_w(5);
    nu_w << 0.1, 0.2, 0.4, 0.2, 0.1;
    ParsedProblem out;
    out.game = make_mmd_matching_game(kernel, atoms, DiscreteMeasure::from_weights(atoms, nu_w),
                                      10.0);
    out.problem = out.game;
    return out;
  }
  if (name == "dro_logistic" || name == "dro_clipped") {
    DroConfig cfg{Kernel(KernelKind::Gaussian, 1.0),
                  grid_1d(-1.5, 1.5, 10),
                  {},
                  0.3,
                  {},
                  Box(Vector::Constant(1, -3.0), Vector::Constant(1, 3.0)),
                  10.0,
                  false};
    cfg.data = {cfg.grid[1], cfg.grid[3], cfg.grid[4], cfg.grid[6], cfg.grid[8]};
    cfg.loss = name == "dro_logistic" ? make_logistic_loss(cfg.grid)
                                      : make_clipped_quadratic_loss(cfg.grid, 4.0);
    ParsedProblem out;
    out.dro = std::make_shared<DroProblem>(std::move(cfg));
    out.problem = out.dro;
    return out;
  }
  throw ConfigError("unknown built-in problem '" + name + "'");
}

SaddleState random_feasible_state(const SaddleProblem& problem, uint64_t seed) {
  Rng rng(derive_seed(seed, 0x7374617465ULL));
  const BlockActive act = problem.blocks();
  const FeasibleSets fs = problem.feasible();
  const std::vector<Vector>& grid = problem.grid();
  const Eigen::Index m = static_cast<Eigen::Index>(grid.size());
  SaddleState u;
  if (act.theta) {
    const Box& box = *fs.theta_box;
    Vector t(box.dim());
    for (Eigen::Index i = 0; i < box.dim(); ++i)
      t[i] = box.lo[i] + (0.05 + 0.9 * rng.uniform()) * (box.hi[i] - box.lo[i]);
    u.theta = std::move(t);
  }
  auto random_fn = [&](double max_norm) {
    RkhsFunction raw(problem.kernel(), grid, rng.normal_vector(m));
    const double target = (0.1 + 0.8 * rng.uniform()) * max_norm;
    return raw.norm() > 0.0 ? raw.scaled(target / raw.norm()) : raw;
  };
  if (act.f) {
    const double cap = fs.f_ball && !fs.f_ball->is_unbounded() ? fs.f_ball->radius : 3.0;
    u.f = random_fn(std::min(cap, 3.0));
  }
  if (act.mu) {
    Vector lw = rng.normal_vector(m);
    u.mu = DiscreteMeasure(grid, lw);
  }
  if (act.h) u.h = random_fn(0.9);
  return u;
}

}  // namespace kmp
