#include "kmp/serialize.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

namespace kmp {

namespace {

json vector_to_json(const Vector& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

Vector vector_from_json(const json& a) {
  Vector v(static_cast<Eigen::Index>(a.size()));
  for (std::size_t i = 0; i < a.size(); ++i) v[static_cast<Eigen::Index>(i)] = a[i].get<double>();
  return v;
}

json points_to_json(const std::vector<Vector>& pts) {
  json a = json::array();
  for (const auto& p : pts) a.push_back(vector_to_json(p));
  return a;
}

std::vector<Vector> points_from_json(const json& a) {
  std::vector<Vector> pts;
  for (const auto& p : a) pts.push_back(vector_from_json(p));
  return pts;
}

}  // namespace

json kernel_to_json(const Kernel& k) {
  return {{"kind", k.kind() == KernelKind::Gaussian ? "gaussian" : "laplacian"},
          {"bandwidth", k.bandwidth()}};
}

Kernel kernel_from_json(const json& j) {
  const std::string kind = j.at("kind").get<std::string>();
  const double bw = j.at("bandwidth").get<double>();
  if (kind == "gaussian") return Kernel(KernelKind::Gaussian, bw);
  if (kind == "laplacian") return Kernel(KernelKind::Laplacian, bw);
  throw ConfigError("unknown kernel kind: " + kind);
}

json rkhs_to_json(const RkhsFunction& f) {
  return {{"kernel", kernel_to_json(f.kernel())},
          {"dictionary", points_to_json(f.dictionary())},
          {"coefficients", vector_to_json(f.coefficients())}};
}

RkhsFunction rkhs_from_json(const json& j, const Kernel& kernel) {
  return RkhsFunction(kernel, points_from_json(j.at("dictionary")),
                      vector_from_json(j.at("coefficients")));
}

json measure_to_json(const DiscreteMeasure& mu) {
  return {{"atoms", points_to_json(mu.atoms())},
          {"log_weights", vector_to_json(mu.log_weights())}};
}

DiscreteMeasure measure_from_json(const json& j) {
  return DiscreteMeasure(points_from_json(j.at("atoms")), vector_from_json(j.at("log_weights")));
}

json state_to_json(const SaddleState& u) {
  json j = json::object();
  if (u.theta) j["theta"] = vector_to_json(*u.theta);
  if (u.f) j["f"] = rkhs_to_json(*u.f);
  if (u.mu) j["mu"] = measure_to_json(*u.mu);
  if (u.h) j["h"] = rkhs_to_json(*u.h);
  return j;
}

json run_record_to_json(const RunRecord& rec) {
  json trace = json::array();
  for (const auto& p : rec.trace)
    trace.push_back({{"iter", p.iter}, {"gap", p.gap}, {"value_F", p.value_f}});
  return {{"averaged", state_to_json(rec.averaged)},
          {"iterations", rec.iterations},
          {"batch", rec.batch},
          {"seed", rec.seed},
          {"trace", trace},
          {"wall_seconds", rec.wall_seconds}};
}

json suboptimality_report_to_json(const SuboptimalityReport& rep) {
  return {{"theta_kmp", vector_to_json(rep.theta_kmp)},
          {"theta_oracle", vector_to_json(rep.theta_oracle)},
          {"risk_kmp", rep.risk_kmp},
          {"risk_oracle", rep.risk_oracle},
          {"risk_difference", rep.risk_difference},
          {"duality_gap", rep.duality_gap_value},
          {"gap_bound", rep.gap_bound},
          {"subsolver_tol", rep.subsolver_tol},
          {"holds", rep.holds},
          {"l_theta_theta", {{"used_sup_L", rep.l1_used},
                             {"sup_mean_L", rep.l1_sup_mean},
                             {"sup_mean_L_sq", rep.l1_sup_mean_sq}}}};
}

json robustness_report_to_json(const RobustnessReport& rep) {
  return {{"epsilon", rep.epsilon},
          {"epsilon_n", rep.epsilon_n_value},
          {"epsilon_warning", rep.epsilon_warning},
          {"mmd_emp_pop", rep.mmd_emp_pop},
          {"clauses",
           {{"population",
             {{"population_risk", rep.population_risk},
              {"dro_risk_emp", rep.dro_risk_emp},
              {"applicable", rep.population_clause_applicable},
              {"holds", rep.population_clause_holds}}},
            {"shift",
             {{"shifted_risk", rep.shifted_risk},
              {"oracle_risk_emp", rep.oracle_risk_emp},
              {"slack", rep.shift_slack}}}}}};
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void write_gap_trace_csv(const std::filesystem::path& path, const std::vector<GapPoint>& trace) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot open for writing: " + path.string());
  out << "iter,gap,value_F,wall_ms\n";
  for (const auto& p : trace)
    out << p.iter << ',' << format_double(p.gap) << ',' << format_double(p.value_f) << ','
        << format_double(p.wall_ms) << '\n';
}

void write_json(const std::filesystem::path& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot open for writing: " + path.string());
  out << j.dump(2) << '\n';
}

json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open: " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw ConfigError("invalid JSON in " + path.string() + ": " + e.what());
  }
  return j;
}

uint64_t config_hash(const json& config) {
  const std::string s = config.dump();
  uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::vector<Vector> read_points_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open data file: " + path.string());
  std::vector<Vector> pts;
  std::string line;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty()) continue;
    std::vector<double> vals;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      try {
        vals.push_back(std::stod(cell));
      } catch (const std::exception&) {
        throw ConfigError("bad number in " + path.string() + " row " + std::to_string(row));
      }
    }
    Vector v(static_cast<Eigen::Index>(vals.size()));
    for (std::size_t i = 0; i < vals.size(); ++i) v[static_cast<Eigen::Index>(i)] = vals[i];
    pts.push_back(std::move(v));
  }
  if (pts.empty()) throw ConfigError("empty data file: " + path.string());
  return pts;
}

}  // namespace kmp
