#pragma once

#include <filesystem>
#include <string>

#include "json.hpp"
#include "kmp/dro.hpp"

namespace kmp {

using json = nlohmann::json;

json kernel_to_json(const Kernel& k);
Kernel kernel_from_json(const json& j);

json rkhs_to_json(const RkhsFunction& f);
RkhsFunction rkhs_from_json(const json& j, const Kernel& kernel);

json measure_to_json(const DiscreteMeasure& mu);
DiscreteMeasure measure_from_json(const json& j);

json state_to_json(const SaddleState& u);

json run_record_to_json(const RunRecord& rec);
json suboptimality_report_to_json(const SuboptimalityReport& rep);
json robustness_report_to_json(const RobustnessReport& rep);

/// Gap trace with the fixed header "iter,gap,value_F,wall_ms".
void write_gap_trace_csv(const std::filesystem::path& path, const std::vector<GapPoint>& trace);

void write_json(const std::filesystem::path& path, const json& j);
json read_json(const std::filesystem::path& path);

std::string format_double(double v);  // %.17g, round-trip exact

/// FNV-1a 64 over the canonical dump; echoed into every artifact.
uint64_t config_hash(const json& config);

std::vector<Vector> read_points_csv(const std::filesystem::path& path);

}  // namespace kmp
