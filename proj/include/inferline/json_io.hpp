#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "inferline/core.hpp"
#include "inferline/harness.hpp"
#include "inferline/planner.hpp"
#include "inferline/profiler.hpp"

namespace inferline {

// File schemas are documented in docs/formats.md; every file carries a
// format_version field.

HardwareCatalog catalog_from_json(const nlohmann::json& j);
nlohmann::json catalog_to_json(const HardwareCatalog& catalog);

PipelineSpec spec_from_json(const nlohmann::json& j);
nlohmann::json spec_to_json(const PipelineSpec& spec);

std::vector<ExecutorModel> executors_from_json(const nlohmann::json& j);

ProfileSet profiles_from_json(const nlohmann::json& j);
nlohmann::json profiles_to_json(const ProfileSet& profiles);

// Configs are written with their derived cost; loading recomputes and checks it.
PipelineConfig config_from_json(const nlohmann::json& j, const HardwareCatalog* catalog = nullptr,
                                CgUnit* out_cg = nullptr);
nlohmann::json config_to_json(const PipelineConfig& config, const HardwareCatalog& catalog,
                              const CgUnit* cg = nullptr);

nlohmann::json report_to_json(const SimReport& report);
nlohmann::json plan_log_to_json(const PlanResult& result, const HardwareCatalog& catalog);
nlohmann::json decision_to_json(const DecisionRecord& d);

nlohmann::json load_json_file(const std::string& path);
// Write-to-temp-then-rename in the target directory.
void atomic_write_file(const std::string& path, const std::string& content);

}  // namespace inferline
