#pragma once

#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "inferline/core.hpp"
#include "inferline/estimator.hpp"
#include "inferline/workload.hpp"

namespace inferline {

enum class ActionKind : int {
  kRemoveReplica = 0,  // tie-break order: most direct cost cut first
  kDowngradeHardware = 1,
  kIncreaseBatch = 2,
};

const char* action_kind_name(ActionKind kind);

struct PlanAction {
  ActionKind kind = ActionKind::kRemoveReplica;
  std::string model_id;
  StageConfig after;  // target stage's config after the action
  double cost_per_hour = 0.0;
  double p99 = 0.0;
};

struct PlanResult {
  PipelineConfig config;
  double cost_per_hour = 0.0;
  double p99 = 0.0;
  int iterations = 0;
  PipelineConfig initial_config;
  std::vector<PlanAction> actions;
};

struct Infeasible {
  double min_service_time = 0.0;  // at batch 1 on the lowest-latency hardware
  std::string reason;
};

using PlanOutcome = std::variant<PlanResult, Infeasible>;

struct PlannerOptions {
  int replica_ceiling = 64;  // per stage, bounds the search on pathological inputs
};

// Latency-minimizing feasible start: batch 1 and the lowest-latency-rank
// hardware everywhere, then add replicas at the throughput bottleneck (the
// stage with minimal replicas * throughput / scale factor) until the trace
// simulates within the SLO.
std::variant<PipelineConfig, Infeasible> initialize(const PipelineSpec& spec,
                                                    const ProfileSet& profiles,
                                                    const HardwareCatalog& catalog,
                                                    const ArrivalTrace& trace, double slo,
                                                    const PlannerOptions& options = {});

// Greedy cost minimization over {IncreaseBatch, RemoveReplica, DowngradeHW}
// candidates, feasibility-checked by simulation, until no action improves.
PlanOutcome minimize_cost(const PipelineSpec& spec, const ProfileSet& profiles,
                          const HardwareCatalog& catalog, const ArrivalTrace& trace, double slo,
                          const PlannerOptions& options = {});

// Freeze every other stage, move this stage to the next-cheapest hardware,
// re-initialize its replicas and locally re-optimize its batch/replicas.
// Returns the whole-pipeline candidate only if feasible and strictly cheaper.
std::optional<PipelineConfig> downgrade_hardware(const std::string& stage,
                                                 const PipelineConfig& config,
                                                 const PipelineSpec& spec,
                                                 const ProfileSet& profiles,
                                                 const HardwareCatalog& catalog,
                                                 const ArrivalTrace& trace, double slo,
                                                 const PlannerOptions& options = {});

}  // namespace inferline
