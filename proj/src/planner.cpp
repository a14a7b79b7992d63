#include "inferline/planner.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <tuple>

namespace inferline {

const char* action_kind_name(ActionKind kind) {
  switch (kind) {
    case ActionKind::kRemoveReplica:
      return "remove_replica";
    case ActionKind::kDowngradeHardware:
      return "downgrade_hardware";
    case ActionKind::kIncreaseBatch:
      return "increase_batch";
  }
  return "unknown";
}

namespace {

std::string best_hardware(const std::string& stage, const ProfileSet& profiles,
                          const HardwareCatalog& catalog) {
  const ModelProfile& profile = profiles.at(stage);
  const HardwareType* best = nullptr;
  for (const auto& hw_id : profile.hardware_ids()) {
    const HardwareType& hw = catalog.at(hw_id);
    if (!profile.has(hw_id, 1))
      throw ProfileError("stage " + stage + ": batch 1 not profiled on " + hw_id);
    if (!best || hw.latency_rank < best->latency_rank) best = &hw;
  }
  if (!best) throw ProfileError("stage " + stage + " has no profiled hardware");
  return best->id;
}

// Most expensive hardware strictly cheaper than the current one.
std::optional<std::string> next_cheaper_hardware(const std::string& stage,
                                                 const std::string& current_hw,
                                                 const ProfileSet& profiles,
                                                 const HardwareCatalog& catalog) {
  double current_cost = catalog.at(current_hw).cost_per_hour;
  const HardwareType* pick = nullptr;
  for (const auto& hw_id : profiles.at(stage).hardware_ids()) {
    const HardwareType& hw = catalog.at(hw_id);
    if (hw.cost_per_hour >= current_cost) continue;
    if (!pick || hw.cost_per_hour > pick->cost_per_hour ||
        (hw.cost_per_hour == pick->cost_per_hour && hw.latency_rank < pick->latency_rank))
      pick = &hw;
  }
  if (!pick) return std::nullopt;
  return pick->id;
}

double capacity_per_scale(const StageConfig& sc, const ProfileSet& profiles, double scale) {
  if (scale <= 0.0) return std::numeric_limits<double>::infinity();
  double mu = profiles.at(sc.model_id).entry(sc.hardware_id, sc.max_batch_size).throughput_qps;
  return static_cast<double>(sc.replicas) * mu / scale;
}

// Add replicas at the throughput bottleneck until the trace is feasible.
// Mutates `config`; returns the measured p99 on success.
std::variant<double, Infeasible> grow_to_feasible(PipelineConfig& config,
                                                  const PipelineSpec& spec,
                                                  const ProfileSet& profiles,
                                                  const ArrivalTrace& trace, double slo,
                                                  double min_service, int replica_ceiling,
                                                  const std::vector<std::string>& growable) {
  for (;;) {
    FeasibilityResult fr = feasible(spec, config, profiles, trace, slo);
    if (fr.feasible) return fr.p99;
    const std::string* bottleneck = nullptr;
    double bottleneck_cap = std::numeric_limits<double>::infinity();
    for (const auto& stage : growable) {
      double cap = capacity_per_scale(config.stages.at(stage), profiles, spec.scale(stage));
      if (cap < bottleneck_cap) {
        bottleneck_cap = cap;
        bottleneck = &stage;
      }
    }
    if (!bottleneck)
      return Infeasible{min_service, "no stage available to absorb additional load"};
    StageConfig& sc = config.stages.at(*bottleneck);
    if (sc.replicas + 1 > replica_ceiling)
      return Infeasible{min_service, "replica ceiling (" + std::to_string(replica_ceiling) +
                                         ") exceeded at stage " + *bottleneck};
    sc.replicas += 1;
  }
}

struct Candidate {
  ActionKind kind;
  size_t stage_pos;
  std::string model_id;
  PipelineConfig config;
  double cost;
  double p99;

  std::tuple<double, int, size_t, const std::string&> order_key() const {
    return {cost, static_cast<int>(kind), stage_pos, model_id};
  }
};

struct DowngradeResult {
  PipelineConfig config;
  double cost;
  double p99;
};

std::optional<int> next_profiled_batch(const ModelProfile& profile, const std::string& hw,
                                       int current) {
  for (int b : profile.batches(hw))
    if (b > current) return b;
  return std::nullopt;
}

// Local cost minimization restricted to one stage's batch/replica actions.
void minimize_stage_locally(PipelineConfig& config, double& cost, double& p99,
                            const std::string& stage, const PipelineSpec& spec,
                            const ProfileSet& profiles, const HardwareCatalog& catalog,
                            const ArrivalTrace& trace, double slo) {
  for (;;) {
    std::optional<Candidate> best;
    auto consider = [&](ActionKind kind, PipelineConfig cand) {
      FeasibilityResult fr = feasible(spec, cand, profiles, trace, slo);
      if (!fr.feasible) return;
      double cand_cost = config_cost(cand, catalog);
      bool improves = cand_cost < cost || (kind == ActionKind::kIncreaseBatch &&
                                           cand_cost == cost && fr.p99 < p99);
      if (!improves) return;
      Candidate c{kind, 0, stage, std::move(cand), cand_cost, fr.p99};
      if (!best || c.order_key() < best->order_key()) best = std::move(c);
    };

    const StageConfig& sc = config.stages.at(stage);
    if (sc.replicas > 1) {
      PipelineConfig cand = config;
      cand.stages.at(stage).replicas -= 1;
      consider(ActionKind::kRemoveReplica, std::move(cand));
    }
    if (auto nb = next_profiled_batch(profiles.at(stage), sc.hardware_id, sc.max_batch_size)) {
      PipelineConfig cand = config;
      cand.stages.at(stage).max_batch_size = *nb;
      consider(ActionKind::kIncreaseBatch, std::move(cand));
    }
    if (!best) return;
    config = std::move(best->config);
    cost = best->cost;
    p99 = best->p99;
  }
}

std::optional<DowngradeResult> downgrade_impl(const std::string& stage,
                                              const PipelineConfig& config,
                                              const PipelineSpec& spec,
                                              const ProfileSet& profiles,
                                              const HardwareCatalog& catalog,
                                              const ArrivalTrace& trace, double slo,
                                              const PlannerOptions& options) {
  const StageConfig& sc = config.stages.at(stage);
  auto cheaper = next_cheaper_hardware(stage, sc.hardware_id, profiles, catalog);
  if (!cheaper) return std::nullopt;
  if (!profiles.at(stage).has(*cheaper, 1)) return std::nullopt;

  PipelineConfig cand = config;
  StageConfig& csc = cand.stages.at(stage);
  csc.hardware_id = *cheaper;
  csc.max_batch_size = 1;
  csc.replicas = 1;

  double st = service_time(cand, profiles, spec);
  if (st > slo) return std::nullopt;

  auto grown = grow_to_feasible(cand, spec, profiles, trace, slo, st,
                                options.replica_ceiling, {stage});
  if (std::holds_alternative<Infeasible>(grown)) return std::nullopt;
  double p99 = std::get<double>(grown);
  double cost = config_cost(cand, catalog);
  minimize_stage_locally(cand, cost, p99, stage, spec, profiles, catalog, trace, slo);

  if (cost >= config_cost(config, catalog)) return std::nullopt;
  return DowngradeResult{std::move(cand), cost, p99};
}

}  // namespace

std::variant<PipelineConfig, Infeasible> initialize(const PipelineSpec& spec,
                                                    const ProfileSet& profiles,
                                                    const HardwareCatalog& catalog,
                                                    const ArrivalTrace& trace, double slo,
                                                    const PlannerOptions& options) {
  if (trace.arrivals.empty()) throw ValidationError("planning trace must be nonempty");
  if (!(slo > 0.0)) throw ValidationError("slo must be positive");

  PipelineConfig config;
  for (const auto& stage : spec.stages()) {
    StageConfig sc;
    sc.model_id = stage;
    sc.hardware_id = best_hardware(stage, profiles, catalog);
    sc.max_batch_size = 1;
    sc.replicas = 1;
    config.stages[stage] = sc;
  }

  double min_service = service_time(config, profiles, spec);
  if (min_service > slo)
    return Infeasible{min_service,
                      "minimal service time exceeds slo: " + std::to_string(min_service) +
                          " > " + std::to_string(slo)};

  auto grown = grow_to_feasible(config, spec, profiles, trace, slo, min_service,
                                options.replica_ceiling, spec.stages());
  if (std::holds_alternative<Infeasible>(grown)) return std::get<Infeasible>(grown);
  return config;
}

std::optional<PipelineConfig> downgrade_hardware(const std::string& stage,
                                                 const PipelineConfig& config,
                                                 const PipelineSpec& spec,
                                                 const ProfileSet& profiles,
                                                 const HardwareCatalog& catalog,
                                                 const ArrivalTrace& trace, double slo,
                                                 const PlannerOptions& options) {
  auto r = downgrade_impl(stage, config, spec, profiles, catalog, trace, slo, options);
  if (!r) return std::nullopt;
  return std::move(r->config);
}

PlanOutcome minimize_cost(const PipelineSpec& spec, const ProfileSet& profiles,
                          const HardwareCatalog& catalog, const ArrivalTrace& trace, double slo,
                          const PlannerOptions& options) {
  auto init = initialize(spec, profiles, catalog, trace, slo, options);
  if (std::holds_alternative<Infeasible>(init)) return std::get<Infeasible>(init);

  PlanResult result;
  result.config = std::get<PipelineConfig>(init);
  result.initial_config = result.config;
  result.cost_per_hour = config_cost(result.config, catalog);
  result.p99 = feasible(spec, result.config, profiles, trace, slo).p99;

  const auto& order = spec.stages();
  for (;;) {
    std::optional<Candidate> best;
    auto consider = [&](Candidate c) {
      if (!best || c.order_key() < best->order_key()) best = std::move(c);
    };

    for (size_t pos = 0; pos < order.size(); ++pos) {
      const std::string& stage = order[pos];
      const StageConfig& sc = result.config.stages.at(stage);

      if (sc.replicas > 1) {
        PipelineConfig cand = result.config;
        cand.stages.at(stage).replicas -= 1;
        FeasibilityResult fr = feasible(spec, cand, profiles, trace, slo);
        if (fr.feasible) {
          double cost = config_cost(cand, catalog);
          if (cost < result.cost_per_hour)
            consider({ActionKind::kRemoveReplica, pos, stage, std::move(cand), cost, fr.p99});
        }
      }

      if (auto dg =
              downgrade_impl(stage, result.config, spec, profiles, catalog, trace, slo, options)) {
        // downgrade_impl only returns candidates that are feasible and cheaper.
        consider({ActionKind::kDowngradeHardware, pos, stage, std::move(dg->config), dg->cost,
                  dg->p99});
      }

      if (auto nb =
              next_profiled_batch(profiles.at(stage), sc.hardware_id, sc.max_batch_size)) {
        PipelineConfig cand = result.config;
        cand.stages.at(stage).max_batch_size = *nb;
        FeasibilityResult fr = feasible(spec, cand, profiles, trace, slo);
        if (fr.feasible) {
          double cost = config_cost(cand, catalog);
          bool improves =
              cost < result.cost_per_hour ||
              (cost == result.cost_per_hour && fr.p99 < result.p99);
          if (improves)
            consider({ActionKind::kIncreaseBatch, pos, stage, std::move(cand), cost, fr.p99});
        }
      }
    }

    if (!best) break;
    result.config = std::move(best->config);
    result.cost_per_hour = best->cost;
    result.p99 = best->p99;
    result.iterations += 1;
    PlanAction act;
    act.kind = best->kind;
    act.model_id = best->model_id;
    act.after = result.config.stages.at(best->model_id);
    act.cost_per_hour = best->cost;
    act.p99 = best->p99;
    result.actions.push_back(std::move(act));
    if (result.iterations > 100000)
      throw std::runtime_error("planner failed to terminate; state space bug");
  }
  return result;
}

}  // namespace inferline
