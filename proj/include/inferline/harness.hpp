#pragma once

#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "inferline/core.hpp"
#include "inferline/estimator.hpp"
#include "inferline/planner.hpp"
#include "inferline/tuner.hpp"
#include "inferline/workload.hpp"

namespace inferline {

enum class TuningPolicy { kNone, kInferline, kCg };

const char* tuning_policy_name(TuningPolicy p);
std::optional<TuningPolicy> tuning_policy_from_name(const std::string& name);

struct DecisionRecord {
  double time = 0.0;
  std::string kind;  // scale_up | scale_down | cg_scale_up | cg_scale_down
  double rate_qps = 0.0;
  double window_s = 0.0;                // scale_up trigger window
  std::map<std::string, int> targets;   // per-stage replica counts after the decision
};

struct SimReport {
  uint64_t num_queries = 0;
  double p50 = 0.0;
  double p99 = 0.0;
  double max_latency = 0.0;
  double miss_rate = 0.0;     // fraction of queries with latency > slo
  double cost_dollars = 0.0;  // integral of replicas x unit cost over the run
  double duration_s = 0.0;
  double slo = 0.0;
  std::string policy;
  std::map<std::string, int> initial_replicas;
  std::map<std::string, int> final_replicas;
  std::vector<DecisionRecord> decisions;
  std::vector<double> latencies;  // per query, arrival order
};

// Closed-form cost of a piecewise-constant replica timeline over [0, end].
double timeline_cost_dollars(const std::map<std::string, std::vector<SimEngine::CountChange>>&
                                 timeline,
                             const PipelineConfig& config, const HardwareCatalog& catalog,
                             double end_time);

enum class CgMode { kMean, kPeak };

// Whole-pipeline replication unit for the coarse-grained tuner.
struct CgUnit {
  int units = 1;                     // pipeline replicas
  double unit_throughput_qps = 0.0;  // entry rate one unit sustains
  int batch_size = 1;                // uniform max batch size
  // Reactive knobs (documented baseline parameters, not tuned claims).
  double rate_window_s = 30.0;
  double band_low = 0.7;
  double band_high = 1.0;
  double target_utilization = 0.85;
  double stabilization_s = 15.0;
};

// Black-box provisioning: largest uniform batch size whose whole-pipeline
// service time fits the SLO, replicated as a unit until aggregate throughput
// covers the target rate (trace mean for kMean, peak rate over SLO-width
// windows for kPeak).
std::variant<PipelineConfig, Infeasible> cg_provision(const PipelineSpec& spec,
                                                      const ProfileSet& profiles,
                                                      const HardwareCatalog& catalog,
                                                      const ArrivalTrace& trace, double slo,
                                                      CgMode mode, CgUnit* out_unit = nullptr);

// Reactive whole-pipeline scaler: smoothed recent arrival rate against the
// capacity band, with the same stabilization and activation delays as the
// fine-grained tuner.
class CgTuner {
 public:
  explicit CgTuner(CgUnit unit);

  void observe_arrival(double t);
  std::optional<DecisionRecord> on_timer(double now, const std::vector<std::string>& stages);

  int units() const { return unit_.units; }

 private:
  CgUnit unit_;
  double last_change_ = 0.0;
  std::deque<double> recent_;
};

struct ReplayInputs {
  const TunerState* tuner_state = nullptr;  // required for kInferline
  const CgUnit* cg_unit = nullptr;          // required for kCg
  bool keep_records = false;
};

// Live replay of a trace against a cluster whose replica counts change under
// the chosen policy, with activation delays enforced.
SimReport replay(const PipelineSpec& spec, const PipelineConfig& initial_config,
                 const ProfileSet& profiles, const HardwareCatalog& catalog,
                 const ArrivalTrace& trace, double slo, TuningPolicy policy,
                 const ReplayInputs& inputs = {},
                 std::vector<QueryRecord>* out_records = nullptr);

}  // namespace inferline
