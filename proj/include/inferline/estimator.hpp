#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <queue>
#include <string>
#include <vector>

#include "inferline/core.hpp"
#include "inferline/workload.hpp"

namespace inferline {

// Event kinds in processing order at equal timestamps: batch completions
// deliver queries downstream first, arrivals enqueue next, control changes
// (replica activation, policy timers) apply, and dispatch probes form batches
// last so a batch formed at time t sees everything that arrived at t.
enum class EventKind : int {
  kBatchComplete = 0,
  kStageArrival = 1,
  kControl = 2,
  kDispatch = 3,
};

// One line of the simulation audit log.
struct LogEvent {
  double time = 0.0;
  EventKind kind = EventKind::kStageArrival;
  std::string stage;
  std::vector<uint64_t> queries;  // batch members for batch events, single id for arrivals
  int batch_size = 0;             // formed batch size (BatchStart/Complete)
  int capacity_delta = 0;         // replica count change (Control)

  bool operator==(const LogEvent& other) const = default;
};

struct StageTimes {
  double enqueue = -1.0;
  double dequeue = -1.0;   // batch formation instant
  double complete = -1.0;  // batch completion instant

  bool operator==(const StageTimes& other) const = default;
};

struct QueryRecord {
  uint64_t id = 0;
  double arrival = 0.0;
  double latency = 0.0;  // last completion - arrival
  std::map<std::string, StageTimes> stages;
};

struct SimResult {
  std::vector<QueryRecord> records;  // one per trace arrival, in arrival order
  std::vector<LogEvent> log;         // populated when keep_log is set
  double end_time = 0.0;             // last processed event
};

class SimEngine;

// Callbacks a tuning policy receives during a replay. Handlers may call the
// engine's add_replicas/remove_replicas.
class ReplayPolicy {
 public:
  virtual ~ReplayPolicy() = default;
  virtual void on_stage_arrival(SimEngine&, double /*time*/, const std::string& /*stage*/) {}
  virtual void on_timer(SimEngine&, double /*time*/) {}
  virtual double timer_period() const { return 0.0; }  // 0 disables timers
};

struct EngineOptions {
  bool keep_log = false;
  double activation_delay_s = 5.0;  // lag before an added replica serves traffic
  ReplayPolicy* policy = nullptr;
};

// Continuous-time discrete-event replay of a trace through a configured
// pipeline: one centralized FIFO queue per stage, batches formed greedily up
// to the stage's max batch size whenever a replica is idle, partial batches
// billed at the smallest profiled batch that covers them.
class SimEngine {
 public:
  SimEngine(const PipelineSpec& spec, const PipelineConfig& config, const ProfileSet& profiles,
            const ArrivalTrace& trace, EngineOptions options = {});
  ~SimEngine();
  SimEngine(const SimEngine&) = delete;
  SimEngine& operator=(const SimEngine&) = delete;

  SimResult run();

  double now() const { return now_; }
  // Replica becomes effective after the activation delay.
  void add_replicas(const std::string& stage, int n);
  // Capacity drops immediately; in-flight batches still complete.
  void remove_replicas(const std::string& stage, int n);
  int capacity(const std::string& stage) const;

  struct CountChange {
    double time;
    int count;
  };
  // Piecewise-constant replica counts per stage, for cost accounting.
  const std::map<std::string, std::vector<CountChange>>& timeline() const { return timeline_; }

 private:
  struct Stage;
  struct Event {
    double time;
    int kind;
    uint64_t seq;
    int a;       // stage index, or batch id for completions
    uint64_t b;  // query id for arrivals

    friend bool operator>(const Event& x, const Event& y) {
      if (x.time != y.time) return x.time > y.time;
      if (x.kind != y.kind) return x.kind > y.kind;
      return x.seq > y.seq;
    }
  };

  void dispatch(int stage_idx);
  void complete_batch(int batch_id);
  void route_downstream(uint64_t query, int stage_idx);
  void finish_query(uint64_t query);
  void push_event(double t, EventKind kind, int a, uint64_t b);
  int stage_index(const std::string& id) const;

  const PipelineSpec& spec_;
  const ArrivalTrace& trace_;
  EngineOptions options_;

  std::vector<Stage> stages_;
  std::map<std::string, int> stage_idx_;
  std::vector<QueryRecord> records_;
  std::vector<LogEvent> log_;
  std::map<std::string, std::vector<CountChange>> timeline_;

  struct Batch {
    int stage = 0;
    std::vector<uint64_t> members;
    int formed_size = 0;
  };
  std::vector<Batch> batches_;

  struct PendingActivation {
    int stage;
    int count;
  };
  std::vector<PendingActivation> activations_;

  std::priority_queue<Event, std::vector<Event>, std::greater<>> events_;
  uint64_t seq_ = 0;
  double now_ = 0.0;
  bool ran_ = false;
};

// Replays the whole trace with static replica counts.
SimResult simulate(const PipelineSpec& spec, const PipelineConfig& config,
                   const ProfileSet& profiles, const ArrivalTrace& trace, bool keep_log = false);

struct FeasibilityResult {
  bool feasible = false;
  double p99 = 0.0;
};

// P99 <= slo on the trace's end-to-end latencies (nearest-rank percentile).
FeasibilityResult feasible(const PipelineSpec& spec, const PipelineConfig& config,
                           const ProfileSet& profiles, const ArrivalTrace& trace, double slo);

// Nearest-rank percentile: the (floor(p*n)+1)-th smallest value, capped at n.
double percentile_nearest_rank(std::vector<double> values, double p);

std::vector<double> latencies_of(const SimResult& result);

}  // namespace inferline
