#pragma once

#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "inferline/core.hpp"
#include "inferline/workload.hpp"

namespace inferline {

// Max-queries-per-window curve over exponentially doubling windows. The
// smallest window is the pipeline service time; widths double up to 60 s.
struct TrafficEnvelope {
  std::vector<double> windows;   // seconds, windows[i+1] == 2 * windows[i]
  std::vector<uint64_t> counts;  // q_i: max arrivals in any closed window of that width

  double rate(size_t i) const { return static_cast<double>(counts[i]) / windows[i]; }
  size_t size() const { return windows.size(); }
};

std::vector<double> envelope_ladder(double service_time_s);

// Exact sliding maxima over every offset (windows are closed intervals; a
// maximal window can always be slid so its right edge is an arrival).
TrafficEnvelope build_envelope(const std::vector<double>& arrivals, double service_time_s);
TrafficEnvelope build_envelope(const ArrivalTrace& trace, double service_time_s);

struct UpTrigger {
  double peak_rate = 0.0;   // max rate among violating windows
  double window_s = 0.0;    // window that produced peak_rate
  std::vector<size_t> violating;  // indices of all violating windows
};

// Scale-up trigger when any live window rate exceeds its planning-envelope
// counterpart.
std::optional<UpTrigger> detect(const TrafficEnvelope& live, const TrafficEnvelope& plan);

struct StageTunables {
  double unit_throughput_qps = 0.0;  // single replica at planned batch/hardware
  double scale_factor = 1.0;
  double provision_ratio = 1.0;  // planned per-stage load / capacity, in (0, 1]
};

struct TunerState {
  TrafficEnvelope plan_envelope;
  std::map<std::string, StageTunables> stages;
  double min_provision_ratio = 1.0;  // pipeline minimum, used for scale-down
  double plan_rate_qps = 0.0;
  double stabilization_s = 15.0;   // quiet period after any change before scale-down
  double lookback_s = 30.0;        // scale-down rate lookback
  double subwindow_s = 5.0;        // scale-down rate subwindows
  double activation_delay_s = 5.0;
};

TunerState make_tuner_state(const PipelineSpec& spec, const PipelineConfig& config,
                            const ProfileSet& profiles, const ArrivalTrace& plan_trace);

struct TunerDecision {
  enum class Kind { kScaleUp, kScaleDown };
  Kind kind = Kind::kScaleUp;
  double time = 0.0;
  double peak_rate = 0.0;    // scale-up trigger rate
  double window_s = 0.0;     // scale-up trigger window
  double new_rate = 0.0;     // scale-down observed rate
  std::map<std::string, int> targets;  // resulting per-stage replica counts
};

// Per-stage replica targets for serving `peak_rate`; never lowers a count.
std::map<std::string, int> scale_up_targets(const TunerState& state, double peak_rate,
                                            const std::map<std::string, int>& current);

// Per-stage targets for the observed rate using the pipeline-minimum
// provisioning ratio; never raises a count, floor 1.
std::map<std::string, int> scale_down_targets(const TunerState& state, double new_rate,
                                              const std::map<std::string, int>& current);

// Streaming detector: consumes entry arrivals in time order, maintains exact
// window counts, and emits scale decisions. Drives the replay harness and is
// unit-testable without an engine.
class TunerSession {
 public:
  TunerSession(TunerState state, std::map<std::string, int> initial_counts);

  // Returns a decision when the live envelope exceeds the plan and a raise is
  // needed. Targets are idempotent: re-triggers during activation are folded
  // into the committed counts.
  std::optional<TunerDecision> observe_arrival(double t);

  // Scale-down evaluation; call periodically. Returns a decision only when
  // stabilization and lookback requirements hold and some count decreases.
  std::optional<TunerDecision> consider_scale_down(double now);

  const std::map<std::string, int>& committed() const { return committed_; }
  const TunerState& state() const { return state_; }
  // Max rate over trailing subwindows; nullopt without full lookback history.
  std::optional<double> recent_max_rate(double now) const;

 private:
  TunerState state_;
  std::map<std::string, int> committed_;
  double last_change_ = 0.0;
  bool changed_once_ = false;
  double start_time_ = 0.0;
  bool saw_arrival_ = false;

  std::deque<double> recent_;   // arrivals within the largest retained horizon
  uint64_t base_ = 0;           // absolute index of recent_.front()
  uint64_t total_ = 0;          // arrivals observed
  std::vector<uint64_t> left_;  // per-window left edge (absolute index)
};

}  // namespace inferline
