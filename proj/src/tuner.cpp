#include "inferline/tuner.hpp"

#include <algorithm>
#include <cmath>

namespace inferline {

namespace {

// ceil with an absolute guard so replica targets are stable against the
// rounding noise of ratios that are exact integers in real arithmetic.
int ceil_replicas(double x) {
  double c = std::ceil(x - 1e-9);
  if (c < 0.0) c = 0.0;
  return static_cast<int>(c);
}

constexpr double kLadderCap = 60.0;

}  // namespace

std::vector<double> envelope_ladder(double service_time_s) {
  if (!(service_time_s > 0.0)) throw ValidationError("service time must be positive");
  std::vector<double> windows;
  for (double w = service_time_s; w <= kLadderCap; w *= 2.0) windows.push_back(w);
  if (windows.empty()) windows.push_back(service_time_s);
  return windows;
}

TrafficEnvelope build_envelope(const std::vector<double>& arrivals, double service_time_s) {
  TrafficEnvelope env;
  env.windows = envelope_ladder(service_time_s);
  env.counts.assign(env.windows.size(), 0);
  for (size_t i = 0; i < env.windows.size(); ++i) {
    const double w = env.windows[i];
    size_t left = 0;
    uint64_t best = 0;
    for (size_t n = 0; n < arrivals.size(); ++n) {
      while (arrivals[n] - arrivals[left] > w) ++left;
      best = std::max<uint64_t>(best, n - left + 1);
    }
    env.counts[i] = best;
  }
  return env;
}

TrafficEnvelope build_envelope(const ArrivalTrace& trace, double service_time_s) {
  return build_envelope(trace.arrivals, service_time_s);
}

std::optional<UpTrigger> detect(const TrafficEnvelope& live, const TrafficEnvelope& plan) {
  if (live.windows != plan.windows)
    throw ConfigError("traffic envelopes have mismatched window ladders");
  UpTrigger trig;
  for (size_t i = 0; i < live.size(); ++i) {
    if (live.counts[i] > plan.counts[i]) {
      trig.violating.push_back(i);
      double r = live.rate(i);
      if (r > trig.peak_rate) {
        trig.peak_rate = r;
        trig.window_s = live.windows[i];
      }
    }
  }
  if (trig.violating.empty()) return std::nullopt;
  return trig;
}

TunerState make_tuner_state(const PipelineSpec& spec, const PipelineConfig& config,
                            const ProfileSet& profiles, const ArrivalTrace& plan_trace) {
  TunerState state;
  const double t_s = service_time(config, profiles, spec);
  state.plan_envelope = build_envelope(plan_trace, t_s);
  state.plan_rate_qps = compute_stats(plan_trace).lambda;
  state.min_provision_ratio = 1.0;
  for (const auto& stage : spec.stages()) {
    const StageConfig& sc = config.stages.at(stage);
    StageTunables st;
    st.unit_throughput_qps =
        profiles.at(stage).entry(sc.hardware_id, sc.max_batch_size).throughput_qps;
    st.scale_factor = spec.scale(stage);
    if (st.scale_factor > 0.0) {
      double load = state.plan_rate_qps * st.scale_factor;
      double cap = static_cast<double>(sc.replicas) * st.unit_throughput_qps;
      st.provision_ratio = std::min(1.0, load / cap);
      state.min_provision_ratio = std::min(state.min_provision_ratio, st.provision_ratio);
    } else {
      st.provision_ratio = 1.0;  // unvisited stage; excluded from the minimum
    }
    state.stages[stage] = st;
  }
  return state;
}

std::map<std::string, int> scale_up_targets(const TunerState& state, double peak_rate,
                                            const std::map<std::string, int>& current) {
  if (!(peak_rate > 0.0)) throw ValidationError("scale-up rate must be positive");
  std::map<std::string, int> targets;
  for (const auto& [stage, st] : state.stages) {
    int needed = ceil_replicas(peak_rate * st.scale_factor /
                               (st.unit_throughput_qps * st.provision_ratio));
    int cur = current.at(stage);
    targets[stage] = std::max(cur, std::max(1, needed));
  }
  return targets;
}

std::map<std::string, int> scale_down_targets(const TunerState& state, double new_rate,
                                              const std::map<std::string, int>& current) {
  if (!(new_rate >= 0.0)) throw ValidationError("scale-down rate must be nonnegative");
  std::map<std::string, int> targets;
  for (const auto& [stage, st] : state.stages) {
    int needed = ceil_replicas(new_rate * st.scale_factor /
                               (st.unit_throughput_qps * state.min_provision_ratio));
    int cur = current.at(stage);
    targets[stage] = std::min(cur, std::max(1, needed));
  }
  return targets;
}

TunerSession::TunerSession(TunerState state, std::map<std::string, int> initial_counts)
    : state_(std::move(state)), committed_(std::move(initial_counts)) {
  for (const auto& [stage, _] : state_.stages)
    if (!committed_.count(stage))
      throw ConfigError("tuner session missing initial count for stage " + stage);
  left_.assign(state_.plan_envelope.size(), 0);
}

std::optional<TunerDecision> TunerSession::observe_arrival(double t) {
  saw_arrival_ = true;
  recent_.push_back(t);
  const uint64_t n = total_++;

  const auto& windows = state_.plan_envelope.windows;
  UpTrigger trig;
  for (size_t i = 0; i < windows.size(); ++i) {
    while (t - recent_[static_cast<size_t>(left_[i] - base_)] > windows[i]) ++left_[i];
    uint64_t count = n - left_[i] + 1;
    if (count > state_.plan_envelope.counts[i]) {
      trig.violating.push_back(i);
      double r = static_cast<double>(count) / windows[i];
      if (r > trig.peak_rate) {
        trig.peak_rate = r;
        trig.window_s = windows[i];
      }
    }
  }

  // Drop history no window or the scale-down lookback can still reference.
  uint64_t min_left = left_.empty() ? n + 1 : *std::min_element(left_.begin(), left_.end());
  while (!recent_.empty() && base_ < min_left &&
         t - recent_.front() > state_.lookback_s + 1e-9) {
    recent_.pop_front();
    ++base_;
  }

  if (trig.violating.empty()) return std::nullopt;
  auto targets = scale_up_targets(state_, trig.peak_rate, committed_);
  bool raised = false;
  for (const auto& [stage, k] : targets)
    if (k > committed_.at(stage)) raised = true;
  if (!raised) return std::nullopt;

  committed_ = targets;
  last_change_ = t;
  changed_once_ = true;
  TunerDecision d;
  d.kind = TunerDecision::Kind::kScaleUp;
  d.time = t;
  d.peak_rate = trig.peak_rate;
  d.window_s = trig.window_s;
  d.targets = targets;
  return d;
}

std::optional<double> TunerSession::recent_max_rate(double now) const {
  if (now - start_time_ < state_.lookback_s) return std::nullopt;
  const int n_sub = static_cast<int>(std::round(state_.lookback_s / state_.subwindow_s));
  std::vector<uint64_t> counts(static_cast<size_t>(n_sub), 0);
  const double lo = now - state_.lookback_s;
  for (double a : recent_) {
    if (a <= lo || a > now) continue;
    int j = static_cast<int>((a - lo) / state_.subwindow_s);
    if (j >= n_sub) j = n_sub - 1;
    counts[static_cast<size_t>(j)]++;
  }
  uint64_t best = *std::max_element(counts.begin(), counts.end());
  return static_cast<double>(best) / state_.subwindow_s;
}

std::optional<TunerDecision> TunerSession::consider_scale_down(double now) {
  if (now - last_change_ < state_.stabilization_s) return std::nullopt;
  auto rate = recent_max_rate(now);
  if (!rate) return std::nullopt;

  auto targets = scale_down_targets(state_, *rate, committed_);
  bool lowered = false;
  for (const auto& [stage, k] : targets)
    if (k < committed_.at(stage)) lowered = true;
  if (!lowered) return std::nullopt;

  committed_ = targets;
  last_change_ = now;
  changed_once_ = true;
  TunerDecision d;
  d.kind = TunerDecision::Kind::kScaleDown;
  d.time = now;
  d.new_rate = *rate;
  d.targets = targets;
  return d;
}

}  // namespace inferline
