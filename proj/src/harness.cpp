#include "inferline/harness.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>

namespace inferline {

const char* tuning_policy_name(TuningPolicy p) {
  switch (p) {
    case TuningPolicy::kNone:
      return "none";
    case TuningPolicy::kInferline:
      return "inferline";
    case TuningPolicy::kCg:
      return "cg";
  }
  return "unknown";
}

std::optional<TuningPolicy> tuning_policy_from_name(const std::string& name) {
  if (name == "none") return TuningPolicy::kNone;
  if (name == "inferline") return TuningPolicy::kInferline;
  if (name == "cg") return TuningPolicy::kCg;
  return std::nullopt;
}

double timeline_cost_dollars(const std::map<std::string, std::vector<SimEngine::CountChange>>&
                                 timeline,
                             const PipelineConfig& config, const HardwareCatalog& catalog,
                             double end_time) {
  double total = 0.0;
  for (const auto& [stage, changes] : timeline) {
    double price = catalog.at(config.stages.at(stage).hardware_id).cost_per_hour;
    for (size_t i = 0; i < changes.size(); ++i) {
      double seg_end = (i + 1 < changes.size()) ? changes[i + 1].time : end_time;
      double dur = std::max(0.0, std::min(seg_end, end_time) - changes[i].time);
      total += static_cast<double>(changes[i].count) * price * dur / 3600.0;
    }
  }
  return total;
}

namespace {

int ceil_positive(double x) {
  double c = std::ceil(x - 1e-9);
  return c < 1.0 ? 1 : static_cast<int>(c);
}

// Peak entry rate over sliding windows of the given width (closed intervals).
double peak_windowed_rate(const std::vector<double>& arrivals, double window) {
  if (arrivals.empty()) return 0.0;
  size_t left = 0;
  uint64_t best = 0;
  for (size_t n = 0; n < arrivals.size(); ++n) {
    while (arrivals[n] - arrivals[left] > window) ++left;
    best = std::max<uint64_t>(best, n - left + 1);
  }
  return static_cast<double>(best) / window;
}

class InferlinePolicy : public ReplayPolicy {
 public:
  InferlinePolicy(const TunerState& state, std::map<std::string, int> initial,
                  const std::string& entry)
      : session_(state, std::move(initial)), entry_(entry) {}

  void on_stage_arrival(SimEngine& engine, double t, const std::string& stage) override {
    if (stage != entry_) return;
    auto before = session_.committed();
    if (auto d = session_.observe_arrival(t)) {
      DecisionRecord rec;
      rec.time = t;
      rec.kind = "scale_up";
      rec.rate_qps = d->peak_rate;
      rec.window_s = d->window_s;
      rec.targets = d->targets;
      for (const auto& [s, k] : d->targets)
        if (k > before.at(s)) engine.add_replicas(s, k - before.at(s));
      decisions.push_back(std::move(rec));
    }
  }

  void on_timer(SimEngine& engine, double t) override {
    auto before = session_.committed();
    if (auto d = session_.consider_scale_down(t)) {
      DecisionRecord rec;
      rec.time = t;
      rec.kind = "scale_down";
      rec.rate_qps = d->new_rate;
      rec.targets = d->targets;
      for (const auto& [s, k] : d->targets)
        if (k < before.at(s)) engine.remove_replicas(s, before.at(s) - k);
      decisions.push_back(std::move(rec));
    }
  }

  double timer_period() const override { return 5.0; }

  const std::map<std::string, int>& committed() const { return session_.committed(); }

  std::vector<DecisionRecord> decisions;

 private:
  TunerSession session_;
  std::string entry_;
};

class CgPolicy : public ReplayPolicy {
 public:
  CgPolicy(const CgUnit& unit, const std::string& entry, std::vector<std::string> stages)
      : tuner_(unit), entry_(entry), stages_(std::move(stages)) {}

  void on_stage_arrival(SimEngine&, double t, const std::string& stage) override {
    if (stage == entry_) tuner_.observe_arrival(t);
  }

  void on_timer(SimEngine& engine, double t) override {
    int before = tuner_.units();
    if (auto d = tuner_.on_timer(t, stages_)) {
      int delta = tuner_.units() - before;
      for (const auto& s : stages_) {
        if (delta > 0) engine.add_replicas(s, delta);
        if (delta < 0) engine.remove_replicas(s, -delta);
      }
      decisions.push_back(std::move(*d));
    }
  }

  double timer_period() const override { return 5.0; }

  std::vector<DecisionRecord> decisions;

 private:
  CgTuner tuner_;
  std::string entry_;
  std::vector<std::string> stages_;
};

}  // namespace

std::variant<PipelineConfig, Infeasible> cg_provision(const PipelineSpec& spec,
                                                      const ProfileSet& profiles,
                                                      const HardwareCatalog& catalog,
                                                      const ArrivalTrace& trace, double slo,
                                                      CgMode mode, CgUnit* out_unit) {
  if (trace.arrivals.empty()) throw ValidationError("cg provisioning needs a nonempty trace");
  if (!(slo > 0.0)) throw ValidationError("slo must be positive");

  PipelineConfig unit_config;
  for (const auto& stage : spec.stages()) {
    StageConfig sc;
    sc.model_id = stage;
    sc.hardware_id = [&] {
      const ModelProfile& p = profiles.at(stage);
      const HardwareType* best = nullptr;
      for (const auto& hw_id : p.hardware_ids()) {
        const HardwareType& hw = catalog.at(hw_id);
        if (!best || hw.latency_rank < best->latency_rank) best = &hw;
      }
      if (!best) throw ProfileError("stage " + stage + " has no profiled hardware");
      return best->id;
    }();
    sc.max_batch_size = 1;
    sc.replicas = 1;
    unit_config.stages[stage] = sc;
  }

  // Largest uniform batch size profiled everywhere whose black-box service
  // time still fits the SLO.
  std::optional<int> chosen;
  for (int b = 1;; b *= 2) {
    bool available = true;
    for (const auto& stage : spec.stages()) {
      const StageConfig& sc = unit_config.stages.at(stage);
      if (!profiles.at(stage).has(sc.hardware_id, b)) {
        available = false;
        break;
      }
    }
    if (!available) break;
    PipelineConfig probe = unit_config;
    for (auto& [_, sc] : probe.stages) sc.max_batch_size = b;
    if (service_time(probe, profiles, spec) <= slo) chosen = b;
    if (b > (1 << 24)) break;
  }
  if (!chosen) {
    PipelineConfig probe = unit_config;
    return Infeasible{service_time(probe, profiles, spec),
                      "no uniform batch size fits the slo"};
  }
  for (auto& [_, sc] : unit_config.stages) sc.max_batch_size = *chosen;

  double unit_throughput = std::numeric_limits<double>::infinity();
  for (const auto& stage : spec.stages()) {
    double s = spec.scale(stage);
    if (s <= 0.0) continue;
    const StageConfig& sc = unit_config.stages.at(stage);
    double mu = profiles.at(stage).entry(sc.hardware_id, sc.max_batch_size).throughput_qps;
    unit_throughput = std::min(unit_throughput, mu / s);
  }

  double target_rate = mode == CgMode::kMean ? compute_stats(trace).lambda
                                             : peak_windowed_rate(trace.arrivals, slo);
  int units = ceil_positive(target_rate / unit_throughput);

  PipelineConfig config = unit_config;
  for (auto& [_, sc] : config.stages) sc.replicas = units;
  if (out_unit) {
    out_unit->units = units;
    out_unit->unit_throughput_qps = unit_throughput;
    out_unit->batch_size = *chosen;
  }
  return config;
}

CgTuner::CgTuner(CgUnit unit) : unit_(unit) {}

void CgTuner::observe_arrival(double t) {
  recent_.push_back(t);
  while (!recent_.empty() && t - recent_.front() > unit_.rate_window_s + 1e-9)
    recent_.pop_front();
}

std::optional<DecisionRecord> CgTuner::on_timer(double now,
                                                const std::vector<std::string>& stages) {
  double horizon = std::min(now, unit_.rate_window_s);
  if (!(horizon > 0.0)) return std::nullopt;
  uint64_t count = 0;
  for (double a : recent_)
    if (now - a <= unit_.rate_window_s && a <= now) ++count;
  double rate = static_cast<double>(count) / horizon;
  double capacity = static_cast<double>(unit_.units) * unit_.unit_throughput_qps;
  double utilization = rate / capacity;

  int next = unit_.units;
  const char* kind = nullptr;
  if (utilization > unit_.band_high) {
    next = ceil_positive(rate / (unit_.target_utilization * unit_.unit_throughput_qps));
    if (next > unit_.units) kind = "cg_scale_up";
  } else if (utilization < unit_.band_low && now - last_change_ >= unit_.stabilization_s) {
    next = ceil_positive(rate / (unit_.target_utilization * unit_.unit_throughput_qps));
    if (next < unit_.units) kind = "cg_scale_down";
  }
  if (!kind) return std::nullopt;

  unit_.units = next;
  last_change_ = now;
  DecisionRecord rec;
  rec.time = now;
  rec.kind = kind;
  rec.rate_qps = rate;
  for (const auto& s : stages) rec.targets[s] = next;
  return rec;
}

SimReport replay(const PipelineSpec& spec, const PipelineConfig& initial_config,
                 const ProfileSet& profiles, const HardwareCatalog& catalog,
                 const ArrivalTrace& trace, double slo, TuningPolicy policy,
                 const ReplayInputs& inputs, std::vector<QueryRecord>* out_records) {
  if (!(slo > 0.0)) throw ValidationError("slo must be positive");

  SimReport report;
  report.slo = slo;
  report.policy = tuning_policy_name(policy);
  for (const auto& [stage, sc] : initial_config.stages)
    report.initial_replicas[stage] = sc.replicas;
  report.final_replicas = report.initial_replicas;
  if (trace.arrivals.empty()) return report;

  std::unique_ptr<InferlinePolicy> il;
  std::unique_ptr<CgPolicy> cg;
  ReplayPolicy* hook = nullptr;
  switch (policy) {
    case TuningPolicy::kNone:
      break;
    case TuningPolicy::kInferline: {
      if (!inputs.tuner_state)
        throw ConfigError("policy inferline requires tuner state (planning trace)");
      std::map<std::string, int> initial;
      for (const auto& [stage, sc] : initial_config.stages) initial[stage] = sc.replicas;
      il = std::make_unique<InferlinePolicy>(*inputs.tuner_state, std::move(initial),
                                             spec.entry());
      hook = il.get();
      break;
    }
    case TuningPolicy::kCg: {
      if (!inputs.cg_unit)
        throw ConfigError("policy cg requires the coarse-grained unit description");
      cg = std::make_unique<CgPolicy>(*inputs.cg_unit, spec.entry(), spec.stages());
      hook = cg.get();
      break;
    }
  }

  EngineOptions options;
  options.policy = hook;
  SimEngine engine(spec, initial_config, profiles, trace, options);
  SimResult result = engine.run();

  report.num_queries = result.records.size();
  report.latencies = latencies_of(result);
  report.p50 = percentile_nearest_rank(report.latencies, 0.50);
  report.p99 = percentile_nearest_rank(report.latencies, 0.99);
  report.max_latency = *std::max_element(report.latencies.begin(), report.latencies.end());
  uint64_t missed = 0;
  for (double lat : report.latencies)
    if (lat > slo) ++missed;
  report.miss_rate = static_cast<double>(missed) / static_cast<double>(report.num_queries);
  report.duration_s = result.end_time;
  report.cost_dollars =
      timeline_cost_dollars(engine.timeline(), initial_config, catalog, result.end_time);
  for (const auto& [stage, changes] : engine.timeline())
    report.final_replicas[stage] = changes.back().count;
  if (il) report.decisions = std::move(il->decisions);
  if (cg) report.decisions = std::move(cg->decisions);
  if (out_records) *out_records = std::move(result.records);
  return report;
}

}  // namespace inferline
