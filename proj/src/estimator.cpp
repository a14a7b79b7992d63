#include "inferline/estimator.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <deque>

namespace inferline {

struct SimEngine::Stage {
  std::string id;
  int capacity = 1;  // replicas allowed to take new batches
  int busy = 0;      // batches in flight (may exceed capacity while draining)
  int max_batch = 1;
  std::vector<double> latency_for_size;  // index 1..max_batch, ceil-profiled
  std::deque<std::pair<uint64_t, double>> queue;  // (query id, enqueue time)
  // Routing, resolved once at construction.
  std::vector<int> targets;  // outgoing edge targets as stage indices
  bool branch = false;
  size_t branch_index = 0;  // into trace path_choices rows
};

SimEngine::~SimEngine() = default;

SimEngine::SimEngine(const PipelineSpec& spec, const PipelineConfig& config,
                     const ProfileSet& profiles, const ArrivalTrace& trace,
                     EngineOptions options)
    : spec_(spec), trace_(trace), options_(options) {
  // Validate the configuration up front so errors surface before any event.
  const auto& order = spec.stages();
  if (!spec.branch_points().empty()) {
    if (trace.branch_points != spec.branch_points())
      throw TraceError("trace branch points do not match the pipeline spec");
    if (trace.path_choices.size() != trace.arrivals.size())
      throw TraceError("trace lacks path choices for this pipeline's branch points");
  }

  stages_.reserve(order.size());
  for (size_t i = 0; i < order.size(); ++i) stage_idx_[order[i]] = static_cast<int>(i);

  std::map<std::string, size_t> bp_index;
  for (size_t i = 0; i < spec.branch_points().size(); ++i)
    bp_index[spec.branch_points()[i]] = i;

  for (const auto& id : order) {
    auto it = config.stages.find(id);
    if (it == config.stages.end()) throw ConfigError("config missing stage " + id);
    const StageConfig& sc = it->second;
    if (sc.replicas < 1) throw ConfigError("stage " + id + ": replicas must be >= 1");
    if (!is_power_of_two(sc.max_batch_size))
      throw ConfigError("stage " + id + ": max batch size must be a power of two");
    const ModelProfile& profile = profiles.at(id);
    if (!profile.has(sc.hardware_id, sc.max_batch_size))
      throw ConfigError("stage " + id + ": (" + sc.hardware_id + ", batch " +
                        std::to_string(sc.max_batch_size) + ") is not profiled");
    Stage st;
    st.id = id;
    st.capacity = sc.replicas;
    st.max_batch = sc.max_batch_size;
    st.latency_for_size.resize(static_cast<size_t>(sc.max_batch_size) + 1, 0.0);
    for (int b = 1; b <= sc.max_batch_size; ++b)
      st.latency_for_size[static_cast<size_t>(b)] =
          profile.ceil_entry(sc.hardware_id, b).second.latency_s;
    st.targets.assign(spec.outgoing(id).size(), -1);  // filled below
    st.branch = spec.is_branch_point(id);
    if (st.branch) st.branch_index = bp_index.at(id);
    stages_.push_back(std::move(st));
  }
  for (size_t i = 0; i < order.size(); ++i) {
    const auto& out = spec.outgoing(order[i]);
    for (size_t j = 0; j < out.size(); ++j)
      stages_[i].targets[j] = stage_idx_.at(out[j].to);
  }

  for (const auto& id : order)
    timeline_[id].push_back({0.0, config.stages.at(id).replicas});

  records_.resize(trace.arrivals.size());
  const int entry = stage_idx_.at(spec.entry());
  for (size_t q = 0; q < trace.arrivals.size(); ++q) {
    records_[q].id = q;
    records_[q].arrival = trace.arrivals[q];
    push_event(trace.arrivals[q], EventKind::kStageArrival, entry, q);
  }

  if (options_.policy && options_.policy->timer_period() > 0.0 && !trace.arrivals.empty()) {
    double period = options_.policy->timer_period();
    for (double t = period; t <= trace.arrivals.back(); t += period)
      push_event(t, EventKind::kControl, -1, 0);  // a == -1 marks a timer
  }
}

void SimEngine::push_event(double t, EventKind kind, int a, uint64_t b) {
  events_.push(Event{t, static_cast<int>(kind), seq_++, a, b});
}

int SimEngine::stage_index(const std::string& id) const {
  auto it = stage_idx_.find(id);
  if (it == stage_idx_.end()) throw ConfigError("unknown stage: " + id);
  return it->second;
}

int SimEngine::capacity(const std::string& stage) const {
  return stages_[static_cast<size_t>(stage_index(stage))].capacity;
}

void SimEngine::add_replicas(const std::string& stage, int n) {
  if (n <= 0) throw ConfigError("add_replicas: count must be positive");
  int idx = stage_index(stage);
  activations_.push_back({idx, n});
  push_event(now_ + options_.activation_delay_s, EventKind::kControl,
             static_cast<int>(activations_.size() - 1) + static_cast<int>(stages_.size()), 0);
}

void SimEngine::remove_replicas(const std::string& stage, int n) {
  if (n <= 0) throw ConfigError("remove_replicas: count must be positive");
  int idx = stage_index(stage);
  Stage& st = stages_[static_cast<size_t>(idx)];
  if (st.capacity - n < 1)
    throw ConfigError("remove_replicas: stage " + stage + " would drop below 1 replica");
  st.capacity -= n;
  timeline_[st.id].push_back({now_, st.capacity});
  if (options_.keep_log) {
    LogEvent ev;
    ev.time = now_;
    ev.kind = EventKind::kControl;
    ev.stage = st.id;
    ev.capacity_delta = -n;
    log_.push_back(std::move(ev));
  }
}

void SimEngine::route_downstream(uint64_t query, int stage_idx) {
  const Stage& st = stages_[static_cast<size_t>(stage_idx)];
  if (st.targets.empty()) {
    finish_query(query);
    return;
  }
  int choice = 0;
  if (st.branch) {
    choice = trace_.path_choices[query][st.branch_index];
    if (choice == PipelineSpec::kExitChoice) {
      finish_query(query);
      return;
    }
  }
  push_event(now_, EventKind::kStageArrival, st.targets[static_cast<size_t>(choice)], query);
}

void SimEngine::finish_query(uint64_t query) {
  records_[query].latency = now_ - records_[query].arrival;
}

void SimEngine::dispatch(int stage_idx) {
  Stage& st = stages_[static_cast<size_t>(stage_idx)];
  while (st.busy < st.capacity && !st.queue.empty()) {
    int size = static_cast<int>(std::min<size_t>(st.queue.size(),
                                                 static_cast<size_t>(st.max_batch)));
    Batch batch;
    batch.stage = stage_idx;
    batch.formed_size = size;
    batch.members.reserve(static_cast<size_t>(size));
    for (int i = 0; i < size; ++i) {
      auto [q, enq] = st.queue.front();
      st.queue.pop_front();
      batch.members.push_back(q);
      records_[q].stages[st.id].dequeue = now_;
    }
    double lat = st.latency_for_size[static_cast<size_t>(size)];
    st.busy++;
    batches_.push_back(std::move(batch));
    int batch_id = static_cast<int>(batches_.size() - 1);
    push_event(now_ + lat, EventKind::kBatchComplete, batch_id, 0);
    if (options_.keep_log) {
      LogEvent ev;
      ev.time = now_;
      ev.kind = EventKind::kDispatch;
      ev.stage = st.id;
      ev.queries = batches_.back().members;
      ev.batch_size = size;
      log_.push_back(std::move(ev));
    }
  }
  // Work conservation: after a dispatch pass the stage is either saturated
  // or its queue is empty.
  assert(st.busy >= st.capacity || st.queue.empty());
}

void SimEngine::complete_batch(int batch_id) {
  const Batch& batch = batches_[static_cast<size_t>(batch_id)];
  Stage& st = stages_[static_cast<size_t>(batch.stage)];
  if (options_.keep_log) {
    LogEvent ev;
    ev.time = now_;
    ev.kind = EventKind::kBatchComplete;
    ev.stage = st.id;
    ev.queries = batch.members;
    ev.batch_size = batch.formed_size;
    log_.push_back(std::move(ev));
  }
  for (uint64_t q : batch.members) {
    records_[q].stages[st.id].complete = now_;
    route_downstream(q, batch.stage);
  }
  st.busy--;
  if (st.busy < st.capacity)
    push_event(now_, EventKind::kDispatch, batch.stage, 0);
}

SimResult SimEngine::run() {
  if (ran_) throw ConfigError("SimEngine::run may only be called once");
  ran_ = true;
  while (!events_.empty()) {
    Event ev = events_.top();
    events_.pop();
    now_ = ev.time;
    switch (static_cast<EventKind>(ev.kind)) {
      case EventKind::kBatchComplete:
        complete_batch(ev.a);
        break;
      case EventKind::kStageArrival: {
        Stage& st = stages_[static_cast<size_t>(ev.a)];
        st.queue.emplace_back(ev.b, now_);
        records_[ev.b].stages[st.id].enqueue = now_;
        if (options_.keep_log) {
          LogEvent lev;
          lev.time = now_;
          lev.kind = EventKind::kStageArrival;
          lev.stage = st.id;
          lev.queries = {ev.b};
          log_.push_back(std::move(lev));
        }
        if (options_.policy) options_.policy->on_stage_arrival(*this, now_, st.id);
        push_event(now_, EventKind::kDispatch, ev.a, 0);
        break;
      }
      case EventKind::kControl: {
        if (ev.a == -1) {
          if (options_.policy) options_.policy->on_timer(*this, now_);
        } else {
          const PendingActivation& act =
              activations_[static_cast<size_t>(ev.a) - stages_.size()];
          Stage& st = stages_[static_cast<size_t>(act.stage)];
          st.capacity += act.count;
          timeline_[st.id].push_back({now_, st.capacity});
          if (options_.keep_log) {
            LogEvent lev;
            lev.time = now_;
            lev.kind = EventKind::kControl;
            lev.stage = st.id;
            lev.capacity_delta = act.count;
            log_.push_back(std::move(lev));
          }
          push_event(now_, EventKind::kDispatch, act.stage, 0);
        }
        break;
      }
      case EventKind::kDispatch:
        dispatch(ev.a);
        break;
    }
  }
  SimResult result;
  result.records = std::move(records_);
  result.log = std::move(log_);
  result.end_time = now_;
  return result;
}

SimResult simulate(const PipelineSpec& spec, const PipelineConfig& config,
                   const ProfileSet& profiles, const ArrivalTrace& trace, bool keep_log) {
  EngineOptions options;
  options.keep_log = keep_log;
  SimEngine engine(spec, config, profiles, trace, options);
  return engine.run();
}

double percentile_nearest_rank(std::vector<double> values, double p) {
  if (values.empty()) throw ValidationError("percentile of empty sample");
  if (!(p > 0.0 && p < 1.0)) throw ValidationError("percentile must be in (0, 1)");
  std::sort(values.begin(), values.end());
  size_t rank = static_cast<size_t>(std::floor(p * static_cast<double>(values.size()))) + 1;
  if (rank > values.size()) rank = values.size();
  return values[rank - 1];
}

std::vector<double> latencies_of(const SimResult& result) {
  std::vector<double> out;
  out.reserve(result.records.size());
  for (const auto& r : result.records) out.push_back(r.latency);
  return out;
}

FeasibilityResult feasible(const PipelineSpec& spec, const PipelineConfig& config,
                           const ProfileSet& profiles, const ArrivalTrace& trace, double slo) {
  if (trace.arrivals.empty()) throw ValidationError("feasibility needs a nonempty trace");
  if (!(slo > 0.0)) throw ValidationError("slo must be positive");
  SimResult result = simulate(spec, config, profiles, trace);
  FeasibilityResult fr;
  fr.p99 = percentile_nearest_rank(latencies_of(result), 0.99);
  fr.feasible = fr.p99 <= slo;
  return fr;
}

}  // namespace inferline
