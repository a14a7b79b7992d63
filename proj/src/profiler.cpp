#include "inferline/profiler.hpp"

#include <algorithm>
#include <cmath>

namespace inferline {

AffineLatency ExecutorModel::params_for(const std::string& hardware_id) const {
  auto it = per_hardware.find(hardware_id);
  if (it != per_hardware.end()) return it->second;
  AffineLatency p = base;
  if (parallelizable) {
    auto sp = speedup.find(hardware_id);
    if (sp != speedup.end()) {
      if (!(sp->second > 0.0))
        throw ProfileError("executor " + model_id + ": speedup must be positive");
      p.beta /= sp->second;
    }
  }
  return p;
}

double ExecutorModel::batch_latency(const std::string& hardware_id, int batch) const {
  if (batch < 1 || batch > max_batch)
    throw ProfileError("executor " + model_id + ": batch " + std::to_string(batch) +
                       " exceeds configured maximum " + std::to_string(max_batch));
  AffineLatency p = params_for(hardware_id);
  return p.alpha + p.beta * static_cast<double>(batch);
}

void ExecutorModel::validate() const {
  if (model_id.empty()) throw ProfileError("executor model_id must be nonempty");
  if (max_batch < 1) throw ProfileError("executor " + model_id + ": max_batch must be >= 1");
  auto check = [&](const AffineLatency& p) {
    if (!(p.alpha >= 0.0)) throw ProfileError("executor " + model_id + ": alpha must be >= 0");
    if (!(p.beta > 0.0)) throw ProfileError("executor " + model_id + ": beta must be > 0");
  };
  check(base);
  for (const auto& [hw, p] : per_hardware) check(p);
}

std::map<int, ProfileEntry> profile_model(const ExecutorModel& executor,
                                          const HardwareType& hardware,
                                          const std::vector<int>& batch_sizes,
                                          const ArrivalTrace& sample) {
  executor.validate();
  if (batch_sizes.empty()) throw ProfileError("batch_sizes must be nonempty");
  if (sample.arrivals.empty()) throw ProfileError("profiling sample must be nonempty");
  std::map<int, ProfileEntry> out;
  for (int b : batch_sizes) {
    if (!is_power_of_two(b))
      throw ProfileError("batch sizes must be powers of two, got " + std::to_string(b));
    double lat = executor.batch_latency(hardware.id, b);
    // Feed the sample through the executor in full batches and time the run.
    uint64_t full_batches = sample.arrivals.size() / static_cast<uint64_t>(b);
    if (full_batches == 0) full_batches = 1;
    double elapsed = static_cast<double>(full_batches) * lat;
    double processed = static_cast<double>(full_batches) * static_cast<double>(b);
    ProfileEntry e;
    e.throughput_qps = processed / elapsed;
    e.latency_s = lat;
    out[b] = e;
  }
  return out;
}

ScaleFactorReport estimate_scale_factors(const PipelineSpec& spec, const ArrivalTrace& sample) {
  if (sample.arrivals.size() < 1000)
    throw ValidationError("scale factor estimation needs >= 1000 sample queries");
  if (!sample.branch_points.empty() && sample.branch_points != spec.branch_points())
    throw TraceError("trace branch points do not match the pipeline spec");
  if (!spec.branch_points().empty() && sample.path_choices.size() != sample.arrivals.size())
    throw TraceError("trace lacks path choices for this pipeline's branch points");

  std::map<std::string, uint64_t> visits;
  for (const auto& s : spec.stages()) visits[s] = 0;

  std::map<std::string, size_t> bp_index;
  for (size_t i = 0; i < spec.branch_points().size(); ++i)
    bp_index[spec.branch_points()[i]] = i;

  const uint64_t total = sample.arrivals.size();
  for (size_t q = 0; q < total; ++q) {
    std::string at = spec.entry();
    for (;;) {
      visits[at]++;
      const auto& out = spec.outgoing(at);
      if (out.empty()) break;
      if (spec.is_branch_point(at)) {
        int choice = sample.path_choices[q][bp_index[at]];
        if (choice == PipelineSpec::kExitChoice) break;
        at = out[static_cast<size_t>(choice)].to;
      } else {
        at = out.front().to;
      }
    }
  }

  ScaleFactorReport report;
  for (const auto& s : spec.stages()) {
    ScaleEstimate e;
    e.visits = visits[s];
    e.total = total;
    e.scale = static_cast<double>(e.visits) / static_cast<double>(total);
    e.stderr_ = std::sqrt(std::max(0.0, e.scale * (1.0 - e.scale) / static_cast<double>(total)));
    if (e.visits == 0)
      report.warnings.push_back("stage " + s + " was never visited; scale factor 0");
    report.by_model[s] = e;
  }
  return report;
}

ProfileSet build_profiles(const std::vector<ExecutorModel>& executors,
                          const HardwareCatalog& catalog, const PipelineSpec& spec,
                          const ArrivalTrace& sample, std::vector<std::string>* warnings) {
  std::map<std::string, const ExecutorModel*> by_id;
  for (const auto& e : executors) {
    e.validate();
    if (!by_id.emplace(e.model_id, &e).second)
      throw ProfileError("duplicate executor for model " + e.model_id);
  }
  for (const auto& s : spec.stages())
    if (!by_id.count(s)) throw ProfileError("no executor for pipeline stage " + s);

  ScaleFactorReport scales = estimate_scale_factors(spec, sample);
  if (warnings)
    warnings->insert(warnings->end(), scales.warnings.begin(), scales.warnings.end());

  ProfileSet set;
  for (const auto& s : spec.stages()) {
    const ExecutorModel& ex = *by_id.at(s);
    ModelProfile profile;
    profile.model_id = s;
    profile.scale_factor = scales.by_model.at(s).scale;
    profile.scale_factor_stderr = scales.by_model.at(s).stderr_;
    std::vector<int> batches;
    for (int b = 1; b <= ex.max_batch; b *= 2) batches.push_back(b);
    for (const auto& hw : catalog.items())
      profile.entries[hw.id] = profile_model(ex, hw, batches, sample);
    profile.validate();
    set.by_model[s] = std::move(profile);
  }
  return set;
}

}  // namespace inferline
