#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "inferline/core.hpp"
#include "inferline/workload.hpp"

namespace inferline {

struct AffineLatency {
  double alpha = 0.0;  // fixed per-batch overhead, seconds
  double beta = 0.0;   // per-query cost, seconds
};

// Simulated single-replica model executor with batch latency alpha + beta*b.
// Hardware either carries explicit parameters or scales the base beta by a
// speedup factor; non-parallelizable executors get no beta reduction from
// any hardware.
struct ExecutorModel {
  std::string model_id;
  bool parallelizable = true;
  int max_batch = 64;
  AffineLatency base;
  std::map<std::string, AffineLatency> per_hardware;  // explicit overrides
  std::map<std::string, double> speedup;              // beta divisor when parallelizable

  AffineLatency params_for(const std::string& hardware_id) const;
  double batch_latency(const std::string& hardware_id, int batch) const;
  void validate() const;
};

// Timed simulated execution of the sample queries in full batches of each
// requested size on one hardware type.
std::map<int, ProfileEntry> profile_model(const ExecutorModel& executor,
                                          const HardwareType& hardware,
                                          const std::vector<int>& batch_sizes,
                                          const ArrivalTrace& sample);

struct ScaleEstimate {
  double scale = 0.0;
  double stderr_ = 0.0;  // binomial standard error
  uint64_t visits = 0;
  uint64_t total = 0;
};

struct ScaleFactorReport {
  std::map<std::string, ScaleEstimate> by_model;
  std::vector<std::string> warnings;
};

// Replays the trace's pre-sampled routing choices through the DAG and counts
// visit frequencies. Requires >= 1000 sample queries.
ScaleFactorReport estimate_scale_factors(const PipelineSpec& spec, const ArrivalTrace& sample);

// Full profiling pass: grid over every catalog hardware and power-of-two
// batch sizes up to each executor's max, plus scale factors from the sample.
ProfileSet build_profiles(const std::vector<ExecutorModel>& executors,
                          const HardwareCatalog& catalog, const PipelineSpec& spec,
                          const ArrivalTrace& sample, std::vector<std::string>* warnings = nullptr);

}  // namespace inferline
