#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "inferline/core.hpp"

namespace inferline {

// Timestamped query arrivals with pre-sampled routing choices so downstream
// simulation is a deterministic replay.
struct ArrivalTrace {
  std::vector<double> arrivals;  // seconds, strictly increasing
  // One vector per query, aligned with branch_points; entries are indices
  // into the branch stage's outgoing edge list, or kExitChoice. Empty when
  // generated without a pipeline spec.
  std::vector<std::vector<int>> path_choices;
  std::vector<std::string> branch_points;
  uint64_t seed = 0;
  double lambda_meta = 0.0;
  double cv_meta = 0.0;

  size_t size() const { return arrivals.size(); }
  double duration() const { return arrivals.empty() ? 0.0 : arrivals.back(); }
  void validate() const;
};

struct WorkloadStats {
  double lambda = 0.0;             // 1 / mean inter-arrival
  double mean_interarrival = 0.0;  // seconds
  double sigma = 0.0;              // population std dev of inter-arrivals
  double cv = 0.0;                 // sigma^2 / mean^2
};

// Gamma inter-arrivals with shape 1/cv and scale cv/lambda, so the mean rate
// is lambda and the burstiness measure sigma^2/mu^2 equals cv. When a spec is
// given, routing choices are pre-sampled for every branch point of every
// query from an independent stream of the same seed.
ArrivalTrace generate_gamma_trace(double lambda, double cv, double duration, uint64_t seed,
                                  const PipelineSpec* spec = nullptr);

struct WorkloadSegment {
  double lambda = 0.0;
  double cv = 1.0;
  double hold = 0.0;  // seconds at these parameters
};

// Piecewise-stationary trace; lambda and cv interpolate linearly over each
// transition window between segments.
ArrivalTrace generate_varying_trace(const std::vector<WorkloadSegment>& segments,
                                    double transition, uint64_t seed,
                                    const PipelineSpec* spec = nullptr);

WorkloadStats compute_stats(const ArrivalTrace& trace);

void write_trace(const ArrivalTrace& trace, std::ostream& out);
ArrivalTrace read_trace(std::istream& in);
void write_trace_file(const ArrivalTrace& trace, const std::string& path);
ArrivalTrace read_trace_file(const std::string& path);

}  // namespace inferline
