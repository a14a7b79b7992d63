#pragma once

#include <map>
#include <string>
#include <vector>

#include "inferline/errors.hpp"

namespace inferline {

struct HardwareType {
  std::string id;
  double cost_per_hour = 0.0;  // dollars/hour per replica
  int latency_rank = 0;        // smaller = lower per-batch latency at every batch size
};

class HardwareCatalog {
 public:
  HardwareCatalog() = default;
  explicit HardwareCatalog(std::vector<HardwareType> items);

  const HardwareType& at(const std::string& id) const;
  const HardwareType* find(const std::string& id) const;
  const std::vector<HardwareType>& items() const { return items_; }

 private:
  std::vector<HardwareType> items_;  // sorted by id
};

struct ProfileEntry {
  double throughput_qps = 0.0;
  double latency_s = 0.0;  // per-batch latency at this batch size
};

// Per-(hardware, batch size) throughput/latency table for one model stage.
class ModelProfile {
 public:
  std::string model_id;
  double scale_factor = 1.0;
  double scale_factor_stderr = 0.0;
  // hardware id -> batch size -> entry; batch sizes are powers of two.
  std::map<std::string, std::map<int, ProfileEntry>> entries;

  void validate() const;

  bool has(const std::string& hardware, int batch) const;
  const ProfileEntry& entry(const std::string& hardware, int batch) const;
  // Smallest profiled batch >= size for this hardware (partial-batch lookup).
  std::pair<int, ProfileEntry> ceil_entry(const std::string& hardware, int size) const;
  std::vector<int> batches(const std::string& hardware) const;
  std::vector<std::string> hardware_ids() const;
};

struct ProfileSet {
  std::map<std::string, ModelProfile> by_model;

  const ModelProfile& at(const std::string& model_id) const;
  void validate() const;
};

struct Edge {
  std::string from;
  std::string to;
  double probability = 1.0;
};

// Stage DAG with per-edge traversal probabilities. Scale factors are derived
// from the edges (single source of truth), never stored independently.
class PipelineSpec {
 public:
  PipelineSpec() = default;
  PipelineSpec(std::vector<std::string> stages, std::vector<Edge> edges);

  const std::vector<std::string>& stages() const { return order_; }  // topological
  const std::vector<Edge>& edges() const { return edges_; }
  const std::string& entry() const { return entry_; }
  bool has_stage(const std::string& id) const;

  // Outgoing edges sorted by target id; choice indices refer to this order.
  const std::vector<Edge>& outgoing(const std::string& stage) const;
  // Stages where a query makes a routing choice (>= 2 outgoing edges, or a
  // single edge with probability < 1); sorted lexically.
  const std::vector<std::string>& branch_points() const { return branch_points_; }
  bool is_branch_point(const std::string& stage) const;

  // Probability that a query entering the pipeline visits this stage.
  double scale(const std::string& stage) const;

  static constexpr int kExitChoice = -1;

 private:
  std::vector<std::string> order_;
  std::vector<Edge> edges_;
  std::string entry_;
  std::map<std::string, std::vector<Edge>> outgoing_;
  std::vector<std::string> branch_points_;
  std::map<std::string, double> scale_;
};

struct StageConfig {
  std::string model_id;
  std::string hardware_id;
  int max_batch_size = 1;  // power of two, must be profiled
  int replicas = 1;

  bool operator==(const StageConfig& other) const = default;
};

struct PipelineConfig {
  std::map<std::string, StageConfig> stages;  // keyed by model_id
};

// Sum over stages of replicas x hardware cost. Throws on an empty pipeline or
// an unknown hardware id.
double config_cost(const PipelineConfig& config, const HardwareCatalog& catalog);

// Worst-case service time: max over entry-to-leaf paths of the sum of
// per-batch latencies at each stage's configured max batch size. Paths are
// unweighted (conditional stages count at full latency).
double service_time(const PipelineConfig& config, const ProfileSet& profiles,
                    const PipelineSpec& spec);

bool is_power_of_two(int v);

}  // namespace inferline
