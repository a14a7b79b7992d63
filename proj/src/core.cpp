#include "inferline/core.hpp"

#include <algorithm>
#include <cmath>
#include <queue>
#include <set>

namespace inferline {

namespace {
constexpr double kProbTol = 1e-9;
}

bool is_power_of_two(int v) { return v > 0 && (v & (v - 1)) == 0; }

HardwareCatalog::HardwareCatalog(std::vector<HardwareType> items) : items_(std::move(items)) {
  std::sort(items_.begin(), items_.end(),
            [](const HardwareType& a, const HardwareType& b) { return a.id < b.id; });
  std::set<std::string> ids;
  std::set<int> ranks;
  for (const auto& hw : items_) {
    if (hw.id.empty()) throw CatalogError("hardware id must be nonempty");
    if (!ids.insert(hw.id).second) throw CatalogError("duplicate hardware id: " + hw.id);
    if (hw.cost_per_hour < 0.0)
      throw CatalogError("hardware " + hw.id + ": cost_per_hour must be nonnegative");
    if (!ranks.insert(hw.latency_rank).second)
      throw CatalogError("hardware " + hw.id +
                         ": latency_rank must induce a strict total order");
  }
}

const HardwareType* HardwareCatalog::find(const std::string& id) const {
  auto it = std::lower_bound(
      items_.begin(), items_.end(), id,
      [](const HardwareType& hw, const std::string& key) { return hw.id < key; });
  if (it == items_.end() || it->id != id) return nullptr;
  return &*it;
}

const HardwareType& HardwareCatalog::at(const std::string& id) const {
  const HardwareType* hw = find(id);
  if (!hw) throw CatalogError("unknown hardware id: " + id);
  return *hw;
}

void ModelProfile::validate() const {
  if (model_id.empty()) throw ProfileError("profile model_id must be nonempty");
  if (!(scale_factor >= 0.0 && scale_factor <= 1.0 + kProbTol))
    throw ProfileError("profile " + model_id + ": scale factor must be in [0, 1]");
  for (const auto& [hw, table] : entries) {
    if (table.empty()) throw ProfileError("profile " + model_id + ": empty table for " + hw);
    double prev_mu = 0.0;
    double prev_lat = 0.0;
    for (const auto& [batch, e] : table) {
      if (!is_power_of_two(batch))
        throw ProfileError("profile " + model_id + ": batch sizes must be powers of two");
      if (!(e.throughput_qps > 0.0) || !(e.latency_s > 0.0))
        throw ProfileError("profile " + model_id + ": throughput and latency must be positive");
      if (e.throughput_qps + kProbTol < prev_mu)
        throw ProfileError("profile " + model_id + " on " + hw +
                           ": throughput must be nondecreasing in batch size");
      if (e.latency_s + kProbTol < prev_lat)
        throw ProfileError("profile " + model_id + " on " + hw +
                           ": latency must be nondecreasing in batch size");
      double implied = static_cast<double>(batch) / e.throughput_qps;
      if (std::abs(implied - e.latency_s) > 1e-9)
        throw ProfileError("profile " + model_id + " on " + hw +
                           ": latency and throughput disagree at batch " +
                           std::to_string(batch));
      prev_mu = e.throughput_qps;
      prev_lat = e.latency_s;
    }
  }
}

bool ModelProfile::has(const std::string& hardware, int batch) const {
  auto it = entries.find(hardware);
  return it != entries.end() && it->second.count(batch) > 0;
}

const ProfileEntry& ModelProfile::entry(const std::string& hardware, int batch) const {
  auto it = entries.find(hardware);
  if (it == entries.end())
    throw ProfileError("profile " + model_id + ": no entries for hardware " + hardware);
  auto jt = it->second.find(batch);
  if (jt == it->second.end())
    throw ProfileError("profile " + model_id + " on " + hardware + ": batch " +
                       std::to_string(batch) + " not profiled");
  return jt->second;
}

std::pair<int, ProfileEntry> ModelProfile::ceil_entry(const std::string& hardware,
                                                      int size) const {
  auto it = entries.find(hardware);
  if (it == entries.end())
    throw ProfileError("profile " + model_id + ": no entries for hardware " + hardware);
  auto jt = it->second.lower_bound(size);
  if (jt == it->second.end())
    throw ProfileError("profile " + model_id + " on " + hardware +
                       ": no profiled batch >= " + std::to_string(size));
  return {jt->first, jt->second};
}

std::vector<int> ModelProfile::batches(const std::string& hardware) const {
  std::vector<int> out;
  auto it = entries.find(hardware);
  if (it == entries.end()) return out;
  for (const auto& [b, _] : it->second) out.push_back(b);
  return out;
}

std::vector<std::string> ModelProfile::hardware_ids() const {
  std::vector<std::string> out;
  for (const auto& [hw, _] : entries) out.push_back(hw);
  return out;
}

const ModelProfile& ProfileSet::at(const std::string& model_id) const {
  auto it = by_model.find(model_id);
  if (it == by_model.end()) throw ProfileError("no profile for model " + model_id);
  return it->second;
}

void ProfileSet::validate() const {
  for (const auto& [id, p] : by_model) {
    if (id != p.model_id) throw ProfileError("profile key/model_id mismatch for " + id);
    p.validate();
  }
}

PipelineSpec::PipelineSpec(std::vector<std::string> stages, std::vector<Edge> edges)
    : edges_(std::move(edges)) {
  if (stages.empty()) throw ValidationError("pipeline must have at least one stage");
  std::set<std::string> stage_set;
  for (const auto& s : stages) {
    if (s.empty()) throw ValidationError("stage ids must be nonempty");
    if (!stage_set.insert(s).second) throw ValidationError("duplicate stage id: " + s);
  }

  std::map<std::string, int> indegree;
  for (const auto& s : stages) {
    outgoing_[s] = {};
    indegree[s] = 0;
  }
  for (const auto& e : edges_) {
    if (!stage_set.count(e.from)) throw ValidationError("edge from unknown stage " + e.from);
    if (!stage_set.count(e.to)) throw ValidationError("edge to unknown stage " + e.to);
    if (e.from == e.to) throw ValidationError("self edge at " + e.from);
    if (!(e.probability >= 0.0 && e.probability <= 1.0 + kProbTol))
      throw ValidationError("edge " + e.from + "->" + e.to +
                            ": probability must be in [0, 1]");
    outgoing_[e.from].push_back(e);
    indegree[e.to]++;
  }
  for (auto& [stage, out] : outgoing_) {
    std::sort(out.begin(), out.end(),
              [](const Edge& a, const Edge& b) { return a.to < b.to; });
    for (size_t i = 1; i < out.size(); ++i)
      if (out[i].to == out[i - 1].to)
        throw ValidationError("duplicate edge " + stage + "->" + out[i].to);
    double total = 0.0;
    for (const auto& e : out) total += e.probability;
    if (total > 1.0 + kProbTol)
      throw ValidationError("outgoing probabilities at " + stage + " exceed 1");
  }

  std::vector<std::string> roots;
  for (const auto& [s, d] : indegree)
    if (d == 0) roots.push_back(s);
  if (roots.size() != 1)
    throw ValidationError("pipeline must have exactly one entry stage, found " +
                          std::to_string(roots.size()));
  entry_ = roots.front();

  // Kahn topological order, lexical tie-break for a canonical stage order.
  std::priority_queue<std::string, std::vector<std::string>, std::greater<>> ready;
  ready.push(entry_);
  std::map<std::string, int> remaining = indegree;
  while (!ready.empty()) {
    std::string s = ready.top();
    ready.pop();
    order_.push_back(s);
    for (const auto& e : outgoing_[s])
      if (--remaining[e.to] == 0) ready.push(e.to);
  }
  if (order_.size() != stages.size()) throw ValidationError("pipeline graph has a cycle");

  scale_[entry_] = 1.0;
  for (const auto& s : order_) {
    double sv = scale_[s];
    for (const auto& e : outgoing_[s]) scale_[e.to] += sv * e.probability;
  }
  for (auto& [s, v] : scale_) v = std::min(v, 1.0);

  for (const auto& s : order_) {
    const auto& out = outgoing_[s];
    double total = 0.0;
    for (const auto& e : out) total += e.probability;
    if (out.size() >= 2 || (out.size() == 1 && total < 1.0 - kProbTol))
      branch_points_.push_back(s);
  }
  std::sort(branch_points_.begin(), branch_points_.end());
}

bool PipelineSpec::has_stage(const std::string& id) const { return outgoing_.count(id) > 0; }

const std::vector<Edge>& PipelineSpec::outgoing(const std::string& stage) const {
  auto it = outgoing_.find(stage);
  if (it == outgoing_.end()) throw ValidationError("unknown stage: " + stage);
  return it->second;
}

bool PipelineSpec::is_branch_point(const std::string& stage) const {
  return std::binary_search(branch_points_.begin(), branch_points_.end(), stage);
}

double PipelineSpec::scale(const std::string& stage) const {
  auto it = scale_.find(stage);
  if (it == scale_.end()) throw ValidationError("unknown stage: " + stage);
  return it->second;
}

double config_cost(const PipelineConfig& config, const HardwareCatalog& catalog) {
  if (config.stages.empty()) throw ValidationError("empty pipeline");
  double total = 0.0;
  for (const auto& [id, sc] : config.stages) {
    if (sc.replicas < 1)
      throw ConfigError("stage " + id + ": replicas must be >= 1");
    total += static_cast<double>(sc.replicas) * catalog.at(sc.hardware_id).cost_per_hour;
  }
  return total;
}

double service_time(const PipelineConfig& config, const ProfileSet& profiles,
                    const PipelineSpec& spec) {
  std::map<std::string, double> stage_latency;
  for (const auto& s : spec.stages()) {
    auto it = config.stages.find(s);
    if (it == config.stages.end()) throw ConfigError("config missing stage " + s);
    const StageConfig& sc = it->second;
    stage_latency[s] =
        profiles.at(s).entry(sc.hardware_id, sc.max_batch_size).latency_s;
  }
  // Longest path from each stage to a leaf, in reverse topological order.
  std::map<std::string, double> longest;
  const auto& order = spec.stages();
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    double best_child = 0.0;
    for (const auto& e : spec.outgoing(*it))
      best_child = std::max(best_child, longest[e.to]);
    longest[*it] = stage_latency[*it] + best_child;
  }
  return longest[spec.entry()];
}

}  // namespace inferline
