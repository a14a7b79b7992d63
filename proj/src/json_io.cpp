#include "inferline/json_io.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace inferline {

using nlohmann::json;

namespace {

void require_fields(const json& j, std::initializer_list<const char*> fields,
                    const std::string& what) {
  if (!j.is_object()) throw ValidationError(what + ": expected a JSON object");
  for (const char* f : fields)
    if (!j.contains(f)) throw ValidationError(what + ": missing field '" + f + "'");
}

}  // namespace

HardwareCatalog catalog_from_json(const json& j) {
  require_fields(j, {"format_version", "hardware"}, "hardware catalog");
  std::vector<HardwareType> items;
  for (const auto& h : j.at("hardware")) {
    require_fields(h, {"id", "cost_per_hour", "latency_rank"}, "hardware entry");
    HardwareType hw;
    hw.id = h.at("id").get<std::string>();
    hw.cost_per_hour = h.at("cost_per_hour").get<double>();
    hw.latency_rank = h.at("latency_rank").get<int>();
    items.push_back(std::move(hw));
  }
  return HardwareCatalog(std::move(items));
}

json catalog_to_json(const HardwareCatalog& catalog) {
  json arr = json::array();
  for (const auto& hw : catalog.items())
    arr.push_back({{"id", hw.id},
                   {"cost_per_hour", hw.cost_per_hour},
                   {"latency_rank", hw.latency_rank}});
  return json{{"format_version", 1}, {"hardware", std::move(arr)}};
}

PipelineSpec spec_from_json(const json& j) {
  require_fields(j, {"format_version", "stages"}, "pipeline spec");
  std::vector<std::string> stages = j.at("stages").get<std::vector<std::string>>();
  std::vector<Edge> edges;
  if (j.contains("edges")) {
    for (const auto& e : j.at("edges")) {
      require_fields(e, {"from", "to"}, "pipeline edge");
      Edge edge;
      edge.from = e.at("from").get<std::string>();
      edge.to = e.at("to").get<std::string>();
      edge.probability = e.value("probability", 1.0);
      edges.push_back(std::move(edge));
    }
  }
  return PipelineSpec(std::move(stages), std::move(edges));
}

json spec_to_json(const PipelineSpec& spec) {
  json edges = json::array();
  for (const auto& e : spec.edges())
    edges.push_back({{"from", e.from}, {"to", e.to}, {"probability", e.probability}});
  return json{{"format_version", 1}, {"stages", spec.stages()}, {"edges", std::move(edges)}};
}

std::vector<ExecutorModel> executors_from_json(const json& j) {
  require_fields(j, {"format_version", "executors"}, "executors");
  std::vector<ExecutorModel> out;
  for (const auto& e : j.at("executors")) {
    require_fields(e, {"model_id", "base"}, "executor");
    ExecutorModel ex;
    ex.model_id = e.at("model_id").get<std::string>();
    ex.parallelizable = e.value("parallelizable", true);
    ex.max_batch = e.value("max_batch", 64);
    ex.base.alpha = e.at("base").value("alpha", 0.0);
    ex.base.beta = e.at("base").value("beta", 0.0);
    if (e.contains("hardware"))
      for (const auto& [hw, p] : e.at("hardware").items())
        ex.per_hardware[hw] = AffineLatency{p.value("alpha", 0.0), p.value("beta", 0.0)};
    if (e.contains("speedup"))
      for (const auto& [hw, f] : e.at("speedup").items())
        ex.speedup[hw] = f.get<double>();
    ex.validate();
    out.push_back(std::move(ex));
  }
  return out;
}

ProfileSet profiles_from_json(const json& j) {
  require_fields(j, {"format_version", "profiles"}, "profiles");
  ProfileSet set;
  for (const auto& p : j.at("profiles")) {
    require_fields(p, {"model_id", "entries"}, "profile");
    ModelProfile profile;
    profile.model_id = p.at("model_id").get<std::string>();
    profile.scale_factor = p.value("scale_factor", 1.0);
    profile.scale_factor_stderr = p.value("scale_factor_stderr", 0.0);
    for (const auto& e : p.at("entries")) {
      require_fields(e, {"hardware", "batch", "throughput_qps", "latency_s"}, "profile entry");
      profile.entries[e.at("hardware").get<std::string>()][e.at("batch").get<int>()] =
          ProfileEntry{e.at("throughput_qps").get<double>(), e.at("latency_s").get<double>()};
    }
    profile.validate();
    set.by_model[profile.model_id] = std::move(profile);
  }
  return set;
}

json profiles_to_json(const ProfileSet& profiles) {
  json arr = json::array();
  for (const auto& [id, p] : profiles.by_model) {
    json entries = json::array();
    for (const auto& [hw, table] : p.entries)
      for (const auto& [batch, e] : table)
        entries.push_back({{"hardware", hw},
                           {"batch", batch},
                           {"throughput_qps", e.throughput_qps},
                           {"latency_s", e.latency_s}});
    arr.push_back({{"model_id", id},
                   {"scale_factor", p.scale_factor},
                   {"scale_factor_stderr", p.scale_factor_stderr},
                   {"entries", std::move(entries)}});
  }
  return json{{"format_version", 1}, {"profiles", std::move(arr)}};
}

PipelineConfig config_from_json(const json& j, const HardwareCatalog* catalog, CgUnit* out_cg) {
  require_fields(j, {"format_version", "stages"}, "pipeline config");
  PipelineConfig config;
  for (const auto& s : j.at("stages")) {
    require_fields(s, {"model_id", "hardware", "max_batch_size", "replicas"}, "stage config");
    StageConfig sc;
    sc.model_id = s.at("model_id").get<std::string>();
    sc.hardware_id = s.at("hardware").get<std::string>();
    sc.max_batch_size = s.at("max_batch_size").get<int>();
    sc.replicas = s.at("replicas").get<int>();
    if (!config.stages.emplace(sc.model_id, sc).second)
      throw ValidationError("duplicate stage in config: " + sc.model_id);
  }
  if (catalog && j.contains("cost_per_hour")) {
    double recomputed = config_cost(config, *catalog);
    double stored = j.at("cost_per_hour").get<double>();
    if (std::abs(recomputed - stored) > 1e-9)
      throw ValidationError("config cost_per_hour does not match its stages");
  }
  if (out_cg && j.contains("cg")) {
    const json& cg = j.at("cg");
    require_fields(cg, {"units", "unit_throughput_qps", "batch_size"}, "cg unit");
    out_cg->units = cg.at("units").get<int>();
    out_cg->unit_throughput_qps = cg.at("unit_throughput_qps").get<double>();
    out_cg->batch_size = cg.at("batch_size").get<int>();
  } else if (out_cg) {
    throw ConfigError("config lacks the cg unit block required by policy cg");
  }
  return config;
}

json config_to_json(const PipelineConfig& config, const HardwareCatalog& catalog,
                    const CgUnit* cg) {
  json stages = json::array();
  for (const auto& [id, sc] : config.stages)
    stages.push_back({{"model_id", id},
                      {"hardware", sc.hardware_id},
                      {"max_batch_size", sc.max_batch_size},
                      {"replicas", sc.replicas}});
  json out{{"format_version", 1},
           {"cost_per_hour", config_cost(config, catalog)},
           {"stages", std::move(stages)}};
  if (cg)
    out["cg"] = {{"units", cg->units},
                 {"unit_throughput_qps", cg->unit_throughput_qps},
                 {"batch_size", cg->batch_size}};
  return out;
}

json decision_to_json(const DecisionRecord& d) {
  json targets = json::object();
  for (const auto& [stage, k] : d.targets) targets[stage] = k;
  json out{{"time", d.time}, {"kind", d.kind}, {"rate_qps", d.rate_qps},
           {"targets", std::move(targets)}};
  if (d.window_s > 0.0) out["window_s"] = d.window_s;
  return out;
}

json report_to_json(const SimReport& report) {
  json decisions = json::array();
  for (const auto& d : report.decisions) decisions.push_back(decision_to_json(d));
  json initial = json::object();
  for (const auto& [s, k] : report.initial_replicas) initial[s] = k;
  json final_counts = json::object();
  for (const auto& [s, k] : report.final_replicas) final_counts[s] = k;
  return json{{"format_version", 1},
              {"kind", "replay_report"},
              {"policy", report.policy},
              {"num_queries", report.num_queries},
              {"slo", report.slo},
              {"p50", report.p50},
              {"p99", report.p99},
              {"max", report.max_latency},
              {"miss_rate", report.miss_rate},
              {"cost_dollars", report.cost_dollars},
              {"duration_s", report.duration_s},
              {"initial_replicas", std::move(initial)},
              {"final_replicas", std::move(final_counts)},
              {"decisions", std::move(decisions)}};
}

json plan_log_to_json(const PlanResult& result, const HardwareCatalog& catalog) {
  json actions = json::array();
  for (const auto& a : result.actions)
    actions.push_back({{"kind", action_kind_name(a.kind)},
                       {"model_id", a.model_id},
                       {"after",
                        {{"hardware", a.after.hardware_id},
                         {"max_batch_size", a.after.max_batch_size},
                         {"replicas", a.after.replicas}}},
                       {"cost_per_hour", a.cost_per_hour},
                       {"p99", a.p99}});
  return json{{"format_version", 1},
              {"iterations", result.iterations},
              {"cost_per_hour", result.cost_per_hour},
              {"p99", result.p99},
              {"initial", config_to_json(result.initial_config, catalog)},
              {"final", config_to_json(result.config, catalog)},
              {"actions", std::move(actions)}};
}

json load_json_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open file: " + path);
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw ValidationError("bad JSON in " + path + ": " + e.what());
  }
}

void atomic_write_file(const std::string& path, const std::string& content) {
  namespace fs = std::filesystem;
  fs::path target(path);
  fs::path dir = target.parent_path();
  if (dir.empty()) dir = ".";
  fs::path tmp = dir / (target.filename().string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw ValidationError("cannot open for writing: " + tmp.string());
    out << content;
    if (!out) throw ValidationError("write failed: " + tmp.string());
  }
  fs::rename(tmp, target);
}

}  // namespace inferline
