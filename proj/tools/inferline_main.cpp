#include <algorithm>
#include <cinttypes>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <future>
#include <iostream>
#include <sstream>
#include <string>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "inferline/estimator.hpp"
#include "inferline/harness.hpp"
#include "inferline/json_io.hpp"
#include "inferline/planner.hpp"
#include "inferline/profiler.hpp"
#include "inferline/tuner.hpp"
#include "inferline/workload.hpp"

namespace {

using namespace inferline;
using nlohmann::json;

constexpr int kExitOk = 0;
constexpr int kExitError = 1;
constexpr int kExitValidation = 2;
constexpr int kExitInfeasible = 3;

uint64_t seed_or_env(const CLI::Option* opt, uint64_t value) {
  if (opt->count() > 0) return value;
  if (const char* env = std::getenv("INFERLINE_SEED")) return std::strtoull(env, nullptr, 10);
  return 0;
}

std::string dump(const json& j) { return j.dump(2) + "\n"; }

void write_queries_csv(const std::string& path, const std::vector<QueryRecord>& records,
                       double slo) {
  std::ostringstream out;
  out << "query_id,arrival,latency,deadline_met\n";
  char buf[64];
  for (const auto& r : records) {
    out << r.id << ',';
    std::snprintf(buf, sizeof(buf), "%.17g", r.arrival);
    out << buf << ',';
    std::snprintf(buf, sizeof(buf), "%.17g", r.latency);
    out << buf << ',' << (r.latency <= slo ? 1 : 0) << '\n';
  }
  atomic_write_file(path, out.str());
}

int report_infeasible(const Infeasible& inf) {
  std::fprintf(stderr, "error kind=infeasible min_service_time=%.17g msg=\"%s\"\n",
               inf.min_service_time, inf.reason.c_str());
  return kExitInfeasible;
}

struct ReplayArgs {
  std::string spec_path, config_path, profiles_path, catalog_path, trace_path;
  std::string policy = "none";
  std::string plan_trace_path, out_path, queries_csv, decisions_log;
  double slo = 0.0;
};

int run_replay(const ReplayArgs& args) {
  PipelineSpec spec = spec_from_json(load_json_file(args.spec_path));
  ProfileSet profiles = profiles_from_json(load_json_file(args.profiles_path));
  HardwareCatalog catalog = catalog_from_json(load_json_file(args.catalog_path));
  ArrivalTrace trace = read_trace_file(args.trace_path);

  auto policy = tuning_policy_from_name(args.policy);
  if (!policy) throw ValidationError("unknown policy: " + args.policy);

  CgUnit cg_unit;
  PipelineConfig config = config_from_json(
      load_json_file(args.config_path), &catalog,
      *policy == TuningPolicy::kCg ? &cg_unit : nullptr);

  TunerState tuner_state;
  ReplayInputs inputs;
  if (*policy == TuningPolicy::kInferline) {
    if (args.plan_trace_path.empty())
      throw ConfigError("policy inferline requires --plan-trace");
    ArrivalTrace plan_trace = read_trace_file(args.plan_trace_path);
    tuner_state = make_tuner_state(spec, config, profiles, plan_trace);
    inputs.tuner_state = &tuner_state;
  }
  if (*policy == TuningPolicy::kCg) inputs.cg_unit = &cg_unit;

  std::vector<QueryRecord> records;
  SimReport report = replay(spec, config, profiles, catalog, trace, args.slo, *policy, inputs,
                            args.queries_csv.empty() ? nullptr : &records);
  atomic_write_file(args.out_path, dump(report_to_json(report)));
  if (!args.queries_csv.empty()) write_queries_csv(args.queries_csv, records, args.slo);
  if (!args.decisions_log.empty()) {
    std::ostringstream out;
    for (const auto& d : report.decisions) out << decision_to_json(d).dump() << '\n';
    atomic_write_file(args.decisions_log, out.str());
  }
  std::printf("replay policy=%s queries=%" PRIu64 " p99=%.6g miss_rate=%.6g cost=$%.6g\n",
              report.policy.c_str(), report.num_queries, report.p99, report.miss_rate,
              report.cost_dollars);
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Pipeline provisioning simulator: profile, plan, estimate, tune, replay"};
  app.require_subcommand(1);

  // trace gen / gen-varying / stats
  auto* trace_cmd = app.add_subcommand("trace", "Generate and inspect arrival traces");
  trace_cmd->require_subcommand(1);

  struct {
    double lambda = 100.0, cv = 1.0, duration = 60.0;
    uint64_t seed = 0;
    std::string out, spec;
  } gen;
  auto* gen_cmd = trace_cmd->add_subcommand("gen", "Stationary gamma arrivals");
  gen_cmd->add_option("--lambda", gen.lambda, "Mean arrival rate (queries/s)")->required();
  gen_cmd->add_option("--cv", gen.cv, "Burstiness, sigma^2/mu^2 of inter-arrivals")->required();
  gen_cmd->add_option("--duration", gen.duration, "Trace length (s)")->required();
  auto* gen_seed = gen_cmd->add_option("--seed", gen.seed, "RNG seed (or INFERLINE_SEED)");
  gen_cmd->add_option("--out", gen.out, "Output trace file")->required();
  gen_cmd->add_option("--spec", gen.spec, "Pipeline spec for routing choices");

  struct {
    std::vector<std::string> segments;
    double transition = 0.0;
    uint64_t seed = 0;
    std::string out, spec;
  } genv;
  auto* genv_cmd = trace_cmd->add_subcommand("gen-varying", "Piecewise-stationary arrivals");
  genv_cmd
      ->add_option("--segment", genv.segments,
                   "lambda:cv:hold_seconds (repeat for each segment)")
      ->required();
  genv_cmd->add_option("--transition", genv.transition, "Ramp width between segments (s)");
  auto* genv_seed = genv_cmd->add_option("--seed", genv.seed, "RNG seed (or INFERLINE_SEED)");
  genv_cmd->add_option("--out", genv.out, "Output trace file")->required();
  genv_cmd->add_option("--spec", genv.spec, "Pipeline spec for routing choices");

  struct {
    std::string in, out;
  } stats;
  auto* stats_cmd = trace_cmd->add_subcommand("stats", "Inter-arrival statistics of a trace");
  stats_cmd->add_option("--in", stats.in, "Trace file")->required();
  stats_cmd->add_option("--out", stats.out, "Write stats JSON here instead of stdout");

  struct {
    std::string spec, executors, hardware, sample, out;
  } prof;
  auto* profile_cmd = app.add_subcommand("profile", "Profile executors over hardware and batch sizes");
  profile_cmd->add_option("--spec", prof.spec, "Pipeline spec")->required();
  profile_cmd->add_option("--executors", prof.executors, "Executor models JSON")->required();
  profile_cmd->add_option("--hardware", prof.hardware, "Hardware catalog JSON")->required();
  profile_cmd->add_option("--sample", prof.sample, "Sample trace")->required();
  profile_cmd->add_option("--out", prof.out, "Output profiles JSON")->required();

  struct {
    std::string spec, config, profiles, trace, out, queries_csv;
    double slo = 0.0;
  } est;
  auto* estimate_cmd = app.add_subcommand("estimate", "Simulate a configuration on a trace");
  estimate_cmd->add_option("--spec", est.spec)->required();
  estimate_cmd->add_option("--config", est.config)->required();
  estimate_cmd->add_option("--profiles", est.profiles)->required();
  estimate_cmd->add_option("--trace", est.trace)->required();
  estimate_cmd->add_option("--slo", est.slo, "Latency objective (s)")->required();
  estimate_cmd->add_option("--out", est.out, "Report JSON path");
  estimate_cmd->add_option("--queries-csv", est.queries_csv, "Per-query latency dump");

  struct {
    std::string spec, profiles, catalog, trace, out, log;
    double slo = 0.0;
  } plan;
  auto* plan_cmd = app.add_subcommand("plan", "Find a cost-minimal feasible configuration");
  plan_cmd->add_option("--spec", plan.spec)->required();
  plan_cmd->add_option("--profiles", plan.profiles)->required();
  plan_cmd->add_option("--catalog", plan.catalog)->required();
  plan_cmd->add_option("--trace", plan.trace, "Planning trace")->required();
  plan_cmd->add_option("--slo", plan.slo, "Latency objective (s)")->required();
  plan_cmd->add_option("--out", plan.out, "Output config JSON")->required();
  plan_cmd->add_option("--log", plan.log, "Action log JSON");

  ReplayArgs rep;
  auto* replay_cmd = app.add_subcommand("replay", "Replay a trace under a tuning policy");
  replay_cmd->add_option("--spec", rep.spec_path)->required();
  replay_cmd->add_option("--config", rep.config_path)->required();
  replay_cmd->add_option("--profiles", rep.profiles_path)->required();
  replay_cmd->add_option("--catalog", rep.catalog_path)->required();
  replay_cmd->add_option("--trace", rep.trace_path)->required();
  replay_cmd->add_option("--slo", rep.slo, "Latency objective (s)")->required();
  replay_cmd->add_option("--policy", rep.policy, "none | inferline | cg")->required();
  replay_cmd->add_option("--plan-trace", rep.plan_trace_path,
                         "Planning trace (policy inferline)");
  replay_cmd->add_option("--out", rep.out_path, "Report JSON path")->required();
  replay_cmd->add_option("--queries-csv", rep.queries_csv, "Per-query latency dump");
  replay_cmd->add_option("--decisions-log", rep.decisions_log, "Decision records, JSON lines");

  struct {
    std::string mode = "mean", spec, profiles, catalog, trace, out;
    double slo = 0.0;
  } cg;
  auto* baseline_cmd = app.add_subcommand("baseline", "Coarse-grained baselines");
  auto* cg_cmd = baseline_cmd->add_subcommand("cg", "Black-box whole-pipeline provisioning");
  cg_cmd->add_option("--mode", cg.mode, "mean | peak")->required();
  cg_cmd->add_option("--spec", cg.spec)->required();
  cg_cmd->add_option("--profiles", cg.profiles)->required();
  cg_cmd->add_option("--catalog", cg.catalog)->required();
  cg_cmd->add_option("--trace", cg.trace)->required();
  cg_cmd->add_option("--slo", cg.slo, "Latency objective (s)")->required();
  cg_cmd->add_option("--out", cg.out, "Output config JSON")->required();

  struct {
    std::string grid, out_dir;
    int jobs = 0;
  } sweep;
  auto* sweep_cmd = app.add_subcommand("sweep", "Run a grid of independent replays");
  sweep_cmd->add_option("--grid", sweep.grid, "Grid JSON")->required();
  sweep_cmd->add_option("--out-dir", sweep.out_dir, "Report output directory")->required();
  sweep_cmd->add_option("--jobs", sweep.jobs, "Parallel runs (default: hardware)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::fprintf(stderr, "error kind=usage msg=\"%s\"\n", e.what());
    std::fputs(app.help().c_str(), stderr);
    return kExitValidation;
  }

  try {
    if (gen_cmd->parsed()) {
      uint64_t seed = seed_or_env(gen_seed, gen.seed);
      PipelineSpec spec;
      bool have_spec = !gen.spec.empty();
      if (have_spec) spec = spec_from_json(load_json_file(gen.spec));
      ArrivalTrace trace = generate_gamma_trace(gen.lambda, gen.cv, gen.duration, seed,
                                                have_spec ? &spec : nullptr);
      std::ostringstream out;
      write_trace(trace, out);
      atomic_write_file(gen.out, out.str());
      std::printf("trace gen count=%zu duration=%.6g seed=%" PRIu64 "\n", trace.size(),
                  trace.duration(), seed);
      return kExitOk;
    }
    if (genv_cmd->parsed()) {
      uint64_t seed = seed_or_env(genv_seed, genv.seed);
      std::vector<WorkloadSegment> segments;
      for (const auto& s : genv.segments) {
        WorkloadSegment seg;
        if (std::sscanf(s.c_str(), "%lf:%lf:%lf", &seg.lambda, &seg.cv, &seg.hold) != 3)
          throw ValidationError("bad --segment, expected lambda:cv:hold, got: " + s);
        segments.push_back(seg);
      }
      PipelineSpec spec;
      bool have_spec = !genv.spec.empty();
      if (have_spec) spec = spec_from_json(load_json_file(genv.spec));
      ArrivalTrace trace = generate_varying_trace(segments, genv.transition, seed,
                                                  have_spec ? &spec : nullptr);
      std::ostringstream out;
      write_trace(trace, out);
      atomic_write_file(genv.out, out.str());
      std::printf("trace gen-varying count=%zu duration=%.6g seed=%" PRIu64 "\n", trace.size(),
                  trace.duration(), seed);
      return kExitOk;
    }
    if (stats_cmd->parsed()) {
      ArrivalTrace trace = read_trace_file(stats.in);
      WorkloadStats ws = compute_stats(trace);
      json out{{"format_version", 1},
               {"kind", "trace_stats"},
               {"count", trace.size()},
               {"duration_s", trace.duration()},
               {"lambda", ws.lambda},
               {"mean_interarrival", ws.mean_interarrival},
               {"sigma", ws.sigma},
               {"cv", ws.cv}};
      if (stats.out.empty())
        std::fputs(dump(out).c_str(), stdout);
      else
        atomic_write_file(stats.out, dump(out));
      return kExitOk;
    }
    if (profile_cmd->parsed()) {
      PipelineSpec spec = spec_from_json(load_json_file(prof.spec));
      auto executors = executors_from_json(load_json_file(prof.executors));
      HardwareCatalog catalog = catalog_from_json(load_json_file(prof.hardware));
      ArrivalTrace sample = read_trace_file(prof.sample);
      std::vector<std::string> warnings;
      ProfileSet profiles = build_profiles(executors, catalog, spec, sample, &warnings);
      for (const auto& w : warnings) std::fprintf(stderr, "warning: %s\n", w.c_str());
      atomic_write_file(prof.out, dump(profiles_to_json(profiles)));
      std::printf("profile models=%zu hardware=%zu\n", profiles.by_model.size(),
                  catalog.items().size());
      return kExitOk;
    }
    if (estimate_cmd->parsed()) {
      PipelineSpec spec = spec_from_json(load_json_file(est.spec));
      PipelineConfig config = config_from_json(load_json_file(est.config));
      ProfileSet profiles = profiles_from_json(load_json_file(est.profiles));
      ArrivalTrace trace = read_trace_file(est.trace);
      SimResult result = simulate(spec, config, profiles, trace);
      auto lats = latencies_of(result);
      if (lats.empty()) throw ValidationError("estimate needs a nonempty trace");
      double p99 = percentile_nearest_rank(lats, 0.99);
      json out{{"format_version", 1},
               {"kind", "estimate_report"},
               {"num_queries", lats.size()},
               {"slo", est.slo},
               {"p50", percentile_nearest_rank(lats, 0.50)},
               {"p99", p99},
               {"max", *std::max_element(lats.begin(), lats.end())},
               {"feasible", p99 <= est.slo}};
      if (est.out.empty())
        std::fputs(dump(out).c_str(), stdout);
      else
        atomic_write_file(est.out, dump(out));
      if (!est.queries_csv.empty()) write_queries_csv(est.queries_csv, result.records, est.slo);
      return kExitOk;
    }
    if (plan_cmd->parsed()) {
      PipelineSpec spec = spec_from_json(load_json_file(plan.spec));
      ProfileSet profiles = profiles_from_json(load_json_file(plan.profiles));
      HardwareCatalog catalog = catalog_from_json(load_json_file(plan.catalog));
      ArrivalTrace trace = read_trace_file(plan.trace);
      PlanOutcome outcome = minimize_cost(spec, profiles, catalog, trace, plan.slo);
      if (std::holds_alternative<Infeasible>(outcome))
        return report_infeasible(std::get<Infeasible>(outcome));
      const PlanResult& result = std::get<PlanResult>(outcome);
      atomic_write_file(plan.out, dump(config_to_json(result.config, catalog)));
      if (!plan.log.empty()) atomic_write_file(plan.log, dump(plan_log_to_json(result, catalog)));
      std::printf("plan cost_per_hour=%.6g p99=%.6g iterations=%d\n", result.cost_per_hour,
                  result.p99, result.iterations);
      return kExitOk;
    }
    if (replay_cmd->parsed()) return run_replay(rep);
    if (cg_cmd->parsed()) {
      PipelineSpec spec = spec_from_json(load_json_file(cg.spec));
      ProfileSet profiles = profiles_from_json(load_json_file(cg.profiles));
      HardwareCatalog catalog = catalog_from_json(load_json_file(cg.catalog));
      ArrivalTrace trace = read_trace_file(cg.trace);
      CgMode mode;
      if (cg.mode == "mean")
        mode = CgMode::kMean;
      else if (cg.mode == "peak")
        mode = CgMode::kPeak;
      else
        throw ValidationError("unknown cg mode: " + cg.mode);
      CgUnit unit;
      auto outcome = cg_provision(spec, profiles, catalog, trace, cg.slo, mode, &unit);
      if (std::holds_alternative<Infeasible>(outcome))
        return report_infeasible(std::get<Infeasible>(outcome));
      const PipelineConfig& config = std::get<PipelineConfig>(outcome);
      atomic_write_file(cg.out, dump(config_to_json(config, catalog, &unit)));
      std::printf("baseline cg mode=%s units=%d cost_per_hour=%.6g\n", cg.mode.c_str(),
                  unit.units, config_cost(config, catalog));
      return kExitOk;
    }
    if (sweep_cmd->parsed()) {
      json grid = load_json_file(sweep.grid);
      if (!grid.contains("runs") || !grid.at("runs").is_array())
        throw ValidationError("grid must contain a 'runs' array");
      std::filesystem::create_directories(sweep.out_dir);
      unsigned jobs = sweep.jobs > 0 ? static_cast<unsigned>(sweep.jobs)
                                     : std::max(1u, std::thread::hardware_concurrency());
      std::vector<ReplayArgs> runs;
      std::vector<std::string> names;
      for (const auto& r : grid.at("runs")) {
        ReplayArgs a;
        std::string name = r.at("name").get<std::string>();
        a.spec_path = r.at("spec").get<std::string>();
        a.config_path = r.at("config").get<std::string>();
        a.profiles_path = r.at("profiles").get<std::string>();
        a.catalog_path = r.at("catalog").get<std::string>();
        a.trace_path = r.at("trace").get<std::string>();
        a.slo = r.at("slo").get<double>();
        a.policy = r.value("policy", "none");
        a.plan_trace_path = r.value("plan_trace", "");
        a.out_path = (std::filesystem::path(sweep.out_dir) / (name + ".report.json")).string();
        runs.push_back(std::move(a));
        names.push_back(std::move(name));
      }
      int failures = 0;
      for (size_t i = 0; i < runs.size(); i += jobs) {
        std::vector<std::future<int>> wave;
        for (size_t j = i; j < std::min(runs.size(), i + jobs); ++j)
          wave.push_back(std::async(std::launch::async, run_replay, runs[j]));
        for (size_t j = 0; j < wave.size(); ++j) {
          try {
            if (wave[j].get() != 0) ++failures;
          } catch (const std::exception& e) {
            std::fprintf(stderr, "error kind=sweep_run run=%s msg=\"%s\"\n",
                         names[i + j].c_str(), e.what());
            ++failures;
          }
        }
      }
      std::printf("sweep runs=%zu failures=%d\n", runs.size(), failures);
      return failures == 0 ? kExitOk : kExitError;
    }
  } catch (const ValidationError& e) {
    std::fprintf(stderr, "error kind=validation msg=\"%s\"\n", e.what());
    return kExitValidation;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error kind=internal msg=\"%s\"\n", e.what());
    return kExitError;
  }
  return kExitValidation;
}
