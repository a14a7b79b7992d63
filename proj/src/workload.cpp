#include "inferline/workload.hpp"

#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>

#include <json.hpp>

#include "inferline/rng.hpp"

namespace inferline {

void ArrivalTrace::validate() const {
  double prev = -1.0;
  for (double t : arrivals) {
    if (!(t >= 0.0)) throw TraceError("arrival timestamps must be nonnegative");
    if (t <= prev) throw TraceError("arrival timestamps must be strictly increasing");
    prev = t;
  }
  if (!branch_points.empty()) {
    if (path_choices.size() != arrivals.size())
      throw TraceError("path choices must cover every query");
    for (const auto& c : path_choices)
      if (c.size() != branch_points.size())
        throw TraceError("path choices must cover every branch point");
  }
}

namespace {

// lambda/cv as a function of elapsed time.
using ParamFn = std::function<std::pair<double, double>(double)>;

ArrivalTrace generate_impl(const ParamFn& params, double total, uint64_t seed,
                           const PipelineSpec* spec) {
  ArrivalTrace trace;
  trace.seed = seed;
  rng::Stream arrivals(seed, rng::kArrivalStream);
  double t = 0.0;
  for (;;) {
    auto [lambda, cv] = params(t);
    double shape = 1.0 / cv;
    double scale = cv / lambda;
    double delta = arrivals.gamma(shape, scale);
    if (!(delta > 1e-12)) delta = 1e-12;  // keeps timestamps strictly increasing
    t += delta;
    if (t > total) break;
    trace.arrivals.push_back(t);
  }

  if (spec) {
    trace.branch_points = spec->branch_points();
    if (!trace.branch_points.empty()) {
      rng::Stream choices(seed, rng::kPathChoiceStream);
      trace.path_choices.reserve(trace.arrivals.size());
      for (size_t q = 0; q < trace.arrivals.size(); ++q) {
        std::vector<int> row;
        row.reserve(trace.branch_points.size());
        for (const auto& stage : trace.branch_points) {
          const auto& out = spec->outgoing(stage);
          double u = choices.uniform01();
          double cum = 0.0;
          int choice = PipelineSpec::kExitChoice;
          for (size_t i = 0; i < out.size(); ++i) {
            cum += out[i].probability;
            if (u < cum) {
              choice = static_cast<int>(i);
              break;
            }
          }
          row.push_back(choice);
        }
        trace.path_choices.push_back(std::move(row));
      }
    }
  }
  return trace;
}

}  // namespace

ArrivalTrace generate_gamma_trace(double lambda, double cv, double duration, uint64_t seed,
                                  const PipelineSpec* spec) {
  if (!(lambda > 0.0)) throw ValidationError("lambda must be positive");
  if (!(cv > 0.0)) throw ValidationError("cv must be positive");
  if (!(duration > 0.0)) throw ValidationError("duration must be positive");
  ArrivalTrace trace = generate_impl(
      [&](double) { return std::make_pair(lambda, cv); }, duration, seed, spec);
  trace.lambda_meta = lambda;
  trace.cv_meta = cv;
  return trace;
}

ArrivalTrace generate_varying_trace(const std::vector<WorkloadSegment>& segments,
                                    double transition, uint64_t seed,
                                    const PipelineSpec* spec) {
  if (segments.empty()) throw ValidationError("at least one workload segment required");
  if (!(transition >= 0.0)) throw ValidationError("transition must be nonnegative");
  for (const auto& s : segments) {
    if (!(s.lambda > 0.0) || !(s.cv > 0.0) || !(s.hold > 0.0))
      throw ValidationError("segment lambda, cv and hold must be positive");
  }

  // Segment i holds on [start_i, start_i + hold_i); a linear ramp of width
  // `transition` follows before segment i+1.
  std::vector<double> starts(segments.size());
  double t0 = 0.0;
  for (size_t i = 0; i < segments.size(); ++i) {
    starts[i] = t0;
    t0 += segments[i].hold;
    if (i + 1 < segments.size()) t0 += transition;
  }
  const double total = t0;

  auto params = [&](double t) {
    for (size_t i = 0; i < segments.size(); ++i) {
      double hold_end = starts[i] + segments[i].hold;
      if (t < hold_end || i + 1 == segments.size())
        return std::make_pair(segments[i].lambda, segments[i].cv);
      double ramp_end = hold_end + transition;
      if (t < ramp_end) {
        double f = transition > 0.0 ? (t - hold_end) / transition : 1.0;
        return std::make_pair(
            segments[i].lambda + f * (segments[i + 1].lambda - segments[i].lambda),
            segments[i].cv + f * (segments[i + 1].cv - segments[i].cv));
      }
    }
    return std::make_pair(segments.back().lambda, segments.back().cv);
  };

  ArrivalTrace trace = generate_impl(params, total, seed, spec);
  double wl = 0.0, wc = 0.0;
  for (const auto& s : segments) {
    wl += s.lambda * s.hold;
    wc += s.cv * s.hold;
  }
  double hold_total = 0.0;
  for (const auto& s : segments) hold_total += s.hold;
  trace.lambda_meta = wl / hold_total;
  trace.cv_meta = wc / hold_total;
  return trace;
}

WorkloadStats compute_stats(const ArrivalTrace& trace) {
  if (trace.arrivals.size() < 2)
    throw ValidationError("need at least 2 arrivals to compute inter-arrival stats");
  const auto& a = trace.arrivals;
  size_t n = a.size() - 1;
  double sum = 0.0;
  for (size_t i = 1; i < a.size(); ++i) sum += a[i] - a[i - 1];
  double mean = sum / static_cast<double>(n);
  double var = 0.0;
  for (size_t i = 1; i < a.size(); ++i) {
    double d = (a[i] - a[i - 1]) - mean;
    var += d * d;
  }
  var /= static_cast<double>(n);
  WorkloadStats s;
  s.mean_interarrival = mean;
  s.lambda = 1.0 / mean;
  s.sigma = std::sqrt(var);
  s.cv = var / (mean * mean);
  return s;
}

namespace {
std::string format_double(double v) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}
}  // namespace

void write_trace(const ArrivalTrace& trace, std::ostream& out) {
  nlohmann::json header{{"format_version", 1},
                        {"kind", "arrival_trace"},
                        {"seed", trace.seed},
                        {"lambda", trace.lambda_meta},
                        {"cv", trace.cv_meta},
                        {"count", trace.arrivals.size()},
                        {"branch_points", trace.branch_points}};
  out << "#inferline-trace " << header.dump() << "\n";
  const bool choices = !trace.branch_points.empty();
  for (size_t i = 0; i < trace.arrivals.size(); ++i) {
    out << format_double(trace.arrivals[i]);
    if (choices)
      for (int c : trace.path_choices[i]) out << ' ' << c;
    out << '\n';
  }
}

ArrivalTrace read_trace(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw TraceError("empty trace file");
  const std::string prefix = "#inferline-trace ";
  if (line.rfind(prefix, 0) != 0)
    throw TraceError("trace file missing #inferline-trace header");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(line.substr(prefix.size()));
  } catch (const nlohmann::json::exception& e) {
    throw TraceError(std::string("bad trace header: ") + e.what());
  }
  ArrivalTrace trace;
  trace.seed = header.value("seed", 0ULL);
  trace.lambda_meta = header.value("lambda", 0.0);
  trace.cv_meta = header.value("cv", 0.0);
  trace.branch_points = header.value("branch_points", std::vector<std::string>{});
  const size_t n_choices = trace.branch_points.size();
  size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const char* p = line.c_str();
    char* end = nullptr;
    double t = std::strtod(p, &end);
    if (end == p) throw TraceError("bad timestamp at line " + std::to_string(lineno));
    trace.arrivals.push_back(t);
    if (n_choices > 0) {
      std::vector<int> row;
      row.reserve(n_choices);
      p = end;
      for (size_t i = 0; i < n_choices; ++i) {
        long c = std::strtol(p, &end, 10);
        if (end == p)
          throw TraceError("missing path choice at line " + std::to_string(lineno));
        row.push_back(static_cast<int>(c));
        p = end;
      }
      trace.path_choices.push_back(std::move(row));
    }
  }
  trace.validate();
  return trace;
}

void write_trace_file(const ArrivalTrace& trace, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw TraceError("cannot open for writing: " + path);
  write_trace(trace, out);
  if (!out) throw TraceError("write failed: " + path);
}

ArrivalTrace read_trace_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw TraceError("cannot open trace file: " + path);
  return read_trace(in);
}

}  // namespace inferline
