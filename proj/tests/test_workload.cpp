#include <doctest.h>

#include <cmath>
#include <sstream>

#include "inferline/workload.hpp"
#include "test_support.hpp"

using namespace inferline;
using namespace testbed;

TEST_CASE("compute_stats hand examples") {
  CHECK_THROWS_AS(compute_stats(raw_trace({1.0})), ValidationError);

  WorkloadStats uniform = compute_stats(raw_trace({0.0, 1.0, 2.0, 3.0}));
  CHECK(uniform.lambda == doctest::Approx(1.0));
  CHECK(uniform.sigma == doctest::Approx(0.0));
  CHECK(uniform.cv == doctest::Approx(0.0));

  // inter-arrivals {1, 2}: mean 1.5, population sigma 0.5, cv = 0.25/2.25
  WorkloadStats two = compute_stats(raw_trace({0.0, 1.0, 3.0}));
  CHECK(two.mean_interarrival == doctest::Approx(1.5));
  CHECK(two.sigma == doctest::Approx(0.5));
  CHECK(two.cv == doctest::Approx(1.0 / 9.0));
}

TEST_CASE("gamma trace matches requested rate and burstiness") {
  ArrivalTrace t = generate_gamma_trace(100.0, 1.0, 100.0, 7);
  t.validate();
  WorkloadStats s = compute_stats(t);
  CHECK(std::abs(s.lambda - 100.0) / 100.0 < 0.05);
  CHECK(std::abs(s.cv - 1.0) < 0.10);
}

TEST_CASE("near-deterministic limit forces uniform spacing") {
  ArrivalTrace t = generate_gamma_trace(50.0, 1e-6, 20.0, 3);
  double expected = 1.0 / 50.0;
  for (size_t i = 1; i < t.arrivals.size(); ++i) {
    double gap = t.arrivals[i] - t.arrivals[i - 1];
    CHECK(std::abs(gap - expected) / expected < 0.01);
  }
}

TEST_CASE("bursty setting: cv 4 at 150 qps over >= 1e4 queries") {
  ArrivalTrace t = generate_gamma_trace(150.0, 4.0, 90.0, 11);
  REQUIRE(t.size() >= 10000);
  WorkloadStats s = compute_stats(t);
  CHECK(std::abs(s.cv - 4.0) / 4.0 < 0.15);
}

TEST_CASE("generator rejects nonpositive parameters") {
  CHECK_THROWS_AS(generate_gamma_trace(0.0, 1.0, 10.0, 1), ValidationError);
  CHECK_THROWS_AS(generate_gamma_trace(10.0, -1.0, 10.0, 1), ValidationError);
  CHECK_THROWS_AS(generate_gamma_trace(10.0, 1.0, 0.0, 1), ValidationError);
  CHECK_THROWS_AS(generate_varying_trace({}, 1.0, 1), ValidationError);
}

TEST_CASE("single-segment varying trace equals the stationary generator") {
  ArrivalTrace stationary = generate_gamma_trace(80.0, 2.0, 30.0, 21);
  ArrivalTrace varying = generate_varying_trace({{80.0, 2.0, 30.0}}, 5.0, 21);
  CHECK(varying.arrivals == stationary.arrivals);
}

namespace {
double windowed_rate(const ArrivalTrace& t, double lo, double hi) {
  uint64_t count = 0;
  for (double a : t.arrivals)
    if (a >= lo && a < hi) ++count;
  return static_cast<double>(count) / (hi - lo);
}
}  // namespace

TEST_CASE("ramp crosses the midpoint rate midway through the transition") {
  // 150 -> 250 qps over 20 s: the 5 s window centered on the ramp midpoint
  // should sit near 200 qps.
  ArrivalTrace t = generate_varying_trace({{150.0, 1.0, 40.0}, {250.0, 1.0, 40.0}}, 20.0, 9);
  double mid = 40.0 + 10.0;
  double rate = windowed_rate(t, mid - 2.5, mid + 2.5);
  CHECK(rate > 180.0);
  CHECK(rate < 220.0);
}

TEST_CASE("step with zero transition completes within one 5 s window") {
  ArrivalTrace t = generate_varying_trace({{100.0, 1.0, 30.0}, {300.0, 1.0, 30.0}}, 0.0, 5);
  double before = windowed_rate(t, 20.0, 25.0);
  double after = windowed_rate(t, 30.0, 35.0);
  CHECK(before < 150.0);
  CHECK(after > 250.0);
}

TEST_CASE("same seed reproduces the trace; different seeds diverge") {
  ArrivalTrace a = generate_gamma_trace(100.0, 1.0, 10.0, 42);
  ArrivalTrace b = generate_gamma_trace(100.0, 1.0, 10.0, 42);
  CHECK(a.arrivals == b.arrivals);

  ArrivalTrace c = generate_gamma_trace(100.0, 1.0, 10.0, 43);
  size_t n = std::min<size_t>(100, std::min(a.size(), c.size()));
  bool all_equal = true;
  for (size_t i = 0; i < n; ++i)
    if (a.arrivals[i] != c.arrivals[i]) all_equal = false;
  CHECK_FALSE(all_equal);
}

TEST_CASE("trace file round-trip is bit-exact") {
  PipelineSpec spec({"a", "b", "c"}, {{"a", "b", 0.3}, {"a", "c", 0.7}});
  ArrivalTrace t = generate_gamma_trace(200.0, 4.0, 20.0, 1234, &spec);
  std::ostringstream out;
  write_trace(t, out);
  std::istringstream in(out.str());
  ArrivalTrace back = read_trace(in);
  CHECK(back.arrivals == t.arrivals);
  CHECK(back.path_choices == t.path_choices);
  CHECK(back.branch_points == t.branch_points);
  CHECK(back.seed == t.seed);
}

TEST_CASE("branch frequencies match edge probabilities within 3 sigma") {
  PipelineSpec spec({"a", "b", "c"}, {{"a", "b", 0.3}, {"a", "c", 0.7}});
  ArrivalTrace t = generate_gamma_trace(200.0, 1.0, 60.0, 77, &spec);
  REQUIRE(t.size() >= 10000);
  uint64_t to_b = 0;
  for (const auto& row : t.path_choices)
    if (row[0] == 0) ++to_b;  // outgoing edges sorted by target: b then c
  double n = static_cast<double>(t.size());
  double freq = static_cast<double>(to_b) / n;
  double sigma = std::sqrt(0.3 * 0.7 / n);
  CHECK(std::abs(freq - 0.3) < 3.0 * sigma);
}

TEST_CASE("exit choices appear when outgoing probability is below one") {
  PipelineSpec spec({"a", "b"}, {{"a", "b", 0.4}});
  ArrivalTrace t = generate_gamma_trace(200.0, 1.0, 60.0, 5, &spec);
  uint64_t exits = 0;
  for (const auto& row : t.path_choices)
    if (row[0] == PipelineSpec::kExitChoice) ++exits;
  double n = static_cast<double>(t.size());
  double freq = static_cast<double>(exits) / n;
  double sigma = std::sqrt(0.6 * 0.4 / n);
  CHECK(std::abs(freq - 0.6) < 3.0 * sigma);
}
