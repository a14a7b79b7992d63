#include <doctest.h>

#include <cmath>
#include <random>

#include "inferline/tuner.hpp"
#include "test_support.hpp"

using namespace inferline;
using namespace testbed;

TEST_CASE("envelope ladder doubles from the service time up to 60 s") {
  auto ladder = envelope_ladder(0.05);
  REQUIRE(ladder.size() >= 10);
  CHECK(ladder.front() == 0.05);
  for (size_t i = 1; i < ladder.size(); ++i)
    CHECK(ladder[i] == doctest::Approx(2.0 * ladder[i - 1]));
  CHECK(ladder.back() <= 60.0);
  CHECK(ladder.back() * 2.0 > 60.0);

  CHECK(envelope_ladder(70.0) == std::vector<double>{70.0});
  CHECK_THROWS_AS(envelope_ladder(0.0), ValidationError);
}

TEST_CASE("envelope of uniform arrivals matches the committed brute-force scan") {
  std::vector<double> arrivals;
  for (int i = 0; i <= 200; ++i) arrivals.push_back(static_cast<double>(i));
  TrafficEnvelope env = build_envelope(arrivals, 1.0);
  // Closed windows: width 1 catches both endpoints, width 2 catches 3, ...
  CHECK(env.counts[0] == 2);
  CHECK(env.counts[1] == 3);
  CHECK(env.counts[2] == 5);
  for (size_t i = 0; i < env.size(); ++i)
    CHECK(env.counts[i] == brute_force_window_max(arrivals, env.windows[i]));
}

TEST_CASE("a single burst dominates every window") {
  std::vector<double> arrivals;
  for (int i = 0; i < 10; ++i) arrivals.push_back(1e-7 * static_cast<double>(i));
  TrafficEnvelope env = build_envelope(arrivals, 0.5);
  for (size_t i = 0; i < env.size(); ++i) {
    CHECK(env.counts[i] == 10);
    CHECK(env.rate(i) == doctest::Approx(10.0 / env.windows[i]));
  }
}

TEST_CASE("empty stream gives an all-zero envelope") {
  TrafficEnvelope env = build_envelope(std::vector<double>{}, 1.0);
  for (auto q : env.counts) CHECK(q == 0);
}

TEST_CASE("envelope counts are nondecreasing and uniform rates nonincreasing") {
  ArrivalTrace t = generate_gamma_trace(100.0, 1e-6, 70.0, 3);  // near-uniform
  TrafficEnvelope env = build_envelope(t, 0.08);
  for (size_t i = 1; i < env.size(); ++i) {
    CHECK(env.counts[i] >= env.counts[i - 1]);
    CHECK(env.rate(i) <= env.rate(i - 1) * (1.0 + 1e-6));
  }
}

TEST_CASE("streaming envelope equals brute force on random traces") {
  std::mt19937_64 rng(19);
  for (int trial = 0; trial < 30; ++trial) {
    double lambda = 20.0 + static_cast<double>(rng() % 400);
    double cv = 0.25 * static_cast<double>(1 + rng() % 16);
    ArrivalTrace t = generate_gamma_trace(lambda, cv, 30.0, rng());
    TrafficEnvelope env = build_envelope(t, 0.05);
    for (size_t i = 0; i < env.size(); ++i)
      CHECK(env.counts[i] == brute_force_window_max(t.arrivals, env.windows[i]));
  }
}

TEST_CASE("detect: equality is not exceedance") {
  ArrivalTrace t = generate_gamma_trace(100.0, 1.0, 70.0, 5);
  TrafficEnvelope plan = build_envelope(t, 0.05);
  CHECK_FALSE(detect(plan, plan).has_value());
}

TEST_CASE("detect: mismatched ladders are a configuration error") {
  ArrivalTrace t = generate_gamma_trace(100.0, 1.0, 10.0, 5);
  TrafficEnvelope a = build_envelope(t, 0.05);
  TrafficEnvelope b = build_envelope(t, 0.10);
  CHECK_THROWS_AS(detect(a, b), ConfigError);
}

TEST_CASE("detect: burstiness-only change violates a small window") {
  ArrivalTrace plan_t = generate_gamma_trace(150.0, 1.0, 70.0, 7);
  ArrivalTrace live_t = generate_gamma_trace(150.0, 4.0, 70.0, 8);
  double t_s = 0.05;
  TrafficEnvelope plan = build_envelope(plan_t, t_s);
  TrafficEnvelope live = build_envelope(live_t, t_s);
  auto trig = detect(live, plan);
  REQUIRE(trig.has_value());
  // Same mean rate: the violation must come from sub-mean-scale windows.
  CHECK(trig->window_s < plan.windows.back());
  CHECK(trig->violating.front() < plan.size() / 2);
}

TEST_CASE("detect: rate-only change violates the large windows") {
  ArrivalTrace plan_t = generate_gamma_trace(150.0, 1.0, 70.0, 7);
  ArrivalTrace live_t = generate_gamma_trace(250.0, 1.0, 70.0, 9);
  TrafficEnvelope plan = build_envelope(plan_t, 0.05);
  TrafficEnvelope live = build_envelope(live_t, 0.05);
  auto trig = detect(live, plan);
  REQUIRE(trig.has_value());
  bool large_violated = false;
  for (size_t i : trig->violating)
    if (plan.windows[i] >= 30.0) large_violated = true;
  CHECK(large_violated);
}

namespace {
TunerState toy_state(double mu, double scale, double rho, double rho_p = -1.0) {
  TunerState state;
  state.plan_envelope.windows = {1.0, 2.0};
  state.plan_envelope.counts = {10, 20};
  state.stages["m"] = {mu, scale, rho};
  state.min_provision_ratio = rho_p > 0.0 ? rho_p : rho;
  return state;
}
}  // namespace

TEST_CASE("scale_up target arithmetic") {
  // ceil(250 * 1 / (50 * 0.5)) = 10
  auto t1 = scale_up_targets(toy_state(50.0, 1.0, 0.5), 250.0, {{"m", 1}});
  CHECK(t1.at("m") == 10);
  // ceil(100 * 0.3 / (60 * 0.6)) = ceil(30/36) = 1
  auto t2 = scale_up_targets(toy_state(60.0, 0.3, 0.6), 100.0, {{"m", 1}});
  CHECK(t2.at("m") == 1);
  // current above the computed target stays (no downscale on an up trigger)
  auto t3 = scale_up_targets(toy_state(50.0, 1.0, 0.5), 250.0, {{"m", 12}});
  CHECK(t3.at("m") == 12);
}

TEST_CASE("scale_down target arithmetic") {
  // ceil(50 * 1 / (50 * 0.5)) = 2
  auto t1 = scale_down_targets(toy_state(50.0, 1.0, 0.9, 0.5), 50.0, {{"m", 8}});
  CHECK(t1.at("m") == 2);
  // never raises on a down evaluation
  auto t2 = scale_down_targets(toy_state(50.0, 1.0, 0.9, 0.5), 500.0, {{"m", 3}});
  CHECK(t2.at("m") == 3);
  // floor at one replica
  auto t3 = scale_down_targets(toy_state(50.0, 1.0, 0.9, 0.9), 0.0, {{"m", 2}});
  CHECK(t3.at("m") == 1);
}

TEST_CASE("make_tuner_state derives provisioning ratios from the plan") {
  PipelineSpec spec = chain_spec({"a", "b"});
  ProfileSet profiles;
  profiles.by_model["a"] = table_profile("a", {{"hw", {{1, 0.010}}}});  // mu 100
  profiles.by_model["b"] = table_profile("b", {{"hw", {{1, 0.005}}}});  // mu 200
  PipelineConfig config;
  config.stages["a"] = {"a", "hw", 1, 2};  // capacity 200
  config.stages["b"] = {"b", "hw", 1, 1};  // capacity 200
  ArrivalTrace plan = generate_gamma_trace(150.0, 1.0, 70.0, 4);
  TunerState state = make_tuner_state(spec, config, profiles, plan);
  double lambda = compute_stats(plan).lambda;
  CHECK(state.stages.at("a").provision_ratio == doctest::Approx(lambda / 200.0));
  CHECK(state.stages.at("b").provision_ratio == doctest::Approx(lambda / 200.0));
  CHECK(state.min_provision_ratio ==
        doctest::Approx(std::min(state.stages.at("a").provision_ratio,
                                 state.stages.at("b").provision_ratio)));
  CHECK(state.stages.at("a").provision_ratio <= 1.0);
  CHECK(state.plan_envelope.windows.front() == doctest::Approx(0.015));

  // Scaling up at exactly the planned rate asks for the planned counts.
  auto targets = scale_up_targets(state, lambda, {{"a", 1}, {"b", 1}});
  CHECK(targets.at("a") == 2);
  CHECK(targets.at("b") == 1);
}

TEST_CASE("session: prefix replay of the planning trace never triggers") {
  ArrivalTrace plan = generate_gamma_trace(150.0, 1.0, 70.0, 7);
  TunerState state;
  state.plan_envelope = build_envelope(plan, 0.05);
  state.stages["m"] = {50.0, 1.0, 0.75};
  state.min_provision_ratio = 0.75;
  TunerSession session(state, {{"m", 4}});
  for (double t : plan.arrivals) CHECK_FALSE(session.observe_arrival(t).has_value());
}

TEST_CASE("session: sustained rate increase triggers within the largest window span") {
  ArrivalTrace plan = generate_gamma_trace(150.0, 1.0, 70.0, 7);
  TunerState state;
  state.plan_envelope = build_envelope(plan, 0.05);
  state.stages["m"] = {50.0, 1.0, 0.75};
  state.min_provision_ratio = 0.75;
  TunerSession session(state, {{"m", 4}});

  ArrivalTrace live = generate_varying_trace({{150.0, 1.0, 40.0}, {250.0, 1.0, 80.0}}, 0.0, 21);
  std::optional<double> post_step_trigger;
  for (double t : live.arrivals) {
    if (auto d = session.observe_arrival(t)) {
      if (!post_step_trigger && d->time >= 40.0) post_step_trigger = d->time;
    }
  }
  REQUIRE(post_step_trigger.has_value());
  CHECK(*post_step_trigger <= 40.0 + 60.0);
  // Enough capacity for 250 qps at the planned slack: ceil(250/(50*0.75)) = 7.
  CHECK(session.committed().at("m") >= 7);
}

TEST_CASE("session: no scale-down within the stabilization window") {
  TunerState state;
  state.plan_envelope.windows = {1.0};
  state.plan_envelope.counts = {5};
  state.stages["m"] = {1.0, 1.0, 0.5};
  state.min_provision_ratio = 0.5;
  TunerSession session(state, {{"m", 1}});

  // 39 s of steady half-second spacing builds lookback history without
  // exceeding the plan, then a dense one-second burst forces a scale-up.
  for (double t = 0.0; t < 39.0; t += 0.5) CHECK_FALSE(session.observe_arrival(t).has_value());
  std::optional<double> up_time;
  for (double t = 39.0; t < 40.0; t += 0.05)
    if (auto d = session.observe_arrival(t))
      if (!up_time) up_time = d->time;
  REQUIRE(up_time.has_value());
  CHECK(session.committed().at("m") > 1);

  // Within 15 s of that change no down decision may fire.
  CHECK_FALSE(session.consider_scale_down(41.0).has_value());
  // After stabilization plus an idle lookback the counts drop to the floor.
  auto down = session.consider_scale_down(120.0);
  REQUIRE(down.has_value());
  CHECK(down->targets.at("m") == 1);
}

TEST_CASE("scale-down rate is the max over 5 s subwindows, not the mean") {
  TunerState state;
  state.plan_envelope.windows = {1.0};
  state.plan_envelope.counts = {1000000};  // never triggers up
  state.stages["m"] = {50.0, 1.0, 1.0};
  state.min_provision_ratio = 1.0;
  TunerSession session(state, {{"m", 100}});

  // Subwindow rates {10,10,60,10,10,10} qps over [0, 30): the 60 qps burst
  // sits in [10, 15).
  double now = 30.0;
  auto put = [&](double lo, double hi, int count) {
    for (int i = 0; i < count; ++i)
      session.observe_arrival(lo + (hi - lo) * (static_cast<double>(i) + 0.5) /
                                       static_cast<double>(count));
  };
  put(0.0, 5.0, 50);
  put(5.0, 10.0, 50);
  put(10.0, 15.0, 300);
  put(15.0, 20.0, 50);
  put(20.0, 25.0, 50);
  put(25.0, 30.0, 50);
  auto rate = session.recent_max_rate(now);
  REQUIRE(rate.has_value());
  CHECK(*rate == doctest::Approx(60.0));

  auto down = session.consider_scale_down(now);
  REQUIRE(down.has_value());
  // ceil(60 * 1 / (50 * 1)) = 2
  CHECK(down->targets.at("m") == 2);
  CHECK(down->new_rate == doctest::Approx(60.0));
}

TEST_CASE("no-flap: downs never follow a change within 15 s") {
  TunerState state;
  state.plan_envelope.windows = {1.0};
  state.plan_envelope.counts = {3};
  state.stages["m"] = {50.0, 1.0, 0.5};
  state.min_provision_ratio = 0.5;
  TunerSession session(state, {{"m", 2}});

  std::vector<std::pair<double, TunerDecision::Kind>> changes;
  std::mt19937_64 rng(4);
  double t = 0.0;
  for (int i = 0; i < 4000; ++i) {
    // Erratic traffic: bursts then lulls.
    t += (i % 600 < 300) ? 0.01 : 0.3;
    if (auto d = session.observe_arrival(t)) changes.emplace_back(d->time, d->kind);
    if (i % 40 == 0)
      if (auto d = session.consider_scale_down(t)) changes.emplace_back(d->time, d->kind);
  }
  for (size_t i = 0; i < changes.size(); ++i)
    if (changes[i].second == TunerDecision::Kind::kScaleDown && i > 0)
      CHECK(changes[i].first - changes[i - 1].first >= 15.0);
}
