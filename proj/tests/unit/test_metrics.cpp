// Copyright 2026 The twm Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "twm/metrics.hpp"
#include "twm/synth_world.hpp"

#include <doctest.h>

#include <cmath>
#include <random>
#include <stdexcept>

using namespace twm;
using metrics::Feature;

namespace
{

// Independent KL in natural log, converted at the end.
double brute_jsd(const std::vector<double> & p, const std::vector<double> & q)
{
  double kl_pm = 0.0, kl_qm = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double m = (p[i] + q[i]) / 2.0;
    if (p[i] != 0.0) {
      kl_pm += p[i] * (std::log(p[i]) - std::log(m));
    }
    if (q[i] != 0.0) {
      kl_qm += q[i] * (std::log(q[i]) - std::log(m));
    }
  }
  return (kl_pm + kl_qm) / 2.0 / std::log(2.0);
}

AgentTrack static_track(int id, double x, double y, int birth, int death, double heading = 0.0)
{
  AgentTrack a;
  a.id = id;
  a.birth = birth;
  for (int t = birth; t < death; ++t) {
    AgentStep s;
    s.x = x;
    s.y = y;
    s.heading = heading;
    s.valid = true;
    a.steps.push_back(s);
  }
  return a;
}

Scenario ego_only(int steps)
{
  Scenario s;
  s.steps = steps;
  s.agents.push_back(static_track(0, 0.0, 0.0, 0, steps));
  s.agents[0].type = tensor::AgentType::AV;
  return s;
}

}  // namespace

TEST_CASE("js divergence values and oracle")
{
  CHECK(metrics::js_divergence({0.2, 0.8}, {0.2, 0.8}) == 0.0);
  CHECK(metrics::js_divergence({1, 0, 0}, {0, 0.5, 0.5}) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(std::abs(metrics::js_divergence({0.5, 0.5}, {1.0, 0.0}) - 0.311278) < 1e-6);
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int k = 0; k < 1000; ++k) {
    const std::size_t n = 2 + k % 30;
    std::vector<double> p(n), q(n);
    double sp = 0, sq = 0;
    for (std::size_t i = 0; i < n; ++i) {
      p[i] = u(rng) < 0.2 ? 0.0 : u(rng);
      q[i] = u(rng);
      sp += p[i];
      sq += q[i];
    }
    if (sp == 0.0) {
      p[0] = sp = 1.0;
    }
    for (std::size_t i = 0; i < n; ++i) {
      p[i] /= sp;
      q[i] /= sq;
    }
    const double d = metrics::js_divergence(p, q);
    CHECK(std::abs(d - brute_jsd(p, q)) < 1e-9);
    CHECK(d == metrics::js_divergence(q, p));
    CHECK(d >= 0.0);
    CHECK(d <= 1.0);
  }
  CHECK_THROWS_AS(metrics::js_divergence({1.0}, {0.5, 0.5}), std::invalid_argument);
  CHECK_THROWS_AS(metrics::js_divergence({-0.5, 1.5}, {0.5, 0.5}), std::invalid_argument);
}

TEST_CASE("histograms")
{
  auto h = metrics::feature_histogram(Feature::ValidAgents, 32);
  h.add({0, 3, 3, 40, -2});
  CHECK(h.counts().size() == 33);
  CHECK(h.counts()[0] == 2);
  CHECK(h.counts()[3] == 2);
  CHECK(h.counts()[32] == 1);
  double sum = 0;
  for (double p : h.probabilities()) {
    CHECK(p >= 0.0);
    sum += p;
  }
  CHECK(std::abs(sum - 1.0) < 1e-9);
  auto r = metrics::feature_histogram(Feature::CollisionRate, 32);
  r.add(1.0);
  CHECK(r.counts().back() == 1);
  CHECK_THROWS_AS(metrics::feature_histogram(Feature::TLTransition, 32), std::invalid_argument);
  CHECK_THROWS_AS(metrics::feature_from_name("nope"), std::invalid_argument);
  CHECK(metrics::feature_from_name("collision_rate") == Feature::CollisionRate);
}

TEST_CASE("sliding windows")
{
  CHECK(metrics::sliding_windows(91, 91, 91).size() == 1);
  CHECK(metrics::sliding_windows(600, 91, 91) == std::vector<int>{0, 91, 182, 273, 364, 455});
  CHECK(metrics::sliding_windows(92, 91, 1).size() == 2);
  CHECK_THROWS_AS(metrics::sliding_windows(90, 91, 91), std::invalid_argument);
}

TEST_CASE("window features")
{
  const auto map = road::generate_map(road::MapParams{});
  SUBCASE("empty window")
  {
    const auto w = metrics::extract(ego_only(91), map, 0, 91);
    CHECK(w.empty);
    CHECK(w.valid_agents == 0);
    CHECK(w.collision_rate == 0.0);
    CHECK(w.offroad_rate == 0.0);
    CHECK(w.values(Feature::AverageSpeed).empty());
  }
  SUBCASE("spawn archetype")
  {
    Scenario s = ego_only(91);
    s.agents.push_back(static_track(3, 45.0, 0.0, 30, 91));
    const auto w = metrics::extract(s, map, 0, 91);
    CHECK(w.valid_agents == 1);
    CHECK(w.entering_agents == 1);
    CHECK(w.exiting_agents == 0);
    REQUIRE(w.entering_distance.size() == 1);
    CHECK(w.entering_distance[0] == doctest::Approx(45.0));
    CHECK(w.offroad_rate == 0.0);
  }
  SUBCASE("removal, offroad and speed")
  {
    Scenario s = ego_only(91);
    AgentTrack a = static_track(4, 10.0, 2.0, 0, 91);
    for (int t = 0; t < 91; ++t) {
      a.steps[t].x = 10.0 + 0.5 * t;  // 5 m/s
      a.steps[t].valid = t < 60;
    }
    s.agents.push_back(a);
    s.agents.push_back(static_track(5, 40.0, 40.0, 0, 91));  // inside a block
    const auto w = metrics::extract(s, map, 0, 91);
    CHECK(w.valid_agents == 2);
    CHECK(w.exiting_agents == 1);
    CHECK(w.exiting_distance[0] == doctest::Approx(std::hypot(10.0 + 0.5 * 59, 2.0)));
    CHECK(w.offroad_rate == doctest::Approx(0.5));
    CHECK(w.average_speed == doctest::Approx(2.5));
  }
  SUBCASE("identical overlapping boxes both collide")
  {
    Scenario s = ego_only(91);
    s.agents.push_back(static_track(6, 30.0, 2.0, 0, 91));
    s.agents.push_back(static_track(7, 30.0, 2.0, 0, 91));
    s.agents.push_back(static_track(8, 50.0, 2.0, 0, 91));
    const auto w = metrics::extract(s, map, 0, 91);
    CHECK(w.collision_rate == doctest::Approx(2.0 / 3.0));
  }
  SUBCASE("red light violation")
  {
    const auto & sl = map.stop_lines[0];
    const auto & lane = map.lanes[sl.lane];
    const double h = lane.heading_at(lane.length());
    const geom::Vec2 end = lane.points.back();
    const geom::Vec2 dir{std::cos(h), std::sin(h)};
    for (auto state : {tensor::SignalState::SolidRed, tensor::SignalState::SolidGreen}) {
      Scenario s = ego_only(91);
      AgentTrack a = static_track(9, 0, 0, 0, 91, h);
      for (int t = 0; t < 91; ++t) {
        const geom::Vec2 p = end + dir * (0.5 * (t - 10) - 0.25);
        a.steps[t].x = p.x;
        a.steps[t].y = p.y;
      }
      s.agents.push_back(a);
      LightTrack l;
      l.id = sl.signal;
      l.head = sl.signal;
      for (int t = 0; t < 91; ++t) {
        l.steps.push_back({map.signals[sl.signal].x, map.signals[sl.signal].y, 5.0, state, true});
      }
      s.lights.push_back(l);
      const auto w = metrics::extract(s, map, 0, 91);
      CHECK(w.has_lights);
      CHECK(w.tl_violation == (state == tensor::SignalState::SolidRed ? 1.0 : 0.0));
    }
  }
}

TEST_CASE("transition matrices")
{
  const auto map = road::generate_map(road::MapParams{});
  synth::WorldScriptConfig cfg;
  cfg.spawn_rate = 0.0;
  cfg.visibility_range = 1e6;
  const Scenario s = synth::simulate_ground_truth(map, road::MapParams{}, cfg, 600);
  metrics::TransitionMatrix m;
  m.add(s);
  const auto p = m.probabilities();
  using S = tensor::SignalState;
  CHECK(p[int(S::SolidGreen)][int(S::SolidYellow)] == 1.0);
  CHECK(p[int(S::SolidYellow)][int(S::SolidRed)] == 1.0);
  CHECK(p[int(S::SolidRed)][int(S::SolidGreen)] == 1.0);
  for (int i = 0; i < 9; ++i) {
    CHECK(p[i][i] == 0.0);
    double row = 0;
    for (int j = 0; j < 9; ++j) {
      row += p[i][j];
    }
    CHECK((row == 0.0 || std::abs(row - 1.0) < 1e-12));
  }
  CHECK(metrics::transition_jsd(m, m) == 0.0);

  Scenario constant = ego_only(50);
  LightTrack l;
  for (int t = 0; t < 50; ++t) {
    l.steps.push_back({0, 0, 5, S::SolidRed, true});
  }
  constant.lights.push_back(l);
  metrics::TransitionMatrix z;
  z.add(constant);
  CHECK(z.total() == 0.0);
}

TEST_CASE("composite")
{
  using Row = std::array<std::optional<double>, metrics::kNumCompositeFeatures>;
  Row zeros, halves, table;
  zeros.fill(0.0);
  halves.fill(0.5);
  CHECK(metrics::composite(zeros) == 0.0);
  CHECK(metrics::composite(halves) == 0.5);
  const std::vector<double> printed{0.3132, 0.1947, 0.2059, 0.1620, 0.1549, 0.2428, 0.4361, 0.5908};
  for (std::size_t i = 0; i < printed.size(); ++i) {
    table[i] = printed[i];
  }
  double hand = 0;
  for (double v : printed) {
    hand += v;
  }
  CHECK(std::abs(metrics::composite(table) - hand / 8.0) < 1e-12);
  CHECK(std::abs(metrics::composite(table) - 0.2878) < 5e-4);
  Row partial = halves;
  partial[3].reset();
  bool flag = false;
  CHECK(metrics::composite(partial, &flag) == 0.5);
  CHECK(flag);
  CHECK_THROWS_AS(metrics::composite(Row{}), std::invalid_argument);
}

TEST_CASE("evaluate against itself and permutation invariance")
{
  road::MapParams mp;
  mp.seed = 2;
  const auto map = road::generate_map(mp);
  std::vector<Scenario> logs;
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    synth::WorldScriptConfig cfg;
    cfg.seed = seed;
    logs.push_back(synth::perceived(synth::simulate_ground_truth(map, mp, cfg, 91), {32, 8, 91}, 11));
  }
  const auto r = metrics::evaluate(logs, logs);
  for (int f = 0; f < metrics::kNumFeatures; ++f) {
    REQUIRE(r.jsd[f].has_value());
    CHECK(*r.jsd[f] < 1e-12);
  }
  REQUIRE(r.composite.has_value());
  CHECK(*r.composite < 1e-12);

  Scenario shuffled = logs[0];
  std::reverse(shuffled.agents.begin() + 1, shuffled.agents.end());
  const auto a = metrics::extract(logs[0], map, 0, 91);
  const auto b = metrics::extract(shuffled, map, 0, 91);
  CHECK(a.valid_agents == b.valid_agents);
  CHECK(a.entering_agents == b.entering_agents);
  CHECK(a.collision_rate == b.collision_rate);
  CHECK(a.average_speed == doctest::Approx(b.average_speed).epsilon(1e-12));

  // Traces without lights: TL metrics absent, composite still present.
  std::vector<Scenario> dark = logs;
  for (auto & s : dark) {
    s.lights.clear();
  }
  const auto d = metrics::evaluate(dark, logs);
  CHECK_FALSE(d.get(Feature::TLViolation).has_value());
  CHECK_FALSE(d.get(Feature::TLTransition).has_value());
  CHECK(d.composite.has_value());
  CHECK(metrics::format_table({{"dark", d}}).find("-") != std::string::npos);
  CHECK(metrics::to_json(d)["jsd"]["tl_transition"].is_null());
}

TEST_CASE("evaluate compares each window index with all reference windows")
{
  road::MapParams mp;
  mp.seed = 4;
  const auto map = road::generate_map(mp);
  auto log = [&](std::uint64_t seed, int steps) {
    synth::WorldScriptConfig cfg;
    cfg.seed = seed;
    return synth::perceived(synth::simulate_ground_truth(map, mp, cfg, steps), {32, 8, 91}, 11);
  };
  const std::vector<Scenario> sim = {log(1, 182), log(2, 182)};
  const std::vector<Scenario> ref = {log(3, 182), log(4, 91)};
  const metrics::MetricConfig cfg;
  const auto r = metrics::evaluate(sim, ref, cfg);
  CHECK(r.ref_windows == 3);
  CHECK(r.sim_windows == 4);

  for (Feature f : {Feature::ValidAgents, Feature::AverageSpeed}) {
    metrics::Histogram pooled = metrics::feature_histogram(f, cfg.max_agents);
    pooled.add(metrics::extract(ref[0], map, 0, 91).values(f));
    pooled.add(metrics::extract(ref[0], map, 91, 91).values(f));
    pooled.add(metrics::extract(ref[1], map, 0, 91).values(f));
    double expected = 0.0;
    for (int start : {0, 91}) {
      metrics::Histogram h = metrics::feature_histogram(f, cfg.max_agents);
      for (const auto & s : sim) {
        h.add(metrics::extract(s, map, start, 91).values(f));
      }
      expected += 0.5 * metrics::js_divergence(h.probabilities(cfg.eps), pooled.probabilities(cfg.eps));
    }
    REQUIRE(r.get(f).has_value());
    CHECK(*r.get(f) == doctest::Approx(expected).epsilon(1e-12));
  }
}
