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

#include "twm/synth_world.hpp"

#include <doctest.h>

#include <cmath>
#include <numbers>
#include <set>
#include <stdexcept>

using namespace twm;
using synth::Candidate;
using synth::Entity;
using synth::WorldScriptConfig;
using tensor::SignalState;

namespace
{

road::MapParams small_map()
{
  road::MapParams p;
  p.rows = 2;
  p.cols = 2;
  p.seed = 5;
  return p;
}

Entity box_entity(double x, double y, double heading, double len, double wid)
{
  return {{x, y}, geom::Obb{{x, y}, heading, len, wid}, true};
}

// Ego parked at a fixed pose plus one car visible on steps [30, 91).
Scenario hand_scenario()
{
  Scenario s;
  s.steps = 91;
  AgentTrack ego;
  ego.id = 0;
  ego.type = tensor::AgentType::AV;
  for (int t = 0; t < 91; ++t) {
    AgentStep st;
    st.x = 100.0 + 0.5 * t;
    st.y = 50.0;
    st.heading = 0.5;
    st.valid = true;
    ego.steps.push_back(st);
  }
  AgentTrack car;
  car.id = 7;
  car.birth = 30;
  for (int t = 30; t < 91; ++t) {
    AgentStep st;
    st.x = 120.0;
    st.y = 60.0;
    st.heading = 1.0;
    st.valid = true;
    car.steps.push_back(st);
  }
  s.agents = {ego, car};
  return s;
}

}  // namespace

TEST_CASE("zero spawn rate leaves only the ego")
{
  const auto p = small_map();
  const auto map = road::generate_map(p);
  WorldScriptConfig cfg;
  cfg.spawn_rate = 0.0;
  const Scenario s = synth::simulate_ground_truth(map, p, cfg, 200);
  REQUIRE(s.agents.size() == 1);
  CHECK(s.agents[0].id == 0);
  CHECK(s.agents[0].birth == 0);
  CHECK(s.agents[0].death() == 200);
  for (const auto & st : s.agents[0].steps) {
    CHECK(st.valid);
  }
  CHECK(s.lights.size() == map.signals.size());
}

TEST_CASE("signal cycle has period 120 and only forward transitions")
{
  const auto map = road::generate_map(small_map());
  WorldScriptConfig cfg;
  cfg.green_s = 5;
  cfg.yellow_s = 2;
  cfg.red_s = 5;
  for (int h = 0; h < static_cast<int>(map.signals.size()); ++h) {
    int greens = 0;
    for (long t = 0; t < 480; ++t) {
      const auto a = synth::signal_state(map, cfg, h, t, 9);
      CHECK(a == synth::signal_state(map, cfg, h, t + 120, 9));
      greens += a == SignalState::SolidGreen;
      const auto b = synth::signal_state(map, cfg, h, t + 1, 9);
      if (a != b) {
        const bool ok = (a == SignalState::SolidGreen && b == SignalState::SolidYellow) ||
                        (a == SignalState::SolidYellow && b == SignalState::SolidRed) ||
                        (a == SignalState::SolidRed && b == SignalState::SolidGreen);
        CHECK(ok);
      }
    }
    CHECK(greens == 4 * 50);
  }
}

TEST_CASE("visibility: range, occlusion and the ego")
{
  const std::vector<geom::Vec2> none;
  // lone agent 10 m ahead
  {
    std::vector<Entity> e{box_entity(0, 0, 0, 4.5, 2), box_entity(10, 0, 0, 4.5, 2)};
    const auto v = synth::occlusion_visibility(e, 0, none, nullptr, 100.0);
    CHECK(v[0] == Visibility::Visible);
    CHECK(v[1] == Visibility::Visible);
  }
  // pedestrian behind a bus
  {
    std::vector<Entity> e{
      box_entity(0, 0, 0, 4.5, 2), box_entity(15, 0, 0, 12, 2.5), box_entity(25, 0, 0, 0.6, 0.6)};
    const auto v = synth::occlusion_visibility(e, 0, none, nullptr, 100.0);
    CHECK(v[1] == Visibility::Visible);
    CHECK(v[2] == Visibility::Occluded);
    const auto off = synth::occlusion_visibility(e, 0, none, nullptr, 100.0, false);
    CHECK(off[2] == Visibility::Visible);
    // Removing the bus makes the pedestrian visible again.
    std::vector<Entity> alone{e[0], e[2]};
    CHECK(synth::occlusion_visibility(alone, 0, none, nullptr, 100.0)[1] == Visibility::Visible);
  }
  // range cut, and signals are tested the same way
  {
    std::vector<Entity> e{box_entity(0, 0, 0, 4.5, 2), box_entity(150, 0, 0, 4.5, 2)};
    std::vector<Visibility> sv;
    const auto v = synth::occlusion_visibility(e, 0, {{50, 0}, {0, 101}}, &sv, 100.0);
    CHECK(v[1] == Visibility::OutOfRange);
    REQUIRE(sv.size() == 2);
    CHECK(sv[0] == Visibility::Visible);
    CHECK(sv[1] == Visibility::OutOfRange);
  }
}

TEST_CASE("ground truth simulation invariants")
{
  const auto p = small_map();
  const auto map = road::generate_map(p);
  WorldScriptConfig cfg;
  cfg.seed = 3;
  cfg.spawn_rate = 0.2;
  const Scenario s = synth::simulate_ground_truth(map, p, cfg, 1500);
  CHECK(to_json(s).dump() == to_json(synth::simulate_ground_truth(map, p, cfg, 1500)).dump());
  CHECK(s.agents.size() > 10);

  std::set<int> ids;
  int exited_vehicles = 0;
  int exited_peds = 0;
  for (const auto & a : s.agents) {
    CHECK(ids.insert(a.id).second);
    CHECK(a.birth <= a.death());
    const double vmax = a.type == tensor::AgentType::Pedestrian ? 2.0 : 20.0;
    for (int t = a.birth + 1; t < a.death(); ++t) {
      const auto & u = a.at(t - 1);
      const auto & w = a.at(t);
      CHECK(std::hypot(w.x - u.x, w.y - u.y) <= vmax * 0.1 + 1e-6);
      CHECK(w.heading >= -std::numbers::pi);
      CHECK(w.heading < std::numbers::pi);
    }
    if (a.id == 0 || a.parked || a.death() >= s.steps) {
      continue;
    }
    // The last recorded state is inside the map and the next one is not.
    const auto & last = a.steps.back();
    CHECK(map.inside_extent({last.x, last.y}, 1e-6));
    if (a.type == tensor::AgentType::Pedestrian) {
      const geom::Vec2 next{
        last.x + std::cos(last.heading) * last.speed * 0.1, last.y + std::sin(last.heading) * last.speed * 0.1};
      CHECK_FALSE(map.inside_extent(next));
      ++exited_peds;
    } else {
      const double to_edge = std::min(
        {last.x - map.extent_min.x, map.extent_max.x - last.x, last.y - map.extent_min.y,
         map.extent_max.y - last.y});
      CHECK(to_edge <= last.speed * 0.1 + 0.5 * 1.5 * 0.01 + 1e-6);
      ++exited_vehicles;
    }
  }
  CHECK(exited_vehicles > 0);
  CHECK(exited_peds > 0);
  for (const auto & st : s.ego().steps) {
    CHECK(st.valid);
  }
  const auto back = scenario_from_json(nlohmann::json::parse(to_json(s).dump()));
  CHECK(to_json(back).dump() == to_json(s).dump());
}

TEST_CASE("default world produces all four validity archetypes")
{
  const auto p = small_map();
  const auto map = road::generate_map(p);
  const Scenario s = synth::simulate_ground_truth(map, p, WorldScriptConfig{}, 910);
  const auto c = synth::count_archetypes(s);
  CHECK(c.spawn > 0);
  CHECK(c.occlusion > 0);
  CHECK(c.disocclusion > 0);
  CHECK(c.removal > 0);
}

TEST_CASE("slot assignment")
{
  // Three candidates, two slots: the farthest is dropped.
  std::vector<std::vector<Candidate>> c(1);
  c[0] = {{10, 30.0}, {11, 5.0}, {12, 10.0}};
  auto s = synth::assign_slots(c, 2, 3);
  CHECK(s[0] == std::vector<int>{11, 12});

  // A holder keeps its slot through a short gap and loses it after a long one.
  std::vector<std::vector<Candidate>> g(12);
  g[0] = {{1, 5.0}};
  g[2] = {{1, 5.0}, {2, 1.0}};
  g[10] = {{2, 1.0}};
  g[11] = {{1, 5.0}};
  s = synth::assign_slots(g, 1, 3);
  CHECK(s[0][0] == 1);
  CHECK(s[1][0] == -1);
  CHECK(s[2][0] == 1);
  CHECK(s[10][0] == 2);
  CHECK(s[11][0] == -1);

  // Random stress: no two visible candidates share a slot at a step.
  std::mt19937_64 rng(1);
  std::vector<std::vector<Candidate>> r(300);
  for (auto & step : r) {
    for (int id = 0; id < 20; ++id) {
      if (std::bernoulli_distribution(0.4)(rng)) {
        step.push_back({id, std::uniform_real_distribution<double>(0, 50)(rng)});
      }
    }
  }
  s = synth::assign_slots(r, 5, 4);
  for (const auto & row : s) {
    std::set<int> seen;
    for (int id : row) {
      if (id >= 0) {
        CHECK(seen.insert(id).second);
      }
    }
  }
}

TEST_CASE("export windows")
{
  const auto map = road::generate_map(small_map());
  const Scenario s = hand_scenario();
  synth::ExportConfig cfg;
  cfg.dims = {4, 2, 91};
  cfg.stride = 7;
  const auto w = synth::export_windows(s, map, cfg);
  REQUIRE(w.size() == 1);
  const auto & x = w[0].x;
  const int anchor = cfg.history_len - 1;
  CHECK(std::abs(x.agents.at(0, anchor, 0)) < 1e-12);
  CHECK(std::abs(x.agents.at(0, anchor, 1)) < 1e-12);
  CHECK(std::abs(x.agents.at(0, anchor, tensor::agent_ch::kHeading)) < 1e-12);
  const int v = x.agents.validity_channel();
  for (int t = 0; t < 91; ++t) {
    CHECK(x.agents.at(0, t, v) == 1.0);
    CHECK(x.agents.at(1, t, v) == (t >= 30 ? 1.0 : -1.0));
    if (t < 30) {
      for (int d = 0; d < v; ++d) {
        CHECK(x.agents.at(1, t, d) == 0.0);
      }
    }
    CHECK(x.agents.at(2, t, v) == -1.0);
  }
  CHECK(w[0].agent_slots[50][1] == 7);
  CHECK(!w[0].context.features.empty());

  cfg.window_len = 92;
  cfg.dims.timesteps = 92;
  CHECK_THROWS_AS(synth::export_windows(s, map, cfg), std::invalid_argument);
}

TEST_CASE("perceived applies slot limits")
{
  Scenario s = hand_scenario();
  AgentTrack far = s.agents[1];
  far.id = 8;
  far.steps.front().x = 400;  // farther at its first step
  for (auto & st : far.steps) {
    st.x = 200;
  }
  s.agents.push_back(far);
  const Scenario p = synth::perceived(s, {2, 1, 91}, 11);
  CHECK(p.find_agent(7)->at(40).valid);
  CHECK_FALSE(p.find_agent(8)->at(40).valid);
  const Scenario q = synth::perceived(s, {3, 1, 91}, 11);
  CHECK(q.find_agent(8)->at(40).valid);
}
