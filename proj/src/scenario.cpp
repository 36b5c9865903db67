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

#include "twm/scenario.hpp"

#include <fstream>
#include <stdexcept>

namespace twm
{

using nlohmann::json;

const AgentTrack * Scenario::find_agent(int id) const
{
  for (const auto & a : agents) {
    if (a.id == id) {
      return &a;
    }
  }
  return nullptr;
}

const AgentTrack & Scenario::ego() const
{
  const AgentTrack * e = find_agent(ego_id);
  if (e == nullptr) {
    throw std::runtime_error("scenario has no ego track");
  }
  return *e;
}

geom::Pose2 Scenario::ego_pose(int t) const
{
  const AgentTrack & e = ego();
  if (!e.alive_at(t)) {
    throw std::out_of_range("ego pose requested outside its track at step " + std::to_string(t));
  }
  const AgentStep & s = e.at(t);
  return {s.x, s.y, s.heading};
}

json to_json(const Scenario & s)
{
  json agents = json::array();
  for (const auto & a : s.agents) {
    json states = json::array();
    for (const auto & st : a.steps) {
      states.push_back({st.x, st.y, st.z, st.heading, st.speed, st.valid ? 1 : 0, static_cast<int>(st.reason)});
    }
    agents.push_back({
      {"id", a.id},
      {"type", tensor::to_string(a.type)},
      {"length", a.length},
      {"width", a.width},
      {"height", a.height},
      {"birth", a.birth},
      {"parked", a.parked},
      {"states", std::move(states)},
    });
  }
  json lights = json::array();
  for (const auto & l : s.lights) {
    json states = json::array();
    for (const auto & st : l.steps) {
      states.push_back({st.x, st.y, st.z, tensor::to_string(st.state), st.valid ? 1 : 0});
    }
    lights.push_back({{"id", l.id}, {"head", l.head}, {"birth", l.birth}, {"states", std::move(states)}});
  }
  json j = {
    {"format", "twm-scenario"},
    {"version", 1},
    {"steps", s.steps},
    {"dt", s.dt},
    {"map", road::to_json(s.map)},
    {"world", s.world},
    {"ego_id", s.ego_id},
    {"agents", std::move(agents)},
    {"lights", std::move(lights)},
  };
  if (!s.provenance.is_null()) {
    j["provenance"] = s.provenance;
  }
  return j;
}

Scenario scenario_from_json(const json & j)
{
  if (j.value("format", "") != "twm-scenario" || j.value("version", 0) != 1) {
    throw std::runtime_error("not a twm-scenario version 1 document");
  }
  Scenario s;
  s.steps = j.at("steps").get<int>();
  s.dt = j.at("dt").get<double>();
  s.map = road::map_params_from_json(j.at("map"));
  s.world = j.value("world", json());
  s.ego_id = j.at("ego_id").get<int>();
  for (const auto & aj : j.at("agents")) {
    AgentTrack a;
    a.id = aj.at("id").get<int>();
    a.type = tensor::agent_type_from_string(aj.at("type").get<std::string>());
    a.length = aj.at("length").get<double>();
    a.width = aj.at("width").get<double>();
    a.height = aj.at("height").get<double>();
    a.birth = aj.at("birth").get<int>();
    a.parked = aj.value("parked", false);
    for (const auto & st : aj.at("states")) {
      AgentStep x;
      x.x = st.at(0).get<double>();
      x.y = st.at(1).get<double>();
      x.z = st.at(2).get<double>();
      x.heading = st.at(3).get<double>();
      x.speed = st.at(4).get<double>();
      x.valid = st.at(5).get<int>() != 0;
      x.reason = static_cast<Visibility>(st.at(6).get<int>());
      a.steps.push_back(x);
    }
    s.agents.push_back(std::move(a));
  }
  for (const auto & lj : j.at("lights")) {
    LightTrack l;
    l.id = lj.at("id").get<int>();
    l.head = lj.at("head").get<int>();
    l.birth = lj.at("birth").get<int>();
    for (const auto & st : lj.at("states")) {
      LightStep x;
      x.x = st.at(0).get<double>();
      x.y = st.at(1).get<double>();
      x.z = st.at(2).get<double>();
      x.state = tensor::signal_state_from_string(st.at(3).get<std::string>());
      x.valid = st.at(4).get<int>() != 0;
      l.steps.push_back(x);
    }
    s.lights.push_back(std::move(l));
  }
  if (j.contains("provenance")) {
    s.provenance = j.at("provenance");
  }
  return s;
}

void save_scenario(const std::string & path, const Scenario & s)
{
  std::ofstream os(path);
  if (!os) {
    throw std::runtime_error("cannot write " + path);
  }
  os << to_json(s).dump() << '\n';
  if (!os) {
    throw std::runtime_error("write failed: " + path);
  }
}

Scenario load_scenario(const std::string & path)
{
  std::ifstream is(path);
  if (!is) {
    throw std::runtime_error("cannot read " + path);
  }
  try {
    return scenario_from_json(json::parse(is));
  } catch (const json::exception & e) {
    throw std::runtime_error(path + ": " + e.what());
  }
}

}  // namespace twm
