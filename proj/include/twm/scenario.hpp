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

#ifndef TWM__SCENARIO_HPP_
#define TWM__SCENARIO_HPP_

#include "twm/road_graph.hpp"
#include "twm/tensor_core.hpp"

#include <json.hpp>

#include <cstdint>
#include <string>
#include <vector>

namespace twm
{

enum class Visibility : std::uint8_t { Visible = 0, OutOfRange = 1, Occluded = 2 };

struct AgentStep
{
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;
  double heading = 0.0;
  double speed = 0.0;
  bool valid = false;  // perceived by the ego (logs) or committed valid (rollouts)
  Visibility reason = Visibility::Visible;
};

/// One agent's lifetime. steps[k] describes simulation step birth + k.
struct AgentTrack
{
  int id = 0;
  tensor::AgentType type = tensor::AgentType::Car;
  double length = 4.5;
  double width = 2.0;
  double height = 1.75;
  int birth = 0;
  bool parked = false;
  std::vector<AgentStep> steps;

  int death() const { return birth + static_cast<int>(steps.size()); }
  bool alive_at(int t) const { return t >= birth && t < death(); }
  const AgentStep & at(int t) const { return steps[static_cast<std::size_t>(t - birth)]; }
};

struct LightStep
{
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;
  tensor::SignalState state = tensor::SignalState::Unknown;
  bool valid = false;
};

struct LightTrack
{
  int id = 0;
  int head = -1;  // matched map signal head, -1 when free-floating
  int birth = 0;
  std::vector<LightStep> steps;

  int death() const { return birth + static_cast<int>(steps.size()); }
  bool alive_at(int t) const { return t >= birth && t < death(); }
  const LightStep & at(int t) const { return steps[static_cast<std::size_t>(t - birth)]; }
};

/// Ground-truth log or committed rollout. Both share one JSON schema;
/// rollouts add a provenance block.
struct Scenario
{
  int steps = 0;
  double dt = 0.1;
  road::MapParams map;
  nlohmann::json world;  // generator settings (logs)
  int ego_id = 0;
  std::vector<AgentTrack> agents;
  std::vector<LightTrack> lights;
  nlohmann::json provenance;  // null for logs

  const AgentTrack * find_agent(int id) const;
  const AgentTrack & ego() const;
  /// Ego pose at a step (the ego is valid at every step).
  geom::Pose2 ego_pose(int t) const;
};

nlohmann::json to_json(const Scenario & s);
Scenario scenario_from_json(const nlohmann::json & j);
void save_scenario(const std::string & path, const Scenario & s);
Scenario load_scenario(const std::string & path);

}  // namespace twm

#endif  // TWM__SCENARIO_HPP_
