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

#ifndef TWM__SYNTH_WORLD_HPP_
#define TWM__SYNTH_WORLD_HPP_

#include "twm/geometry.hpp"
#include "twm/road_graph.hpp"
#include "twm/scenario.hpp"
#include "twm/tensor_core.hpp"
#include "twm/train.hpp"

#include <json.hpp>

#include <cstdint>
#include <vector>

namespace twm::synth
{

struct WorldScriptConfig
{
  double spawn_rate = 0.1;         // vehicles per second per entry lane
  double pedestrian_ratio = 0.4;   // pedestrian rate per sidewalk entry, relative to spawn_rate
  double parked_ratio = 0.2;       // parked-car arrivals per lot, relative to spawn_rate
  double parked_lifetime_s = 60.0; // mean stay of a parked car
  double cyclist_fraction = 0.1;
  double large_vehicle_fraction = 0.12;
  double green_s = 5.0;
  double yellow_s = 2.0;
  double red_s = 5.0;
  bool occlusion = true;
  double visibility_range = 60.0;
  double warmup_s = 30.0;
  std::uint64_t seed = 0;

  /// Throws std::invalid_argument for negative rates or cycle phases shorter than one step.
  void validate() const;
};

nlohmann::json to_json(const WorldScriptConfig & c);
WorldScriptConfig world_config_from_json(const nlohmann::json & j);

/// Signal state of a head at an absolute simulation step (warmup included).
tensor::SignalState signal_state(
  const road::RoadGraph & map, const WorldScriptConfig & cfg, int head, long step, std::uint64_t offset_seed);

/// Scripted ground truth of `steps` recorded steps at 10 Hz.
Scenario simulate_ground_truth(const road::RoadGraph & map, const road::MapParams & map_params,
                               const WorldScriptConfig & cfg, int steps);

/// Visibility of every entity at one step. The ego (index `ego`) is always
/// visible; an entity is visible when within range and the segment from the
/// ego center to its center crosses no other agent's box.
struct Entity
{
  geom::Vec2 center;
  geom::Obb box;   // unused for signal heads
  bool occluder = true;
};
std::vector<Visibility> occlusion_visibility(
  const std::vector<Entity> & agents, std::size_t ego, const std::vector<geom::Vec2> & signals,
  std::vector<Visibility> * signal_visibility, double max_range, bool occlusion = true);

/// Slot assignment over a sequence of steps. candidates[t] lists (entity id,
/// distance to ego) visible at step t. Holders keep their slot until they have
/// been unseen for `reuse_gap` steps; newcomers take the lowest free slot,
/// nearest first; the rest are dropped at that step.
struct Candidate
{
  int id;
  double distance;
};
std::vector<std::vector<int>> assign_slots(
  const std::vector<std::vector<Candidate>> & candidates, int n_slots, int reuse_gap);

/// Slot tables of a scenario span: agents exclude the ego slot (slot k here is
/// tensor slot k + 1), lights use every light slot.
struct SlotTables
{
  std::vector<std::vector<int>> agents;
  std::vector<std::vector<int>> lights;
};
SlotTables scenario_slots(const Scenario & s, int start, int len, const tensor::TensorDims & dims, int reuse_gap);

struct ExportConfig
{
  tensor::TensorDims dims;
  int window_len = 91;
  int stride = 91;
  int history_len = 11;
  double context_radius = 80.0;
  int max_context_points = 256;
  tensor::NormConfig norm;
};

struct Window
{
  int start = 0;
  geom::Pose2 anchor;
  tensor::MultiTensor x;
  tensor::RoadContext context;
  std::vector<std::vector<int>> agent_slots;  // [step][slot] -> agent id or -1
  std::vector<std::vector<int>> light_slots;  // [step][slot] -> light id or -1
};

/// Windows re-centered on the ego pose at step start + history_len - 1.
/// Throws std::invalid_argument when window_len exceeds the scenario length.
std::vector<Window> export_windows(const Scenario & s, const road::RoadGraph & map, const ExportConfig & cfg);

/// The log as a perception-limited view: per step only entities that are
/// visible and hold one of the tensor slots stay valid.
Scenario perceived(const Scenario & s, const tensor::TensorDims & dims, int reuse_gap);

/// Counts of the four validity archetypes over the agents of a scenario.
struct ArchetypeCounts
{
  int spawn = 0;          // not present, then visible
  int occlusion = 0;      // visible, then occluded
  int disocclusion = 0;   // occluded, then visible
  int removal = 0;        // visible, then gone or out of range
};
ArchetypeCounts count_archetypes(const Scenario & s);

/// Training examples from a set of scenarios.
std::vector<train::Example> make_examples(
  const std::vector<Scenario> & scenarios, const road::RoadGraph & map, const ExportConfig & cfg);

}  // namespace twm::synth

#endif  // TWM__SYNTH_WORLD_HPP_
