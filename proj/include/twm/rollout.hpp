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

#ifndef TWM__ROLLOUT_HPP_
#define TWM__ROLLOUT_HPP_

#include "twm/diffusion.hpp"
#include "twm/idm.hpp"
#include "twm/nn/denoiser.hpp"
#include "twm/road_graph.hpp"
#include "twm/scenario.hpp"
#include "twm/tensor_core.hpp"

#include <json.hpp>

#include <cstdint>
#include <map>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace twm::rollout
{

/// One agent slot at one step, world frame. `prob` is the predicted validity
/// probability on controller output; committed steps carry `valid` and `id`.
struct AgentSlot
{
  bool valid = false;
  double prob = 0.0;
  int id = -1;
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;
  double heading = 0.0;
  double length = 4.5;
  double width = 2.0;
  double height = 1.75;
  tensor::AgentType type = tensor::AgentType::Car;
};

struct LightSlot
{
  bool valid = false;
  double prob = 0.0;
  int id = -1;
  int head = -1;  // snapped map signal head, -1 when free-floating
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;
  tensor::SignalState state = tensor::SignalState::Unknown;
};

struct WorldStep
{
  std::vector<AgentSlot> agents;  // slot 0 is the ego
  std::vector<LightSlot> lights;
};

struct ControllerInput
{
  std::vector<WorldStep> history;  // last history_len committed steps, oldest first
  geom::Pose2 frame;               // ego pose at the last history step
  int step = 0;                    // absolute index of the first predicted step
  int horizon = 0;                 // number of steps to predict
  const road::RoadGraph * map = nullptr;
  const std::vector<road::ContextPoint> * context_points = nullptr;
};

/// Produces the next `horizon` steps for every slot. The engine keeps only the
/// channels of the controller's role.
class Controller
{
public:
  virtual ~Controller() = default;
  virtual std::string name() const = 0;
  virtual std::vector<WorldStep> predict(const ControllerInput & in, std::mt19937_64 & rng) = 0;
};

struct FrameSettings
{
  tensor::TensorDims dims;
  tensor::NormConfig norm;
  int history_len = 11;
  double context_radius = 80.0;
  int max_context_points = 256;
};

/// Rigidly transform `history` into the frame and normalize it into the first
/// history.size() steps of a tensor; later steps are invalid.
tensor::MultiTensor recenter(const std::vector<WorldStep> & history, const geom::Pose2 & frame,
                             const tensor::TensorDims & dims, const tensor::NormConfig & norm);

/// Inverse of recenter for every step of a tensor. Validity probabilities are
/// decoded into `prob`, `valid` is prob >= 0.5.
std::vector<WorldStep> uncenter(const tensor::MultiTensor & x, const geom::Pose2 & frame,
                                const tensor::NormConfig & norm);

/// Sampled continuation of the history with a trained denoiser.
class DiffusionController : public Controller
{
public:
  DiffusionController(nn::DenoiserNet<float> & net, const FrameSettings & frame, const diffusion::SamplerConfig & sampler,
                      std::string name = "diffusion");
  std::string name() const override { return name_; }
  std::vector<WorldStep> predict(const ControllerInput & in, std::mt19937_64 & rng) override;

private:
  nn::NetDenoiser<float> denoiser_;
  FrameSettings frame_;
  diffusion::SamplerConfig sampler_;
  std::string name_;
};

struct IdmSettings
{
  idm::IDMParams params;
  double cyclist_v0 = 5.0;
  double max_projection_dist = 5.0;
  int route_lanes = 32;
};

/// Lane-following IDM for every agent that projects onto the lane graph;
/// others move at constant velocity. Validity and light states are frozen at
/// their last committed values. Routes are cached per agent id.
class IdmController : public Controller
{
public:
  explicit IdmController(const IdmSettings & settings = {}, std::string name = "idm");
  std::string name() const override { return name_; }
  std::vector<WorldStep> predict(const ControllerInput & in, std::mt19937_64 & rng) override;

private:
  IdmSettings settings_;
  std::string name_;
  std::map<int, std::vector<int>> routes_;
};

/// Keeps every agent's last committed validity and optionally marks all
/// future lights invalid.
class FrozenValidity : public Controller
{
public:
  FrozenValidity(Controller & inner, bool invalidate_lights);
  std::string name() const override;
  std::vector<WorldStep> predict(const ControllerInput & in, std::mt19937_64 & rng) override;

private:
  Controller & inner_;
  bool invalidate_lights_;
};

struct RolloutConfig
{
  int n_rollout_steps = 600;
  int n_replan_steps = 40;
  int history_len = 11;
  double validity_threshold = 0.5;
  tensor::TensorDims dims;
  std::uint64_t world_seed = 1;
  std::uint64_t planner_seed = 2;
  double light_snap_radius = 5.0;

  /// Throws std::invalid_argument on inconsistent settings.
  void validate() const;
};

class RolloutError : public std::runtime_error
{
public:
  RolloutError(const std::string & what, int step) : std::runtime_error(what), step_(step) {}
  int step() const { return step_; }

private:
  int step_;
};

struct IntervalRecord
{
  int start = 0;
  int committed = 0;
  int entering = 0;
  int exiting = 0;
  double world_ms = 0.0;
  double planner_ms = 0.0;
};

struct RolloutTrace
{
  RolloutConfig config;
  std::string world_name;
  std::string planner_name;
  std::vector<WorldStep> steps;
  std::vector<IntervalRecord> intervals;
  int ego_continuity_violations = 0;
  int free_floating_lights = 0;
};

/// Assigns ids from committed validity: a slot that turns valid after being
/// invalid for at least `reuse_gap` steps (or never used) starts a new agent.
class ValidityCommitter
{
public:
  ValidityCommitter(int agent_slots, int light_slots, int reuse_gap);
  /// Threshold `prob` into `valid` and fill ids. Returns entering / exiting
  /// agent counts for the step.
  std::pair<int, int> commit(WorldStep & step, double threshold);

private:
  struct Book
  {
    int id = -1;
    int generation = 0;
    int invalid_run = 0;
    bool was_valid = false;
  };
  int reuse_gap_;
  std::vector<Book> agents_;
  std::vector<Book> lights_;
};

/// Threshold a validity probability (ties count as valid).
inline bool commit_validity(double prob, double threshold = 0.5) { return prob >= threshold; }

/// Slot view of the first `steps` steps of a scenario.
std::vector<WorldStep> scenario_prefix(const Scenario & s, int steps, const tensor::TensorDims & dims, int reuse_gap);

/// Closed-loop rollout starting from the first history_len steps of `init`.
RolloutTrace rollout(Controller & world_model, Controller & planner, const Scenario & init,
                     const road::RoadGraph & map, const RolloutConfig & cfg);

/// Number of replan intervals for a configuration.
int interval_count(const RolloutConfig & cfg);

/// Scenario view of a trace (ids become tracks). Provenance carries the
/// configuration and controller names; wall times stay out of it.
Scenario to_scenario(const RolloutTrace & trace, const road::MapParams & map_params);

/// Wall-clock timings, kept apart so traces stay byte-identical across runs.
nlohmann::json timing_json(const RolloutTrace & trace);

nlohmann::json to_json(const RolloutConfig & c);
RolloutConfig rollout_config_from_json(const nlohmann::json & j);

}  // namespace twm::rollout

#endif  // TWM__ROLLOUT_HPP_
