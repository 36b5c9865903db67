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

#include "twm/rollout.hpp"

#include "twm/synth_world.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>

namespace twm::rollout
{

using nlohmann::json;
using tensor::AgentType;

namespace
{

constexpr double kDt = 0.1;

bool finite_pose(const AgentSlot & a)
{
  return std::isfinite(a.x) && std::isfinite(a.y) && std::isfinite(a.z) && std::isfinite(a.heading);
}

geom::Pose2 ego_pose(const WorldStep & s)
{
  const auto & e = s.agents.at(0);
  return {e.x, e.y, e.heading};
}

}  // namespace

// --------------------------------------------------------------- framing

tensor::MultiTensor recenter(const std::vector<WorldStep> & history, const geom::Pose2 & frame,
                             const tensor::TensorDims & dims, const tensor::NormConfig & norm)
{
  if (static_cast<int>(history.size()) > dims.timesteps) {
    throw std::invalid_argument("recenter: history longer than the tensor");
  }
  tensor::RawScene raw(dims);
  for (int t = 0; t < static_cast<int>(history.size()); ++t) {
    const auto & step = history[t];
    if (static_cast<int>(step.agents.size()) != dims.agents || static_cast<int>(step.lights.size()) != dims.lights) {
      throw std::invalid_argument("recenter: slot count does not match the tensor dims");
    }
    for (int e = 0; e < dims.agents; ++e) {
      const auto & a = step.agents[e];
      if (!a.valid) {
        continue;
      }
      auto & f = raw.agent(e, t);
      const geom::Vec2 p = geom::to_frame(frame, {a.x, a.y});
      f.x = p.x;
      f.y = p.y;
      f.z = a.z;
      f.heading = geom::wrap_angle(a.heading - frame.heading);
      f.length = a.length;
      f.width = a.width;
      f.height = a.height;
      f.type = a.type;
      f.valid = true;
    }
    for (int e = 0; e < dims.lights; ++e) {
      const auto & l = step.lights[e];
      if (!l.valid) {
        continue;
      }
      auto & f = raw.light(e, t);
      const geom::Vec2 p = geom::to_frame(frame, {l.x, l.y});
      f.x = p.x;
      f.y = p.y;
      f.z = l.z;
      f.state = l.state;
      f.valid = true;
    }
  }
  return tensor::normalize(raw, norm);
}

std::vector<WorldStep> uncenter(const tensor::MultiTensor & x, const geom::Pose2 & frame,
                                const tensor::NormConfig & norm)
{
  const tensor::RawScene raw = tensor::denormalize(x, norm);
  const auto dims = raw.dims;
  const int av = x.agents.validity_channel();
  const int lv = x.lights.validity_channel();
  std::vector<WorldStep> out(static_cast<std::size_t>(dims.timesteps));
  for (int t = 0; t < dims.timesteps; ++t) {
    auto & step = out[t];
    step.agents.resize(static_cast<std::size_t>(dims.agents));
    step.lights.resize(static_cast<std::size_t>(dims.lights));
    for (int e = 0; e < dims.agents; ++e) {
      const auto & f = raw.agent(e, t);
      auto & a = step.agents[e];
      const geom::Vec2 p = geom::from_frame(frame, {f.x, f.y});
      a.x = p.x;
      a.y = p.y;
      a.z = f.z;
      a.heading = geom::wrap_angle(f.heading + frame.heading);
      a.length = f.length;
      a.width = f.width;
      a.height = f.height;
      a.type = f.type;
      a.prob = tensor::validity_prob(x.agents.at(e, t, av));
      a.valid = commit_validity(a.prob);
    }
    for (int e = 0; e < dims.lights; ++e) {
      const auto & f = raw.light(e, t);
      auto & l = step.lights[e];
      const geom::Vec2 p = geom::from_frame(frame, {f.x, f.y});
      l.x = p.x;
      l.y = p.y;
      l.z = f.z;
      l.state = f.state;
      l.prob = tensor::validity_prob(x.lights.at(e, t, lv));
      l.valid = commit_validity(l.prob);
    }
  }
  return out;
}

// ---------------------------------------------------------- controllers

DiffusionController::DiffusionController(nn::DenoiserNet<float> & net, const FrameSettings & frame,
                                         const diffusion::SamplerConfig & sampler, std::string name)
  : denoiser_(net), frame_(frame), sampler_(sampler), name_(std::move(name))
{
  if (!(net.config().dims == frame.dims)) {
    throw std::invalid_argument("DiffusionController: network dims differ from the frame dims");
  }
}

std::vector<WorldStep> DiffusionController::predict(const ControllerInput & in, std::mt19937_64 & rng)
{
  const int h = static_cast<int>(in.history.size());
  if (h + in.horizon > frame_.dims.timesteps) {
    throw std::invalid_argument("DiffusionController: history plus horizon exceeds the window length");
  }
  const tensor::MultiTensor x = recenter(in.history, in.frame, frame_.dims, frame_.norm);
  tensor::RoadContext context;
  if (in.context_points != nullptr) {
    context = road::crop_context(
      *in.context_points, in.frame, frame_.context_radius, frame_.max_context_points, frame_.norm.position_scale);
  }
  const auto cond = tensor::make_conditioning(x, tensor::history_mask(frame_.dims, h), std::move(context));
  const tensor::MultiTensor sample = diffusion::sample(denoiser_, cond, sampler_, rng);
  auto steps = uncenter(sample, in.frame, frame_.norm);
  return {steps.begin() + h, steps.begin() + h + in.horizon};
}

IdmController::IdmController(const IdmSettings & settings, std::string name)
  : settings_(settings), name_(std::move(name))
{
  settings_.params.validate();
}

std::vector<WorldStep> IdmController::predict(const ControllerInput & in, std::mt19937_64 & rng)
{
  if (in.history.empty() || in.map == nullptr) {
    throw std::invalid_argument("IdmController: needs history and a map");
  }
  const road::RoadGraph & map = *in.map;
  const WorldStep & last = in.history.back();
  const WorldStep * prev = in.history.size() > 1 ? &in.history[in.history.size() - 2] : nullptr;

  // Frozen signal states keyed by map head.
  std::map<int, tensor::SignalState> heads;
  for (const auto & l : last.lights) {
    if (l.valid && l.head >= 0) {
      heads[l.head] = l.state;
    }
  }
  const idm::SignalLookup lookup = [&heads](int head) {
    auto it = heads.find(head);
    return it == heads.end() ? tensor::SignalState::Unknown : it->second;
  };

  struct Free
  {
    std::size_t slot;
    double vx, vy;
  };
  std::vector<idm::LaneAgent> lane_agents;
  std::vector<std::size_t> lane_slots;
  std::vector<Free> free_agents;
  for (std::size_t e = 0; e < last.agents.size(); ++e) {
    const auto & a = last.agents[e];
    if (!a.valid) {
      continue;
    }
    double speed = 0.0;
    if (prev != nullptr && prev->agents[e].valid && prev->agents[e].id == a.id) {
      speed = std::hypot(a.x - prev->agents[e].x, a.y - prev->agents[e].y) / kDt;
    }
    int lane = -1;
    double s = 0.0;
    const bool on_lane = a.type != AgentType::Pedestrian &&
                         idm::project_to_lane(map, {a.x, a.y}, a.heading, settings_.max_projection_dist, lane, s);
    if (!on_lane) {
      free_agents.push_back({e, speed * std::cos(a.heading), speed * std::sin(a.heading)});
      continue;
    }
    auto & route = routes_[a.id];
    auto pos = std::find(route.begin(), route.end(), lane);
    if (pos == route.end()) {
      route = idm::route_search(map, lane, rng, settings_.route_lanes, e == 0);
      pos = route.begin();
    }
    idm::LaneAgent la;
    la.id = a.id;
    la.route = route;
    la.index = static_cast<std::size_t>(pos - route.begin());
    la.s = s;
    la.v = speed;
    la.length = a.length;
    la.params = settings_.params;
    if (a.type == AgentType::Cyclist) {
      la.params.v0 = settings_.cyclist_v0;
    }
    la.hold_at_end = true;
    lane_agents.push_back(std::move(la));
    lane_slots.push_back(e);
  }

  std::vector<WorldStep> out;
  out.reserve(static_cast<std::size_t>(in.horizon));
  WorldStep cur = last;
  for (auto & a : cur.agents) {
    a.prob = a.valid ? 1.0 : 0.0;
  }
  for (auto & l : cur.lights) {
    l.prob = l.valid ? 1.0 : 0.0;
  }
  for (int k = 0; k < in.horizon; ++k) {
    idm::idm_step(lane_agents, map, lookup, kDt);
    for (std::size_t i = 0; i < lane_agents.size(); ++i) {
      auto & a = cur.agents[lane_slots[i]];
      const geom::Vec2 p = lane_agents[i].position(map);
      a.x = p.x;
      a.y = p.y;
      a.heading = geom::wrap_angle(lane_agents[i].heading(map));
    }
    for (const auto & f : free_agents) {
      auto & a = cur.agents[f.slot];
      a.x += f.vx * kDt;
      a.y += f.vy * kDt;
    }
    out.push_back(cur);
  }
  return out;
}

FrozenValidity::FrozenValidity(Controller & inner, bool invalidate_lights)
  : inner_(inner), invalidate_lights_(invalidate_lights)
{
}

std::string FrozenValidity::name() const { return "frozen(" + inner_.name() + ")"; }

std::vector<WorldStep> FrozenValidity::predict(const ControllerInput & in, std::mt19937_64 & rng)
{
  auto out = inner_.predict(in, rng);
  const WorldStep & last = in.history.back();
  for (auto & step : out) {
    for (std::size_t e = 0; e < step.agents.size() && e < last.agents.size(); ++e) {
      step.agents[e].prob = last.agents[e].valid ? 1.0 : 0.0;
      step.agents[e].valid = last.agents[e].valid;
    }
    if (invalidate_lights_) {
      for (auto & l : step.lights) {
        l.prob = 0.0;
        l.valid = false;
      }
    }
  }
  return out;
}

// ------------------------------------------------------------- engine

void RolloutConfig::validate() const
{
  if (history_len < 1 || history_len >= dims.timesteps) {
    throw std::invalid_argument("rollout: history_len must be in [1, T)");
  }
  if (n_replan_steps < 1 || n_replan_steps > dims.timesteps - history_len) {
    throw std::invalid_argument("rollout: n_replan_steps must be in [1, T - history_len]");
  }
  if (n_rollout_steps < history_len) {
    throw std::invalid_argument("rollout: n_rollout_steps must be >= history_len");
  }
  if (!(validity_threshold > 0.0 && validity_threshold < 1.0)) {
    throw std::invalid_argument("rollout: validity threshold must lie in (0, 1)");
  }
  if (world_seed == planner_seed) {
    throw std::invalid_argument("rollout: world and planner seeds must differ");
  }
}

int interval_count(const RolloutConfig & cfg)
{
  const int remaining = cfg.n_rollout_steps - cfg.history_len;
  return remaining <= 0 ? 0 : (remaining + cfg.n_replan_steps - 1) / cfg.n_replan_steps;
}

ValidityCommitter::ValidityCommitter(int agent_slots, int light_slots, int reuse_gap)
  : reuse_gap_(reuse_gap),
    agents_(static_cast<std::size_t>(agent_slots)),
    lights_(static_cast<std::size_t>(light_slots))
{
}

std::pair<int, int> ValidityCommitter::commit(WorldStep & step, double threshold)
{
  const int n_agents = static_cast<int>(agents_.size());
  int entering = 0;
  int exiting = 0;
  for (int e = 0; e < n_agents; ++e) {
    auto & a = step.agents[e];
    auto & b = agents_[e];
    a.valid = e == 0 || commit_validity(a.prob, threshold);
    if (a.valid) {
      if (e == 0) {
        b.id = 0;
      } else if (b.id < 0 || b.invalid_run >= reuse_gap_) {
        b.id = (++b.generation) * n_agents + e;
      }
      if (!b.was_valid && e > 0) {
        ++entering;
      }
      b.invalid_run = 0;
      a.id = b.id;
    } else {
      if (b.was_valid) {
        ++exiting;
      }
      ++b.invalid_run;
      a.id = -1;
    }
    b.was_valid = a.valid;
  }
  for (std::size_t e = 0; e < lights_.size(); ++e) {
    auto & l = step.lights[e];
    auto & b = lights_[e];
    l.valid = commit_validity(l.prob, threshold);
    if (l.valid) {
      if (l.head >= 0) {
        l.id = l.head;
      } else {
        if (!b.was_valid) {
          b.id = 100000 + static_cast<int>(e) * 10000 + (++b.generation);
        }
        l.id = b.id;
      }
    } else {
      l.id = -1;
    }
    b.was_valid = l.valid && l.head < 0;
  }
  return {entering, exiting};
}

std::vector<WorldStep> scenario_prefix(const Scenario & s, int steps, const tensor::TensorDims & dims, int reuse_gap)
{
  if (steps > s.steps) {
    throw std::invalid_argument("scenario_prefix: scenario is shorter than the prefix");
  }
  const auto tables = synth::scenario_slots(s, 0, steps, dims, reuse_gap);
  std::map<int, const AgentTrack *> by_id;
  for (const auto & a : s.agents) {
    by_id[a.id] = &a;
  }
  std::map<int, const LightTrack *> light_by_id;
  for (const auto & l : s.lights) {
    light_by_id[l.id] = &l;
  }
  auto fill = [](AgentSlot & slot, const AgentTrack & a, int t) {
    const auto & st = a.at(t);
    slot.valid = true;
    slot.prob = 1.0;
    slot.id = a.id;
    slot.x = st.x;
    slot.y = st.y;
    slot.z = st.z;
    slot.heading = st.heading;
    slot.length = a.length;
    slot.width = a.width;
    slot.height = a.height;
    slot.type = a.type;
  };
  std::vector<WorldStep> out(static_cast<std::size_t>(steps));
  for (int t = 0; t < steps; ++t) {
    auto & step = out[t];
    step.agents.resize(static_cast<std::size_t>(dims.agents));
    step.lights.resize(static_cast<std::size_t>(dims.lights));
    fill(step.agents[0], s.ego(), t);
    step.agents[0].type = AgentType::AV;
    for (int k = 0; k + 1 < dims.agents; ++k) {
      const int id = tables.agents[t][k];
      if (id >= 0) {
        fill(step.agents[k + 1], *by_id.at(id), t);
      }
    }
    for (int k = 0; k < dims.lights; ++k) {
      const int id = tables.lights[t][k];
      if (id < 0) {
        continue;
      }
      const auto * track = light_by_id.at(id);
      const auto & st = track->at(t);
      auto & l = step.lights[k];
      l.valid = true;
      l.prob = 1.0;
      l.id = id;
      l.head = track->head;
      l.x = st.x;
      l.y = st.y;
      l.z = st.z;
      l.state = st.state;
    }
  }
  return out;
}

namespace
{

void snap_lights(WorldStep & step, const road::RoadGraph & map, double radius, int & free_floating)
{
  for (auto & l : step.lights) {
    l.head = -1;
    if (!commit_validity(l.prob)) {
      continue;
    }
    double best = radius;
    for (const auto & h : map.signals) {
      const double d = std::hypot(l.x - h.x, l.y - h.y);
      if (d <= best) {
        best = d;
        l.head = h.id;
      }
    }
    if (l.head >= 0) {
      const auto & h = map.signals[l.head];
      l.x = h.x;
      l.y = h.y;
      l.z = h.z;
    } else {
      ++free_floating;
    }
  }
}

double elapsed_ms(std::chrono::steady_clock::time_point since)
{
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - since).count();
}

void check_shape(const std::vector<WorldStep> & out, const RolloutConfig & cfg, const std::string & who, int step)
{
  if (static_cast<int>(out.size()) != cfg.n_replan_steps) {
    throw RolloutError(
      who + " returned " + std::to_string(out.size()) + " steps, expected " + std::to_string(cfg.n_replan_steps), step);
  }
  for (const auto & s : out) {
    if (static_cast<int>(s.agents.size()) != cfg.dims.agents || static_cast<int>(s.lights.size()) != cfg.dims.lights) {
      throw RolloutError(who + " returned the wrong number of slots", step);
    }
  }
}

}  // namespace

RolloutTrace rollout(Controller & world_model, Controller & planner, const Scenario & init,
                     const road::RoadGraph & map, const RolloutConfig & cfg)
{
  cfg.validate();
  RolloutTrace trace;
  trace.config = cfg;
  trace.world_name = world_model.name();
  trace.planner_name = planner.name();

  const int h = cfg.history_len;
  ValidityCommitter committer(cfg.dims.agents, cfg.dims.lights, h);
  for (auto & step : scenario_prefix(init, h, cfg.dims, h)) {
    committer.commit(step, cfg.validity_threshold);
    trace.steps.push_back(std::move(step));
  }
  if (cfg.n_rollout_steps == h) {
    return trace;
  }

  const auto points = road::context_points(map);
  std::mt19937_64 world_rng(cfg.world_seed);
  std::mt19937_64 planner_rng(cfg.planner_seed);
  for (int start = h; start < cfg.n_rollout_steps; start += cfg.n_replan_steps) {
    ControllerInput in;
    in.history.assign(trace.steps.end() - h, trace.steps.end());
    in.frame = ego_pose(in.history.back());
    in.step = start;
    in.horizon = cfg.n_replan_steps;
    in.map = &map;
    in.context_points = &points;

    IntervalRecord rec;
    rec.start = start;
    auto t0 = std::chrono::steady_clock::now();
    const auto ego_out = planner.predict(in, planner_rng);
    rec.planner_ms = elapsed_ms(t0);
    check_shape(ego_out, cfg, "planner", start);
    t0 = std::chrono::steady_clock::now();
    const auto world_out = world_model.predict(in, world_rng);
    rec.world_ms = elapsed_ms(t0);
    check_shape(world_out, cfg, "world model", start);

    const int n = std::min(cfg.n_replan_steps, cfg.n_rollout_steps - start);
    for (int k = 0; k < n; ++k) {
      WorldStep step = world_out[k];
      step.agents[0] = ego_out[k].agents[0];
      step.agents[0].type = AgentType::AV;
      step.agents[0].prob = 1.0;
      snap_lights(step, map, cfg.light_snap_radius, trace.free_floating_lights);
      const auto [entering, exiting] = committer.commit(step, cfg.validity_threshold);
      rec.entering += entering;
      rec.exiting += exiting;
      for (const auto & a : step.agents) {
        if (a.valid && !finite_pose(a)) {
          throw RolloutError("non-finite committed pose at step " + std::to_string(start + k), start + k);
        }
      }
      const auto & prev_ego = trace.steps.back().agents[0];
      if (std::hypot(step.agents[0].x - prev_ego.x, step.agents[0].y - prev_ego.y) > 30.0 * kDt + 0.5) {
        ++trace.ego_continuity_violations;
      }
      trace.steps.push_back(std::move(step));
    }
    rec.committed = n;
    trace.intervals.push_back(rec);
  }
  return trace;
}

// --------------------------------------------------------- serialization

json to_json(const RolloutConfig & c)
{
  return {
    {"n_rollout_steps", c.n_rollout_steps},
    {"n_replan_steps", c.n_replan_steps},
    {"history_len", c.history_len},
    {"validity_threshold", c.validity_threshold},
    {"dims", {{"agents", c.dims.agents}, {"lights", c.dims.lights}, {"timesteps", c.dims.timesteps}}},
    {"world_seed", c.world_seed},
    {"planner_seed", c.planner_seed},
    {"light_snap_radius", c.light_snap_radius},
  };
}

RolloutConfig rollout_config_from_json(const json & j)
{
  RolloutConfig c;
  c.n_rollout_steps = j.value("n_rollout_steps", c.n_rollout_steps);
  c.n_replan_steps = j.value("n_replan_steps", c.n_replan_steps);
  c.history_len = j.value("history_len", c.history_len);
  c.validity_threshold = j.value("validity_threshold", c.validity_threshold);
  if (j.contains("dims")) {
    const auto & d = j.at("dims");
    c.dims.agents = d.value("agents", c.dims.agents);
    c.dims.lights = d.value("lights", c.dims.lights);
    c.dims.timesteps = d.value("timesteps", c.dims.timesteps);
  }
  c.world_seed = j.value("world_seed", c.world_seed);
  c.planner_seed = j.value("planner_seed", c.planner_seed);
  c.light_snap_radius = j.value("light_snap_radius", c.light_snap_radius);
  c.validate();
  return c;
}

Scenario to_scenario(const RolloutTrace & trace, const road::MapParams & map_params)
{
  Scenario s;
  s.steps = static_cast<int>(trace.steps.size());
  s.dt = kDt;
  s.map = map_params;
  s.ego_id = 0;

  // Tracks span first to last valid step of an id; gaps keep the last pose.
  std::map<int, AgentTrack> agents;
  std::map<int, int> last_valid;
  for (int t = 0; t < s.steps; ++t) {
    for (const auto & a : trace.steps[t].agents) {
      if (!a.valid) {
        continue;
      }
      auto it = agents.find(a.id);
      if (it == agents.end()) {
        AgentTrack tr;
        tr.id = a.id;
        tr.type = a.type;
        tr.length = a.length;
        tr.width = a.width;
        tr.height = a.height;
        tr.birth = t;
        it = agents.emplace(a.id, std::move(tr)).first;
      }
      AgentTrack & tr = it->second;
      while (tr.death() < t) {
        AgentStep gap = tr.steps.back();
        gap.valid = false;
        gap.speed = 0.0;
        gap.reason = Visibility::OutOfRange;
        tr.steps.push_back(gap);
      }
      AgentStep st;
      st.x = a.x;
      st.y = a.y;
      st.z = a.z;
      st.heading = a.heading;
      st.valid = true;
      if (!tr.steps.empty() && last_valid[a.id] == t - 1) {
        const auto & p = tr.steps.back();
        st.speed = std::hypot(a.x - p.x, a.y - p.y) / kDt;
      }
      tr.steps.push_back(st);
      last_valid[a.id] = t;
    }
  }
  for (auto & [id, tr] : agents) {
    s.agents.push_back(std::move(tr));
  }

  std::map<int, LightTrack> lights;
  for (int t = 0; t < s.steps; ++t) {
    for (const auto & l : trace.steps[t].lights) {
      if (!l.valid) {
        continue;
      }
      auto it = lights.find(l.id);
      if (it == lights.end()) {
        LightTrack tr;
        tr.id = l.id;
        tr.head = l.head;
        tr.birth = t;
        it = lights.emplace(l.id, std::move(tr)).first;
      }
      LightTrack & tr = it->second;
      if (tr.death() > t) {
        continue;  // two slots on one head: keep the first
      }
      while (tr.death() < t) {
        LightStep gap = tr.steps.back();
        gap.valid = false;
        tr.steps.push_back(gap);
      }
      tr.steps.push_back({l.x, l.y, l.z, l.state, true});
    }
  }
  for (auto & [id, tr] : lights) {
    s.lights.push_back(std::move(tr));
  }

  json intervals = json::array();
  for (const auto & r : trace.intervals) {
    intervals.push_back({{"start", r.start}, {"committed", r.committed}, {"entering", r.entering}, {"exiting", r.exiting}});
  }
  s.provenance = {
    {"kind", "rollout"},
    {"world_model", {{"controller", trace.world_name}, {"seed", trace.config.world_seed}}},
    {"planner", {{"controller", trace.planner_name}, {"seed", trace.config.planner_seed}}},
    {"config", to_json(trace.config)},
    {"intervals", intervals},
    {"ego_continuity_violations", trace.ego_continuity_violations},
    {"free_floating_lights", trace.free_floating_lights},
  };
  return s;
}

json timing_json(const RolloutTrace & trace)
{
  json intervals = json::array();
  double world = 0.0;
  double planner = 0.0;
  for (const auto & r : trace.intervals) {
    intervals.push_back({{"start", r.start}, {"world_ms", r.world_ms}, {"planner_ms", r.planner_ms}});
    world += r.world_ms;
    planner += r.planner_ms;
  }
  return {{"intervals", intervals}, {"world_ms_total", world}, {"planner_ms_total", planner}};
}

}  // namespace twm::rollout
