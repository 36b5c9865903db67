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

#include "twm/idm.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <random>
#include <stdexcept>

namespace twm::synth
{

using geom::Vec2;
using nlohmann::json;
using tensor::AgentType;
using tensor::SignalState;

void WorldScriptConfig::validate() const
{
  if (spawn_rate < 0 || pedestrian_ratio < 0 || parked_ratio < 0 || parked_lifetime_s <= 0 ||
      cyclist_fraction < 0 || large_vehicle_fraction < 0 || cyclist_fraction + large_vehicle_fraction > 1.0) {
    throw std::invalid_argument("world config: rates must be non-negative and fractions sum to at most 1");
  }
  if (green_s < 0.1 || yellow_s < 0.1 || red_s < 0.1) {
    throw std::invalid_argument("world config: every signal phase must last at least one step");
  }
  if (!(visibility_range > 0) || warmup_s < 0) {
    throw std::invalid_argument("world config: visibility range must be positive and warmup non-negative");
  }
}

json to_json(const WorldScriptConfig & c)
{
  return {
    {"spawn_rate", c.spawn_rate},
    {"pedestrian_ratio", c.pedestrian_ratio},
    {"parked_ratio", c.parked_ratio},
    {"parked_lifetime_s", c.parked_lifetime_s},
    {"cyclist_fraction", c.cyclist_fraction},
    {"large_vehicle_fraction", c.large_vehicle_fraction},
    {"green_s", c.green_s},
    {"yellow_s", c.yellow_s},
    {"red_s", c.red_s},
    {"occlusion", c.occlusion},
    {"visibility_range", c.visibility_range},
    {"warmup_s", c.warmup_s},
    {"seed", c.seed},
  };
}

WorldScriptConfig world_config_from_json(const json & j)
{
  WorldScriptConfig c;
  c.spawn_rate = j.value("spawn_rate", c.spawn_rate);
  c.pedestrian_ratio = j.value("pedestrian_ratio", c.pedestrian_ratio);
  c.parked_ratio = j.value("parked_ratio", c.parked_ratio);
  c.parked_lifetime_s = j.value("parked_lifetime_s", c.parked_lifetime_s);
  c.cyclist_fraction = j.value("cyclist_fraction", c.cyclist_fraction);
  c.large_vehicle_fraction = j.value("large_vehicle_fraction", c.large_vehicle_fraction);
  c.green_s = j.value("green_s", c.green_s);
  c.yellow_s = j.value("yellow_s", c.yellow_s);
  c.red_s = j.value("red_s", c.red_s);
  c.occlusion = j.value("occlusion", c.occlusion);
  c.visibility_range = j.value("visibility_range", c.visibility_range);
  c.warmup_s = j.value("warmup_s", c.warmup_s);
  c.seed = j.value("seed", c.seed);
  c.validate();
  return c;
}

namespace
{

constexpr double kDt = 0.1;

long phase_steps(double seconds) { return std::max(1L, std::lround(seconds / kDt)); }

std::uint64_t mix(std::uint64_t a, std::uint64_t b)
{
  std::uint64_t z = a ^ (b + 0x9E3779B97F4A7C15ull + (a << 6) + (a >> 2));
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

}  // namespace

SignalState signal_state(
  const road::RoadGraph & map, const WorldScriptConfig & cfg, int head, long step, std::uint64_t offset_seed)
{
  const long g = phase_steps(cfg.green_s);
  const long y = phase_steps(cfg.yellow_s);
  const long r = phase_steps(cfg.red_s);
  const long cycle = g + y + r;
  const auto & h = map.signals.at(static_cast<std::size_t>(head));
  long offset = static_cast<long>(mix(offset_seed, static_cast<std::uint64_t>(h.intersection)) % cycle);
  if (h.axis == 1) {
    offset += g + y;
  }
  const long p = ((step + offset) % cycle + cycle) % cycle;
  if (p < g) {
    return SignalState::SolidGreen;
  }
  if (p < g + y) {
    return SignalState::SolidYellow;
  }
  return SignalState::SolidRed;
}

std::vector<Visibility> occlusion_visibility(
  const std::vector<Entity> & agents, std::size_t ego, const std::vector<Vec2> & signals,
  std::vector<Visibility> * signal_visibility, double max_range, bool occlusion)
{
  const Vec2 eye = agents.at(ego).center;
  auto classify = [&](const Vec2 & target, std::size_t self) {
    if (geom::distance(eye, target) > max_range) {
      return Visibility::OutOfRange;
    }
    if (occlusion) {
      for (std::size_t k = 0; k < agents.size(); ++k) {
        if (k == ego || k == self || !agents[k].occluder) {
          continue;
        }
        if (geom::segment_intersects(eye, target, agents[k].box)) {
          return Visibility::Occluded;
        }
      }
    }
    return Visibility::Visible;
  };
  std::vector<Visibility> out(agents.size(), Visibility::Visible);
  for (std::size_t i = 0; i < agents.size(); ++i) {
    if (i != ego) {
      out[i] = classify(agents[i].center, i);
    }
  }
  if (signal_visibility != nullptr) {
    signal_visibility->assign(signals.size(), Visibility::Visible);
    for (std::size_t i = 0; i < signals.size(); ++i) {
      (*signal_visibility)[i] = classify(signals[i], agents.size());
    }
  }
  return out;
}

// ------------------------------------------------------------ simulation

namespace
{

struct Meta
{
  int id;
  AgentType type;
  double length;
  double width;
  double height;
};

struct Pedestrian
{
  Meta meta;
  Vec2 pos;
  double heading;
  double speed;
};

struct Parked
{
  Meta meta;
  Vec2 pos;
  double heading;
  long death;
};

struct SidewalkEntry
{
  Vec2 start;
  double heading;
};

double poisson_prob(double rate) { return 1.0 - std::exp(-rate * kDt); }

}  // namespace

Scenario simulate_ground_truth(
  const road::RoadGraph & map, const road::MapParams & map_params, const WorldScriptConfig & cfg, int steps)
{
  cfg.validate();
  if (steps < 1) {
    throw std::invalid_argument("simulate_ground_truth: steps must be >= 1");
  }
  std::mt19937_64 rng(mix(cfg.seed, 0x5eed));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const long warm = std::lround(cfg.warmup_s / kDt);
  const long total = warm + steps;
  int next_id = 1;

  std::vector<idm::LaneAgent> vehicles;
  std::vector<Meta> vmeta;
  std::vector<Pedestrian> peds;
  std::vector<Parked> parked;

  long now = 0;
  const idm::SignalLookup lookup = [&](int head) { return signal_state(map, cfg, head, now, cfg.seed); };

  // Ego on an interior road lane when one exists.
  {
    std::vector<int> options;
    for (const auto & l : map.lanes) {
      if (l.kind == road::LaneKind::Road && !l.entry && !l.exit) {
        options.push_back(l.id);
      }
    }
    if (options.empty()) {
      for (const auto & l : map.lanes) {
        if (l.entry) {
          options.push_back(l.id);
        }
      }
    }
    const int lane = options[std::uniform_int_distribution<std::size_t>(0, options.size() - 1)(rng)];
    idm::LaneAgent ego;
    ego.id = 0;
    ego.route = idm::route_search(map, lane, rng, 64, true);
    ego.s = map.lanes[lane].length() * (0.2 + 0.4 * unit(rng));
    ego.v = 0.0;
    ego.length = 4.8;
    ego.params.v0 = map_params.speed_limit;
    ego.hold_at_end = true;
    vehicles.push_back(ego);
    vmeta.push_back({0, AgentType::AV, 4.8, 2.0, 1.6});
  }

  std::vector<int> entries;
  for (const auto & l : map.lanes) {
    if (l.entry) {
      entries.push_back(l.id);
    }
  }
  std::vector<SidewalkEntry> walks;
  {
    const double B = map.block_size;
    for (int r = 0; r < map.rows; ++r) {
      for (double side : {-5.75, 5.75}) {
        const double y = r * B + side;
        walks.push_back({{map.extent_min.x, y}, 0.0});
        walks.push_back({{map.extent_max.x, y}, -std::numbers::pi});
      }
    }
    for (int c = 0; c < map.cols; ++c) {
      for (double side : {-5.75, 5.75}) {
        const double x = c * B + side;
        walks.push_back({{x, map.extent_min.y}, std::numbers::pi / 2});
        walks.push_back({{x, map.extent_max.y}, -std::numbers::pi / 2});
      }
    }
  }

  const double vehicle_rate = cfg.spawn_rate;
  const double ped_rate = cfg.spawn_rate * cfg.pedestrian_ratio;
  const double lot_rate = cfg.spawn_rate * cfg.parked_ratio;
  const double lifetime_steps = cfg.parked_lifetime_s / kDt;

  auto place_parked = [&](const road::Polygon & lot, long t) {
    const Vec2 lo = lot.points[0];
    const Vec2 hi = lot.points[2];
    for (int attempt = 0; attempt < 10; ++attempt) {
      const Vec2 p{lo.x + 3 + (hi.x - lo.x - 6) * unit(rng), lo.y + 3 + (hi.y - lo.y - 6) * unit(rng)};
      const double h =
        geom::wrap_angle(std::uniform_int_distribution<int>(0, 3)(rng) * std::numbers::pi / 2 + 0.05 * (unit(rng) - 0.5));
      const double len = 4.2 + 0.8 * unit(rng);
      const geom::Obb box{p, h, len + 0.6, 2.5};
      bool clear = true;
      for (const auto & q : parked) {
        if (geom::overlaps(box, geom::Obb{q.pos, q.heading, q.meta.length + 0.6, q.meta.width + 0.5})) {
          clear = false;
          break;
        }
      }
      if (!clear) {
        continue;
      }
      std::exponential_distribution<double> life(1.0 / lifetime_steps);
      const long death = t + 1 + static_cast<long>(life(rng));
      parked.push_back({{next_id++, AgentType::Car, len, 1.9, 1.6}, p, h, death});
      return;
    }
  };

  if (lot_rate > 0) {
    for (const auto & lot : map.parking_lots) {
      std::poisson_distribution<int> initial(lot_rate * cfg.parked_lifetime_s);
      const int n = initial(rng);
      for (int i = 0; i < n; ++i) {
        place_parked(lot, 0);
      }
    }
  }

  Scenario out;
  out.steps = steps;
  out.dt = kDt;
  out.map = map_params;
  out.world = to_json(cfg);
  out.ego_id = 0;
  std::map<int, AgentTrack> tracks;
  for (const auto & h : map.signals) {
    LightTrack lt;
    lt.id = h.id;
    lt.head = h.id;
    lt.birth = 0;
    out.lights.push_back(std::move(lt));
  }

  for (long k = 0; k < total; ++k) {
    now = k;
    if (k > 0) {
      // Routes long enough to keep driving.
      for (auto & v : vehicles) {
        if (v.index + 3 >= v.route.size() && !map.lanes[v.route.back()].exit) {
          auto more = idm::route_search(map, v.route.back(), rng, 16, v.id == 0);
          v.route.insert(v.route.end(), more.begin() + 1, more.end());
        }
      }
      auto done = idm::idm_step(vehicles, map, lookup, kDt);
      std::sort(done.rbegin(), done.rend());
      for (std::size_t i : done) {
        if (vehicles[i].id == 0) {
          continue;
        }
        vehicles.erase(vehicles.begin() + static_cast<long>(i));
        vmeta.erase(vmeta.begin() + static_cast<long>(i));
      }
      for (auto & p : peds) {
        p.pos = p.pos + Vec2{std::cos(p.heading), std::sin(p.heading)} * (p.speed * kDt);
      }
      std::erase_if(peds, [&](const Pedestrian & p) { return !map.inside_extent(p.pos); });
      std::erase_if(parked, [&](const Parked & p) { return p.death <= k; });
    }

    // Arrivals.
    if (vehicle_rate > 0) {
      for (int lane : entries) {
        if (unit(rng) >= poisson_prob(vehicle_rate)) {
          continue;
        }
        bool clear = true;
        for (const auto & v : vehicles) {
          if (v.lane() == lane && v.s < 15.0 + 0.5 * v.length) {
            clear = false;
          }
        }
        if (!clear) {
          continue;
        }
        idm::LaneAgent a;
        a.id = next_id++;
        a.route = idm::route_search(map, lane, rng, 24, false);
        a.s = 0.0;
        const double kind = unit(rng);
        Meta m{a.id, AgentType::Car, 0, 0, 0};
        if (kind < cfg.cyclist_fraction) {
          m.type = AgentType::Cyclist;
          m.length = 1.8;
          m.width = 0.7;
          m.height = 1.7;
          a.params.v0 = 4.5 + unit(rng);
        } else if (kind < cfg.cyclist_fraction + cfg.large_vehicle_fraction) {
          m.length = 8.0 + 4.0 * unit(rng);
          m.width = 2.5;
          m.height = 3.2;
          a.params.v0 = map_params.speed_limit * (0.75 + 0.15 * unit(rng));
        } else {
          m.length = std::clamp(4.6 + 0.35 * std::normal_distribution<double>()(rng), 3.8, 5.4);
          m.width = 1.8 + 0.2 * unit(rng);
          m.height = 1.4 + 0.4 * unit(rng);
          a.params.v0 = map_params.speed_limit * (0.8 + 0.2 * unit(rng));
        }
        a.length = m.length;
        a.v = std::min(a.params.v0, map.lanes[lane].speed_limit) * (0.7 + 0.3 * unit(rng));
        vehicles.push_back(a);
        vmeta.push_back(m);
      }
    }
    if (ped_rate > 0) {
      for (const auto & w : walks) {
        if (unit(rng) < poisson_prob(ped_rate)) {
          peds.push_back({{next_id++, AgentType::Pedestrian, 0.6, 0.6, 1.75}, w.start, w.heading, 1.1 + 0.5 * unit(rng)});
        }
      }
    }
    if (lot_rate > 0 && k > 0) {
      for (const auto & lot : map.parking_lots) {
        if (unit(rng) < poisson_prob(lot_rate)) {
          place_parked(lot, k);
        }
      }
    }

    if (k < warm) {
      continue;
    }
    const int t = static_cast<int>(k - warm);

    // Snapshot and visibility.
    struct Snap
    {
      const Meta * meta;
      double x, y, heading, speed;
      bool parked;
    };
    std::vector<Snap> snap;
    std::vector<Entity> ents;
    for (std::size_t i = 0; i < vehicles.size(); ++i) {
      const Vec2 p = vehicles[i].position(map);
      const double h = geom::wrap_angle(vehicles[i].heading(map));
      snap.push_back({&vmeta[i], p.x, p.y, h, vehicles[i].v, false});
    }
    for (const auto & p : peds) {
      snap.push_back({&p.meta, p.pos.x, p.pos.y, geom::wrap_angle(p.heading), p.speed, false});
    }
    for (const auto & p : parked) {
      snap.push_back({&p.meta, p.pos.x, p.pos.y, p.heading, 0.0, true});
    }
    for (const auto & s : snap) {
      ents.push_back({{s.x, s.y}, geom::Obb{{s.x, s.y}, s.heading, s.meta->length, s.meta->width}, true});
    }
    std::vector<Vec2> heads;
    for (const auto & h : map.signals) {
      heads.push_back({h.x, h.y});
    }
    std::vector<Visibility> head_vis;
    const auto vis = occlusion_visibility(ents, 0, heads, &head_vis, cfg.visibility_range, cfg.occlusion);

    for (std::size_t i = 0; i < snap.size(); ++i) {
      const auto & s = snap[i];
      auto it = tracks.find(s.meta->id);
      if (it == tracks.end()) {
        AgentTrack tr;
        tr.id = s.meta->id;
        tr.type = s.meta->type;
        tr.length = s.meta->length;
        tr.width = s.meta->width;
        tr.height = s.meta->height;
        tr.birth = t;
        tr.parked = s.parked;
        it = tracks.emplace(s.meta->id, std::move(tr)).first;
      }
      AgentStep st;
      st.x = s.x;
      st.y = s.y;
      st.heading = s.heading;
      st.speed = s.speed;
      st.reason = vis[i];
      st.valid = vis[i] == Visibility::Visible;
      it->second.steps.push_back(st);
    }
    for (std::size_t h = 0; h < map.signals.size(); ++h) {
      LightStep ls;
      ls.x = map.signals[h].x;
      ls.y = map.signals[h].y;
      ls.z = map.signals[h].z;
      ls.state = lookup(static_cast<int>(h));
      ls.valid = head_vis[h] == Visibility::Visible;
      out.lights[h].steps.push_back(ls);
    }
  }
  for (auto & [id, tr] : tracks) {
    out.agents.push_back(std::move(tr));
  }
  return out;
}

// ------------------------------------------------------- slots and export

std::vector<std::vector<int>> assign_slots(
  const std::vector<std::vector<Candidate>> & candidates, int n_slots, int reuse_gap)
{
  std::vector<int> holder(static_cast<std::size_t>(std::max(0, n_slots)), -1);
  std::vector<long> last_seen(holder.size(), 0);
  std::vector<std::vector<int>> out;
  out.reserve(candidates.size());
  for (std::size_t t = 0; t < candidates.size(); ++t) {
    std::vector<int> row(holder.size(), -1);
    for (std::size_t k = 0; k < holder.size(); ++k) {
      if (holder[k] >= 0 && static_cast<long>(t) - last_seen[k] > reuse_gap) {
        holder[k] = -1;
      }
    }
    std::vector<Candidate> fresh;
    for (const auto & c : candidates[t]) {
      auto it = std::find(holder.begin(), holder.end(), c.id);
      if (it != holder.end()) {
        const auto k = static_cast<std::size_t>(it - holder.begin());
        row[k] = c.id;
        last_seen[k] = static_cast<long>(t);
      } else {
        fresh.push_back(c);
      }
    }
    std::stable_sort(fresh.begin(), fresh.end(), [](const Candidate & a, const Candidate & b) {
      return a.distance < b.distance || (a.distance == b.distance && a.id < b.id);
    });
    for (const auto & c : fresh) {
      auto it = std::find(holder.begin(), holder.end(), -1);
      if (it == holder.end()) {
        break;
      }
      const auto k = static_cast<std::size_t>(it - holder.begin());
      holder[k] = c.id;
      last_seen[k] = static_cast<long>(t);
      row[k] = c.id;
    }
    out.push_back(std::move(row));
  }
  return out;
}

SlotTables scenario_slots(const Scenario & s, int start, int len, const tensor::TensorDims & dims, int reuse_gap)
{
  std::vector<std::vector<Candidate>> ac(static_cast<std::size_t>(len));
  std::vector<std::vector<Candidate>> lc(static_cast<std::size_t>(len));
  for (int k = 0; k < len; ++k) {
    const int t = start + k;
    const geom::Pose2 ego = s.ego_pose(t);
    for (const auto & a : s.agents) {
      if (a.id == s.ego_id || !a.alive_at(t) || !a.at(t).valid) {
        continue;
      }
      ac[k].push_back({a.id, std::hypot(a.at(t).x - ego.x, a.at(t).y - ego.y)});
    }
    for (const auto & l : s.lights) {
      if (!l.alive_at(t) || !l.at(t).valid) {
        continue;
      }
      lc[k].push_back({l.id, std::hypot(l.at(t).x - ego.x, l.at(t).y - ego.y)});
    }
  }
  return {assign_slots(ac, dims.agents - 1, reuse_gap), assign_slots(lc, dims.lights, reuse_gap)};
}

std::vector<Window> export_windows(const Scenario & s, const road::RoadGraph & map, const ExportConfig & cfg)
{
  if (cfg.window_len > s.steps) {
    throw std::invalid_argument("export_windows: window length exceeds the scenario length");
  }
  if (cfg.dims.timesteps != cfg.window_len || cfg.history_len < 1 || cfg.history_len >= cfg.window_len ||
      cfg.stride < 1 || cfg.dims.agents < 1) {
    throw std::invalid_argument("export_windows: inconsistent export configuration");
  }
  std::map<int, const AgentTrack *> by_id;
  for (const auto & a : s.agents) {
    by_id[a.id] = &a;
  }
  std::map<int, const LightTrack *> light_by_id;
  for (const auto & l : s.lights) {
    light_by_id[l.id] = &l;
  }
  const auto points = road::context_points(map);
  std::vector<Window> out;
  for (int start = 0; start + cfg.window_len <= s.steps; start += cfg.stride) {
    Window w;
    w.start = start;
    w.anchor = s.ego_pose(start + cfg.history_len - 1);
    const SlotTables st = scenario_slots(s, start, cfg.window_len, cfg.dims, cfg.history_len);
    tensor::RawScene raw(cfg.dims);
    w.agent_slots.assign(static_cast<std::size_t>(cfg.window_len), std::vector<int>(cfg.dims.agents, -1));
    w.light_slots = st.lights;
    auto fill_agent = [&](tensor::AgentFeatures & f, const AgentTrack & a, int t) {
      const AgentStep & x = a.at(t);
      const Vec2 p = geom::to_frame(w.anchor, {x.x, x.y});
      f.x = p.x;
      f.y = p.y;
      f.z = x.z;
      f.heading = geom::wrap_angle(x.heading - w.anchor.heading);
      f.length = a.length;
      f.width = a.width;
      f.height = a.height;
      f.type = a.type;
      f.valid = true;
    };
    for (int k = 0; k < cfg.window_len; ++k) {
      const int t = start + k;
      fill_agent(raw.agent(0, k), s.ego(), t);
      w.agent_slots[k][0] = s.ego_id;
      for (int slot = 0; slot + 1 < cfg.dims.agents; ++slot) {
        const int id = st.agents[k][slot];
        if (id >= 0) {
          fill_agent(raw.agent(slot + 1, k), *by_id.at(id), t);
          w.agent_slots[k][slot + 1] = id;
        }
      }
      for (int slot = 0; slot < cfg.dims.lights; ++slot) {
        const int id = st.lights[k][slot];
        if (id < 0) {
          continue;
        }
        const LightStep & x = light_by_id.at(id)->at(t);
        auto & f = raw.light(slot, k);
        const Vec2 p = geom::to_frame(w.anchor, {x.x, x.y});
        f.x = p.x;
        f.y = p.y;
        f.z = x.z;
        f.state = x.state;
        f.valid = true;
      }
    }
    w.x = tensor::normalize(raw, cfg.norm);
    w.context = road::crop_context(points, w.anchor, cfg.context_radius, cfg.max_context_points, cfg.norm.position_scale);
    out.push_back(std::move(w));
  }
  return out;
}

Scenario perceived(const Scenario & s, const tensor::TensorDims & dims, int reuse_gap)
{
  const SlotTables st = scenario_slots(s, 0, s.steps, dims, reuse_gap);
  std::map<int, std::vector<char>> keep;
  std::map<int, std::vector<char>> keep_light;
  for (int t = 0; t < s.steps; ++t) {
    for (int id : st.agents[t]) {
      if (id >= 0) {
        auto & v = keep[id];
        v.resize(static_cast<std::size_t>(s.steps), 0);
        v[t] = 1;
      }
    }
    for (int id : st.lights[t]) {
      if (id >= 0) {
        auto & v = keep_light[id];
        v.resize(static_cast<std::size_t>(s.steps), 0);
        v[t] = 1;
      }
    }
  }
  Scenario out = s;
  for (auto & a : out.agents) {
    if (a.id == out.ego_id) {
      continue;
    }
    auto it = keep.find(a.id);
    for (int t = a.birth; t < a.death(); ++t) {
      auto & step = a.steps[static_cast<std::size_t>(t - a.birth)];
      step.valid = step.valid && it != keep.end() && it->second[t];
    }
  }
  for (auto & l : out.lights) {
    auto it = keep_light.find(l.id);
    for (int t = l.birth; t < l.death(); ++t) {
      auto & step = l.steps[static_cast<std::size_t>(t - l.birth)];
      step.valid = step.valid && it != keep_light.end() && it->second[t];
    }
  }
  return out;
}

ArchetypeCounts count_archetypes(const Scenario & s)
{
  enum class St { Absent, Occluded, Visible };
  ArchetypeCounts c;
  for (const auto & a : s.agents) {
    if (a.id == s.ego_id) {
      continue;
    }
    auto state_at = [&](int t) {
      if (!a.alive_at(t)) {
        return St::Absent;
      }
      const auto & x = a.at(t);
      if (x.valid) {
        return St::Visible;
      }
      return x.reason == Visibility::Occluded ? St::Occluded : St::Absent;
    };
    St prev = state_at(0);
    for (int t = 1; t < s.steps; ++t) {
      const St cur = state_at(t);
      if (prev == St::Absent && cur == St::Visible) {
        ++c.spawn;
      } else if (prev == St::Visible && cur == St::Occluded) {
        ++c.occlusion;
      } else if (prev == St::Occluded && cur == St::Visible) {
        ++c.disocclusion;
      } else if (prev == St::Visible && cur == St::Absent) {
        ++c.removal;
      }
      prev = cur;
    }
  }
  return c;
}

std::vector<train::Example> make_examples(
  const std::vector<Scenario> & scenarios, const road::RoadGraph & map, const ExportConfig & cfg)
{
  std::vector<train::Example> out;
  for (const auto & s : scenarios) {
    for (auto & w : export_windows(s, map, cfg)) {
      out.push_back({std::move(w.x), std::move(w.context)});
    }
  }
  return out;
}

}  // namespace twm::synth
