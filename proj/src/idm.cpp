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

#include "twm/idm.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace twm::idm
{

void IDMParams::validate() const
{
  if (!(v0 > 0 && T > 0 && a_max > 0 && b > 0 && s0 > 0 && delta >= 1.0)) {
    throw std::invalid_argument("IDM parameters must be positive with delta >= 1");
  }
}

double idm_accel(double v, double v_lead, double s, const IDMParams & p)
{
  if (s <= 0.0) {
    return -5.0 * p.b;
  }
  const double free = std::pow(v / p.v0, p.delta);
  if (std::isinf(s)) {
    return p.a_max * (1.0 - free);
  }
  const double dv = v - v_lead;
  const double s_star = std::max(0.0, p.s0 + v * p.T + v * dv / (2.0 * std::sqrt(p.a_max * p.b)));
  const double r = s_star / s;
  return p.a_max * (1.0 - free - r * r);
}

std::vector<int> route_search(
  const road::RoadGraph & map, int start, std::mt19937_64 & rng, int max_lanes, bool avoid_exits)
{
  if (start < 0 || start >= static_cast<int>(map.lanes.size())) {
    throw std::invalid_argument("route_search: unknown start lane " + std::to_string(start));
  }
  std::vector<int> path{start};
  int cur = start;
  while (static_cast<int>(path.size()) < max_lanes) {
    std::vector<int> options = map.lanes[cur].successors;
    if (options.empty()) {
      break;
    }
    if (avoid_exits) {
      std::vector<int> keep;
      for (int o : options) {
        const auto & l = map.lanes[o];
        bool leads_out = l.exit;
        if (l.kind == road::LaneKind::Connector) {
          for (int s : l.successors) {
            leads_out = leads_out || map.lanes[s].exit;
          }
        }
        if (!leads_out) {
          keep.push_back(o);
        }
      }
      if (!keep.empty()) {
        options = std::move(keep);
      }
    }
    std::uniform_int_distribution<std::size_t> pick(0, options.size() - 1);
    cur = options[pick(rng)];
    path.push_back(cur);
  }
  return path;
}

geom::Vec2 LaneAgent::position(const road::RoadGraph & map) const { return map.lanes[lane()].point_at(s); }

double LaneAgent::heading(const road::RoadGraph & map) const { return map.lanes[lane()].heading_at(s); }

bool is_red(tensor::SignalState s)
{
  return s == tensor::SignalState::SolidRed || s == tensor::SignalState::ArrowRed ||
         s == tensor::SignalState::FlashingRed;
}

bool is_yellow(tensor::SignalState s)
{
  return s == tensor::SignalState::SolidYellow || s == tensor::SignalState::ArrowYellow;
}

Leader find_leader(
  const std::vector<LaneAgent> & agents, std::size_t i, const road::RoadGraph & map, const SignalLookup & signals,
  double lookahead)
{
  const LaneAgent & me = agents[i];
  Leader best;
  // Offsets of route lanes relative to the agent position.
  std::vector<std::pair<int, double>> ahead;  // lane, distance from agent to lane start
  double base = -me.s;
  for (std::size_t k = me.index; k < me.route.size() && base < lookahead; ++k) {
    ahead.emplace_back(me.route[k], base);
    base += map.lanes[me.route[k]].length();
  }
  for (std::size_t j = 0; j < agents.size(); ++j) {
    if (j == i) {
      continue;
    }
    const LaneAgent & o = agents[j];
    for (std::size_t k = 0; k < ahead.size(); ++k) {
      if (ahead[k].first != o.lane()) {
        continue;
      }
      const double d = ahead[k].second + o.s;
      if (d <= 0.0 || (k == 0 && o.s <= me.s)) {
        continue;
      }
      const double gap = d - 0.5 * (me.length + o.length);
      if (gap < best.gap) {
        best.gap = gap;
        best.speed = o.v;
      }
      break;
    }
  }
  if (me.hold_at_end && me.index + 1 == me.route.size()) {
    const double gap = map.lanes[me.lane()].length() - me.s - 0.5 * me.length;
    if (gap < best.gap) {
      best.gap = std::max(gap, 1e-3);
      best.speed = 0.0;
    }
  }
  if (signals) {
    for (const auto & [lane, start] : ahead) {
      const auto & l = map.lanes[lane];
      if (l.stop_line < 0) {
        continue;
      }
      const double gap = start + l.length() - 0.5 * me.length;
      if (gap < -0.5) {
        continue;  // already past the line
      }
      const auto st = signals(map.stop_lines[l.stop_line].signal);
      bool stop = is_red(st);
      if (is_yellow(st)) {
        stop = gap >= me.v * me.v / (2.0 * me.params.b);
      }
      if (stop && gap < best.gap) {
        best.gap = std::max(gap, 1e-3);
        best.speed = 0.0;
      }
      break;  // only the first stop line ahead matters
    }
  }
  return best;
}

std::vector<std::size_t> idm_step(
  std::vector<LaneAgent> & agents, const road::RoadGraph & map, const SignalLookup & signals, double dt)
{
  std::vector<double> acc(agents.size());
  for (std::size_t i = 0; i < agents.size(); ++i) {
    const Leader lead = find_leader(agents, i, map, signals);
    IDMParams p = agents[i].params;
    p.v0 = std::min(p.v0, map.lanes[agents[i].lane()].speed_limit);
    acc[i] = idm_accel(agents[i].v, lead.speed, lead.gap, p);
  }
  std::vector<std::size_t> finished;
  for (std::size_t i = 0; i < agents.size(); ++i) {
    LaneAgent & a = agents[i];
    const double v_new = a.v + acc[i] * dt;
    if (v_new < 0.0) {
      // Stop within the step.
      a.s += acc[i] < 0.0 ? -0.5 * a.v * a.v / acc[i] : 0.0;
      a.v = 0.0;
    } else {
      a.s += a.v * dt + 0.5 * acc[i] * dt * dt;
      a.v = v_new;
    }
    while (a.s > map.lanes[a.lane()].length()) {
      if (a.index + 1 < a.route.size()) {
        a.s -= map.lanes[a.lane()].length();
        ++a.index;
      } else if (a.hold_at_end) {
        a.s = map.lanes[a.lane()].length();
        a.v = 0.0;
        break;
      } else {
        finished.push_back(i);
        break;
      }
    }
  }
  return finished;
}

bool project_to_lane(
  const road::RoadGraph & map, const geom::Vec2 & p, double heading, double max_dist, int & lane, double & s)
{
  lane = map.nearest_lane(p, heading, max_dist, std::numbers::pi / 3, &s);
  return lane >= 0;
}

}  // namespace twm::idm
