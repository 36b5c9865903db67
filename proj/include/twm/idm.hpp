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

#ifndef TWM__IDM_HPP_
#define TWM__IDM_HPP_

#include "twm/road_graph.hpp"
#include "twm/tensor_core.hpp"

#include <functional>
#include <limits>
#include <random>
#include <string>
#include <vector>

namespace twm::idm
{

struct IDMParams
{
  double v0 = 13.4;     // desired speed, m/s
  double T = 1.5;       // time headway, s
  double a_max = 1.5;   // m/s^2
  double b = 2.0;       // comfortable deceleration, m/s^2
  double s0 = 2.0;      // minimum gap, m
  double delta = 4.0;

  /// Throws std::invalid_argument unless all values are positive and delta >= 1.
  void validate() const;
};

inline constexpr double kNoLeader = std::numeric_limits<double>::infinity();

/// a = a_max [1 - (v / v0)^delta - (s* / s)^2], s* = s0 + v T + v dv / (2 sqrt(a_max b)).
/// Pass s = kNoLeader for a free road. Returns -5 b when s <= 0.
double idm_accel(double v, double v_lead, double s, const IDMParams & p);

/// Random walk over successor edges starting at `start`, up to `max_lanes` lanes.
/// With `avoid_exits`, successors leading into boundary exits are skipped while
/// an alternative exists.
std::vector<int> route_search(
  const road::RoadGraph & map, int start, std::mt19937_64 & rng, int max_lanes = 64, bool avoid_exits = false);

/// A vehicle that follows a lane route longitudinally.
struct LaneAgent
{
  int id = 0;
  std::vector<int> route;
  std::size_t index = 0;  // current lane within route
  double s = 0.0;         // arc length on the current lane
  double v = 0.0;
  double length = 4.5;
  IDMParams params;
  bool hold_at_end = false;  // stop at the route end instead of leaving it

  int lane() const { return route[index]; }
  geom::Vec2 position(const road::RoadGraph & map) const;
  double heading(const road::RoadGraph & map) const;
};

/// Signal state of a signal head id.
using SignalLookup = std::function<tensor::SignalState(int)>;

/// Whether a signal state requires stopping at its stop line.
bool is_red(tensor::SignalState s);
bool is_yellow(tensor::SignalState s);

/// Gap and speed of the closest obstacle ahead of agent `i` along its route,
/// considering the other agents and stop lines governed by red (or stoppable
/// yellow) signals. Returns {kNoLeader, 0} when nothing is within `lookahead`.
struct Leader
{
  double gap = kNoLeader;
  double speed = 0.0;
};
Leader find_leader(
  const std::vector<LaneAgent> & agents, std::size_t i, const road::RoadGraph & map, const SignalLookup & signals,
  double lookahead = 120.0);

/// Advance every agent by dt with the IDM acceleration and a ballistic
/// position update (speed floored at 0). Returns the indices of agents that
/// ran past the end of their route this step.
std::vector<std::size_t> idm_step(
  std::vector<LaneAgent> & agents, const road::RoadGraph & map, const SignalLookup & signals, double dt);

/// Place an arbitrary pose on the lane graph: the nearest lane with a
/// compatible heading within `max_dist`. Returns false when none qualifies.
bool project_to_lane(
  const road::RoadGraph & map, const geom::Vec2 & p, double heading, double max_dist, int & lane, double & s);

}  // namespace twm::idm

#endif  // TWM__IDM_HPP_
