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

#ifndef TWM__ROAD_GRAPH_HPP_
#define TWM__ROAD_GRAPH_HPP_

#include "twm/geometry.hpp"
#include "twm/tensor_core.hpp"

#include <json.hpp>

#include <cstdint>
#include <string>
#include <vector>

namespace twm::road
{

using geom::Vec2;

enum class LaneKind : std::uint8_t { Road, Connector };
enum class Turn : std::uint8_t { None, Straight, Left, Right };

struct Lane
{
  int id = 0;
  LaneKind kind = LaneKind::Road;
  Turn turn = Turn::None;
  std::vector<Vec2> points;
  double speed_limit = 13.4;
  std::vector<int> successors;
  std::vector<int> predecessors;
  std::vector<int> neighbors;  // adjacent lanes of the same road (opposite direction)
  bool entry = false;          // begins at the map boundary
  bool exit = false;           // ends at the map boundary
  int stop_line = -1;          // stop line at the lane end, if any
  int intersection = -1;       // connectors: owning intersection

  // Derived arc-length table, filled by RoadGraph::finalize().
  std::vector<double> cumulative;
  double length() const { return cumulative.empty() ? 0.0 : cumulative.back(); }
  Vec2 point_at(double s) const;
  double heading_at(double s) const;
  /// Arc length of the closest point and the distance to it.
  double project(const Vec2 & p, double * dist = nullptr) const;
};

struct StopLine
{
  int id = 0;
  Vec2 a;
  Vec2 b;
  int lane = -1;    // controlled incoming lane
  int signal = -1;  // signal head governing it
};

struct SignalHead
{
  int id = 0;
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;
  std::vector<int> lanes;  // incoming lane and its connectors
  int intersection = 0;
  int axis = 0;            // 0: east-west approach, 1: north-south approach
};

struct Polygon
{
  std::vector<Vec2> points;
};

struct Intersection
{
  int id = 0;
  Vec2 center;
  double half_size = 6.0;
};

struct RoadGraph
{
  int rows = 1;
  int cols = 1;
  double block_size = 80.0;
  std::uint64_t seed = 0;
  Vec2 extent_min;
  Vec2 extent_max;
  std::vector<Lane> lanes;
  std::vector<StopLine> stop_lines;
  std::vector<SignalHead> signals;
  std::vector<Intersection> intersections;
  std::vector<Polygon> drivable;
  std::vector<Polygon> parking_lots;
  std::vector<Polygon> sidewalks;

  /// Fill arc-length tables and predecessor lists.
  void finalize();
  /// Throws std::runtime_error when references or polygons are inconsistent.
  void validate() const;

  bool inside_extent(const Vec2 & p, double margin = 0.0) const;
  bool on_drivable(const Vec2 & p) const;
  bool in_parking_lot(const Vec2 & p) const;

  /// Closest lane whose direction is within `max_heading_error` of `heading`.
  /// Returns -1 when none lies within `max_dist`.
  int nearest_lane(const Vec2 & p, double heading, double max_dist, double max_heading_error, double * s_out) const;

  /// True when every interior lane reaches every other one.
  bool strongly_connected() const;
};

struct MapParams
{
  int rows = 2;
  int cols = 2;
  double block_size = 80.0;
  double parking_lot_fraction = 0.5;
  double speed_limit = 13.4;  // m/s
  std::uint64_t seed = 0;

  void validate() const;
};

/// Grid city of two-lane roads with four-way signalized intersections.
RoadGraph generate_map(const MapParams & params);

nlohmann::json to_json(const RoadGraph & g);
RoadGraph road_graph_from_json(const nlohmann::json & j);
MapParams map_params_from_json(const nlohmann::json & j);
nlohmann::json to_json(const MapParams & p);

/// Roadgraph point set used as model context.
struct ContextPoint
{
  Vec2 p;
  Vec2 dir;
  int kind = 0;  // 0 lane, 1 connector, 2 stop line, 3 parking lot, 4 road edge
};

std::vector<ContextPoint> context_points(const RoadGraph & g, double spacing = 4.0);

/// Crop around an ego pose, transform into the ego frame, normalize positions,
/// keep the nearest `max_points` (ties broken by point order).
tensor::RoadContext crop_context(
  const std::vector<ContextPoint> & points, const geom::Pose2 & ego, double radius, int max_points,
  double position_scale);

}  // namespace twm::road

#endif  // TWM__ROAD_GRAPH_HPP_
