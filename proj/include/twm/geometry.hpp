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

#ifndef TWM__GEOMETRY_HPP_
#define TWM__GEOMETRY_HPP_

#include <array>
#include <cmath>
#include <vector>

namespace twm::geom
{

struct Vec2
{
  double x = 0.0;
  double y = 0.0;

  Vec2 operator+(const Vec2 & o) const { return {x + o.x, y + o.y}; }
  Vec2 operator-(const Vec2 & o) const { return {x - o.x, y - o.y}; }
  Vec2 operator*(double s) const { return {x * s, y * s}; }
  bool operator==(const Vec2 &) const = default;
};

inline double dot(const Vec2 & a, const Vec2 & b) { return a.x * b.x + a.y * b.y; }
inline double cross(const Vec2 & a, const Vec2 & b) { return a.x * b.y - a.y * b.x; }
inline double norm(const Vec2 & a) { return std::hypot(a.x, a.y); }
inline double distance(const Vec2 & a, const Vec2 & b) { return norm(a - b); }

/// Wrap an angle into [-pi, pi).
double wrap_angle(double a);

/// Oriented box: center, heading, full length (along heading) and width.
struct Obb
{
  Vec2 center;
  double heading = 0.0;
  double length = 0.0;
  double width = 0.0;

  std::array<Vec2, 4> corners() const;
};

/// Separating-axis overlap test. Touching boxes count as overlapping.
bool overlaps(const Obb & a, const Obb & b);

/// True when segment [p, q] intersects the interior or boundary of the box.
bool segment_intersects(const Vec2 & p, const Vec2 & q, const Obb & box);

/// Proper or touching intersection of two segments.
bool segments_intersect(const Vec2 & a, const Vec2 & b, const Vec2 & c, const Vec2 & d);

/// Even-odd point-in-polygon; points on the boundary count as inside.
bool point_in_polygon(const Vec2 & p, const std::vector<Vec2> & poly);

/// No two non-adjacent edges intersect.
bool is_simple_polygon(const std::vector<Vec2> & poly);

/// Rigid 2D pose.
struct Pose2
{
  double x = 0.0;
  double y = 0.0;
  double heading = 0.0;
};

/// Express a world point in the frame of `frame`.
Vec2 to_frame(const Pose2 & frame, const Vec2 & p);
/// Inverse of to_frame.
Vec2 from_frame(const Pose2 & frame, const Vec2 & p);

}  // namespace twm::geom

#endif  // TWM__GEOMETRY_HPP_
