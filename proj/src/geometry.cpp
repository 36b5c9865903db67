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

#include "twm/geometry.hpp"

#include <algorithm>
#include <numbers>

namespace twm::geom
{

double wrap_angle(double a)
{
  constexpr double two_pi = 2.0 * std::numbers::pi;
  double r = std::fmod(a + std::numbers::pi, two_pi);
  if (r < 0.0) {
    r += two_pi;
  }
  r -= std::numbers::pi;
  if (r >= std::numbers::pi) {
    r -= two_pi;
  }
  return r;
}

std::array<Vec2, 4> Obb::corners() const
{
  const Vec2 f{std::cos(heading) * 0.5 * length, std::sin(heading) * 0.5 * length};
  const Vec2 l{-std::sin(heading) * 0.5 * width, std::cos(heading) * 0.5 * width};
  return {center + f + l, center - f + l, center - f - l, center + f - l};
}

namespace
{

void project(const std::array<Vec2, 4> & pts, const Vec2 & axis, double & lo, double & hi)
{
  lo = hi = dot(pts[0], axis);
  for (int i = 1; i < 4; ++i) {
    const double d = dot(pts[i], axis);
    lo = std::min(lo, d);
    hi = std::max(hi, d);
  }
}

}  // namespace

bool overlaps(const Obb & a, const Obb & b)
{
  const auto ca = a.corners();
  const auto cb = b.corners();
  const Vec2 axes[4] = {
    {std::cos(a.heading), std::sin(a.heading)},
    {-std::sin(a.heading), std::cos(a.heading)},
    {std::cos(b.heading), std::sin(b.heading)},
    {-std::sin(b.heading), std::cos(b.heading)},
  };
  for (const auto & ax : axes) {
    double alo, ahi, blo, bhi;
    project(ca, ax, alo, ahi);
    project(cb, ax, blo, bhi);
    if (ahi < blo || bhi < alo) {
      return false;
    }
  }
  return true;
}

bool segment_intersects(const Vec2 & p, const Vec2 & q, const Obb & box)
{
  // Clip the segment against the slab of each box axis in box coordinates.
  const double c = std::cos(box.heading);
  const double s = std::sin(box.heading);
  auto local = [&](const Vec2 & v) {
    const Vec2 d = v - box.center;
    return Vec2{c * d.x + s * d.y, -s * d.x + c * d.y};
  };
  const Vec2 a = local(p);
  const Vec2 b = local(q);
  const Vec2 d = b - a;
  double t0 = 0.0;
  double t1 = 1.0;
  const double half[2] = {0.5 * box.length, 0.5 * box.width};
  const double start[2] = {a.x, a.y};
  const double dir[2] = {d.x, d.y};
  for (int k = 0; k < 2; ++k) {
    if (std::abs(dir[k]) < 1e-15) {
      if (start[k] < -half[k] || start[k] > half[k]) {
        return false;
      }
      continue;
    }
    double ta = (-half[k] - start[k]) / dir[k];
    double tb = (half[k] - start[k]) / dir[k];
    if (ta > tb) {
      std::swap(ta, tb);
    }
    t0 = std::max(t0, ta);
    t1 = std::min(t1, tb);
    if (t0 > t1) {
      return false;
    }
  }
  return true;
}

namespace
{

int orientation(const Vec2 & a, const Vec2 & b, const Vec2 & c)
{
  const double v = cross(b - a, c - a);
  if (std::abs(v) < 1e-12) {
    return 0;
  }
  return v > 0 ? 1 : -1;
}

bool on_segment(const Vec2 & a, const Vec2 & b, const Vec2 & p)
{
  return std::min(a.x, b.x) - 1e-12 <= p.x && p.x <= std::max(a.x, b.x) + 1e-12 &&
         std::min(a.y, b.y) - 1e-12 <= p.y && p.y <= std::max(a.y, b.y) + 1e-12;
}

}  // namespace

bool segments_intersect(const Vec2 & a, const Vec2 & b, const Vec2 & c, const Vec2 & d)
{
  const int o1 = orientation(a, b, c);
  const int o2 = orientation(a, b, d);
  const int o3 = orientation(c, d, a);
  const int o4 = orientation(c, d, b);
  if (o1 != o2 && o3 != o4) {
    return true;
  }
  return (o1 == 0 && on_segment(a, b, c)) || (o2 == 0 && on_segment(a, b, d)) ||
         (o3 == 0 && on_segment(c, d, a)) || (o4 == 0 && on_segment(c, d, b));
}

bool point_in_polygon(const Vec2 & p, const std::vector<Vec2> & poly)
{
  const std::size_t n = poly.size();
  if (n < 3) {
    return false;
  }
  bool inside = false;
  for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
    const Vec2 & a = poly[i];
    const Vec2 & b = poly[j];
    if (orientation(a, b, p) == 0 && on_segment(a, b, p)) {
      return true;
    }
    if ((a.y > p.y) != (b.y > p.y)) {
      const double x = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
      if (p.x < x) {
        inside = !inside;
      }
    }
  }
  return inside;
}

bool is_simple_polygon(const std::vector<Vec2> & poly)
{
  const std::size_t n = poly.size();
  if (n < 3) {
    return false;
  }
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const bool adjacent = j == i + 1 || (i == 0 && j == n - 1);
      if (adjacent) {
        continue;
      }
      if (segments_intersect(poly[i], poly[(i + 1) % n], poly[j], poly[(j + 1) % n])) {
        return false;
      }
    }
  }
  return true;
}

Vec2 to_frame(const Pose2 & frame, const Vec2 & p)
{
  const double c = std::cos(frame.heading);
  const double s = std::sin(frame.heading);
  const double dx = p.x - frame.x;
  const double dy = p.y - frame.y;
  return {c * dx + s * dy, -s * dx + c * dy};
}

Vec2 from_frame(const Pose2 & frame, const Vec2 & p)
{
  const double c = std::cos(frame.heading);
  const double s = std::sin(frame.heading);
  return {frame.x + c * p.x - s * p.y, frame.y + s * p.x + c * p.y};
}

}  // namespace twm::geom
