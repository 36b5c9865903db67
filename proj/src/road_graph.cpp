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

#include "twm/road_graph.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <numeric>
#include <random>
#include <stdexcept>

namespace twm::road
{

using nlohmann::json;

namespace
{

constexpr double kLaneOffset = 2.0;
constexpr double kHalfRoad = 4.0;
constexpr double kIntersectionHalf = 6.0;
constexpr double kSidewalkInner = 4.5;
constexpr double kSidewalkOuter = 7.0;
constexpr double kLotMargin = 9.0;

const Vec2 kDirs[4] = {{1, 0}, {0, 1}, {-1, 0}, {0, -1}};

Vec2 right_of(const Vec2 & u) { return {u.y, -u.x}; }

std::vector<Vec2> sample_segment(const Vec2 & a, const Vec2 & b, double spacing)
{
  const double len = geom::distance(a, b);
  const int n = std::max(1, static_cast<int>(std::ceil(len / spacing)));
  std::vector<Vec2> pts;
  for (int i = 0; i <= n; ++i) {
    pts.push_back(a + (b - a) * (static_cast<double>(i) / n));
  }
  return pts;
}

std::vector<Vec2> rect(const Vec2 & a, const Vec2 & b, double half_width)
{
  const Vec2 d = b - a;
  const double len = geom::norm(d);
  const Vec2 u = d * (1.0 / len);
  const Vec2 r = right_of(u) * half_width;
  return {a + r, b + r, b - r, a - r};
}

std::vector<Vec2> strip(const Vec2 & a, const Vec2 & b, double inner, double outer, double side)
{
  const Vec2 d = b - a;
  const Vec2 u = d * (1.0 / geom::norm(d));
  const Vec2 r = right_of(u) * side;
  return {a + r * inner, b + r * inner, b + r * outer, a + r * outer};
}

}  // namespace

Vec2 Lane::point_at(double s) const
{
  if (points.size() < 2) {
    return points.empty() ? Vec2{} : points.front();
  }
  s = std::clamp(s, 0.0, length());
  auto it = std::upper_bound(cumulative.begin(), cumulative.end(), s);
  std::size_t i = static_cast<std::size_t>(std::distance(cumulative.begin(), it));
  i = std::clamp<std::size_t>(i, 1, points.size() - 1);
  const double seg = cumulative[i] - cumulative[i - 1];
  const double f = seg > 0 ? (s - cumulative[i - 1]) / seg : 0.0;
  return points[i - 1] + (points[i] - points[i - 1]) * f;
}

double Lane::heading_at(double s) const
{
  if (points.size() < 2) {
    return 0.0;
  }
  s = std::clamp(s, 0.0, length());
  auto it = std::upper_bound(cumulative.begin(), cumulative.end(), s);
  std::size_t i = static_cast<std::size_t>(std::distance(cumulative.begin(), it));
  i = std::clamp<std::size_t>(i, 1, points.size() - 1);
  const Vec2 d = points[i] - points[i - 1];
  return std::atan2(d.y, d.x);
}

double Lane::project(const Vec2 & p, double * dist) const
{
  double best = 1e300;
  double best_s = 0.0;
  for (std::size_t i = 1; i < points.size(); ++i) {
    const Vec2 a = points[i - 1];
    const Vec2 d = points[i] - a;
    const double l2 = geom::dot(d, d);
    const double f = l2 > 0 ? std::clamp(geom::dot(p - a, d) / l2, 0.0, 1.0) : 0.0;
    const double dd = geom::distance(p, a + d * f);
    if (dd < best) {
      best = dd;
      best_s = cumulative[i - 1] + f * std::sqrt(l2);
    }
  }
  if (dist != nullptr) {
    *dist = best;
  }
  return best_s;
}

void RoadGraph::finalize()
{
  for (auto & l : lanes) {
    l.cumulative.assign(l.points.size(), 0.0);
    for (std::size_t i = 1; i < l.points.size(); ++i) {
      l.cumulative[i] = l.cumulative[i - 1] + geom::distance(l.points[i - 1], l.points[i]);
    }
    l.predecessors.clear();
  }
  for (const auto & l : lanes) {
    for (int s : l.successors) {
      lanes[s].predecessors.push_back(l.id);
    }
  }
}

void RoadGraph::validate() const
{
  const int n = static_cast<int>(lanes.size());
  auto check = [&](int id, const char * what) {
    if (id < 0 || id >= n) {
      throw std::runtime_error(std::string("roadgraph: ") + what + " references missing lane " + std::to_string(id));
    }
  };
  for (std::size_t i = 0; i < lanes.size(); ++i) {
    const auto & l = lanes[i];
    if (l.id != static_cast<int>(i)) {
      throw std::runtime_error("roadgraph: lane ids must equal their index");
    }
    if (l.points.size() < 2) {
      throw std::runtime_error("roadgraph: lane " + std::to_string(l.id) + " has fewer than two points");
    }
    for (int s : l.successors) {
      check(s, "successor edge");
    }
    for (int s : l.neighbors) {
      check(s, "neighbor edge");
    }
  }
  for (const auto & s : signals) {
    if (s.lanes.empty()) {
      throw std::runtime_error("roadgraph: signal head without lanes");
    }
    for (int l : s.lanes) {
      check(l, "signal head");
    }
  }
  for (const auto & s : stop_lines) {
    check(s.lane, "stop line");
    if (s.signal < 0 || s.signal >= static_cast<int>(signals.size())) {
      throw std::runtime_error("roadgraph: stop line references missing signal");
    }
  }
  for (const auto * group : {&drivable, &parking_lots, &sidewalks}) {
    for (const auto & p : *group) {
      if (!geom::is_simple_polygon(p.points)) {
        throw std::runtime_error("roadgraph: polygon is not simple");
      }
    }
  }
}

bool RoadGraph::inside_extent(const Vec2 & p, double margin) const
{
  return p.x >= extent_min.x - margin && p.x <= extent_max.x + margin && p.y >= extent_min.y - margin &&
         p.y <= extent_max.y + margin;
}

bool RoadGraph::on_drivable(const Vec2 & p) const
{
  return std::any_of(drivable.begin(), drivable.end(), [&](const Polygon & g) {
    return geom::point_in_polygon(p, g.points);
  });
}

bool RoadGraph::in_parking_lot(const Vec2 & p) const
{
  return std::any_of(parking_lots.begin(), parking_lots.end(), [&](const Polygon & g) {
    return geom::point_in_polygon(p, g.points);
  });
}

int RoadGraph::nearest_lane(
  const Vec2 & p, double heading, double max_dist, double max_heading_error, double * s_out) const
{
  int best = -1;
  double best_d = max_dist;
  double best_s = 0.0;
  for (const auto & l : lanes) {
    double d = 0.0;
    const double s = l.project(p, &d);
    if (d > best_d) {
      continue;
    }
    if (std::abs(geom::wrap_angle(l.heading_at(s) - heading)) > max_heading_error) {
      continue;
    }
    // Prefer road lanes over connectors at equal distance.
    if (d < best_d || (d == best_d && best >= 0 && lanes[best].kind == LaneKind::Connector)) {
      best = l.id;
      best_d = d;
      best_s = s;
    }
  }
  if (s_out != nullptr) {
    *s_out = best_s;
  }
  return best;
}

bool RoadGraph::strongly_connected() const
{
  // Interior lanes: everything except boundary stubs and the connectors that touch them.
  std::vector<char> interior(lanes.size(), 1);
  for (const auto & l : lanes) {
    if (l.entry || l.exit) {
      interior[l.id] = 0;
    }
  }
  for (const auto & l : lanes) {
    if (l.kind == LaneKind::Connector) {
      for (int p : l.predecessors) {
        if (!interior[p]) {
          interior[l.id] = 0;
        }
      }
      for (int s : l.successors) {
        if (!interior[s]) {
          interior[l.id] = 0;
        }
      }
    }
  }
  int start = -1;
  std::size_t count = 0;
  for (const auto & l : lanes) {
    if (interior[l.id]) {
      ++count;
      if (start < 0) {
        start = l.id;
      }
    }
  }
  if (count == 0) {
    return true;
  }
  auto reach = [&](bool forward) {
    std::vector<char> seen(lanes.size(), 0);
    std::deque<int> q{start};
    seen[start] = 1;
    std::size_t n = 1;
    while (!q.empty()) {
      const int u = q.front();
      q.pop_front();
      const auto & next = forward ? lanes[u].successors : lanes[u].predecessors;
      for (int v : next) {
        if (interior[v] && !seen[v]) {
          seen[v] = 1;
          ++n;
          q.push_back(v);
        }
      }
    }
    return n;
  };
  return reach(true) == count && reach(false) == count;
}

void MapParams::validate() const
{
  if (rows < 1 || cols < 1) {
    throw std::invalid_argument("map: rows and cols must be >= 1");
  }
  if (!(block_size >= 2 * kIntersectionHalf + 10.0)) {
    throw std::invalid_argument("map: block size too small");
  }
  if (parking_lot_fraction < 0.0 || parking_lot_fraction > 1.0 || !(speed_limit > 0.0)) {
    throw std::invalid_argument("map: parking_lot_fraction must lie in [0, 1] and speed_limit be positive");
  }
}

RoadGraph generate_map(const MapParams & params)
{
  params.validate();
  RoadGraph g;
  g.rows = params.rows;
  g.cols = params.cols;
  g.block_size = params.block_size;
  g.seed = params.seed;
  const double B = params.block_size;
  const double hs = kIntersectionHalf;
  g.extent_min = {-B / 2, -B / 2};
  g.extent_max = {(params.cols - 1) * B + B / 2, (params.rows - 1) * B + B / 2};

  const int nn = params.rows * params.cols;
  auto center = [&](int n) { return Vec2{(n % params.cols) * B, (n / params.cols) * B}; };
  auto neighbor = [&](int n, int d) {
    const int c = n % params.cols + static_cast<int>(kDirs[d].x);
    const int r = n / params.cols + static_cast<int>(kDirs[d].y);
    if (c < 0 || r < 0 || c >= params.cols || r >= params.rows) {
      return -1;
    }
    return r * params.cols + c;
  };

  for (int n = 0; n < nn; ++n) {
    g.intersections.push_back({n, center(n), hs});
  }

  std::vector<std::array<int, 4>> incoming(nn, {-1, -1, -1, -1});
  std::vector<std::array<int, 4>> outgoing(nn, {-1, -1, -1, -1});

  auto add_lane = [&](const Vec2 & a, const Vec2 & b, LaneKind kind) {
    Lane l;
    l.id = static_cast<int>(g.lanes.size());
    l.kind = kind;
    l.points = sample_segment(a, b, 5.0);
    l.speed_limit = params.speed_limit;
    g.lanes.push_back(l);
    return l.id;
  };

  for (int n = 0; n < nn; ++n) {
    const Vec2 c = center(n);
    for (int d = 0; d < 4; ++d) {
      const Vec2 u = kDirs[d];
      const int m = neighbor(n, d);
      if (m >= 0) {
        if (d >= 2) {
          continue;
        }
        const Vec2 cm = center(m);
        const Vec2 ru = right_of(u) * kLaneOffset;
        const int fwd = add_lane(c + u * hs + ru, cm - u * hs + ru, LaneKind::Road);
        const Vec2 v = u * -1.0;
        const Vec2 rv = right_of(v) * kLaneOffset;
        const int back = add_lane(cm + v * hs + rv, c - v * hs + rv, LaneKind::Road);
        g.lanes[fwd].neighbors.push_back(back);
        g.lanes[back].neighbors.push_back(fwd);
        outgoing[n][d] = fwd;
        incoming[m][(d + 2) % 4] = fwd;
        outgoing[m][(d + 2) % 4] = back;
        incoming[n][d] = back;
      } else {
        const Vec2 v = u * -1.0;
        const Vec2 rv = right_of(v) * kLaneOffset;
        const int in = add_lane(c + u * (B / 2) + rv, c + u * hs + rv, LaneKind::Road);
        g.lanes[in].entry = true;
        const Vec2 ru = right_of(u) * kLaneOffset;
        const int out = add_lane(c + u * hs + ru, c + u * (B / 2) + ru, LaneKind::Road);
        g.lanes[out].exit = true;
        g.lanes[in].neighbors.push_back(out);
        g.lanes[out].neighbors.push_back(in);
        incoming[n][d] = in;
        outgoing[n][d] = out;
      }
    }
  }

  // Connectors, stop lines and signal heads per approach.
  for (int n = 0; n < nn; ++n) {
    for (int din = 0; din < 4; ++din) {
      const int lin = incoming[n][din];
      const Vec2 uin = kDirs[(din + 2) % 4];
      const int travel = (din + 2) % 4;
      const Vec2 p0 = g.lanes[lin].points.back();
      SignalHead head;
      head.id = static_cast<int>(g.signals.size());
      head.intersection = n;
      head.axis = din % 2;
      const Vec2 hp = p0 + right_of(uin) * 3.0;
      head.x = hp.x;
      head.y = hp.y;
      head.z = 5.0;
      head.lanes.push_back(lin);
      for (int dout = 0; dout < 4; ++dout) {
        if (dout == din) {
          continue;
        }
        const int lout = outgoing[n][dout];
        const Vec2 p2 = g.lanes[lout].points.front();
        Turn turn = Turn::Straight;
        if (dout == (travel + 1) % 4) {
          turn = Turn::Left;
        } else if (dout == (travel + 3) % 4) {
          turn = Turn::Right;
        }
        Vec2 ctrl = (p0 + p2) * 0.5;
        if (turn != Turn::Straight) {
          ctrl = p0 + uin * geom::dot(p2 - p0, uin);
        }
        Lane l;
        l.id = static_cast<int>(g.lanes.size());
        l.kind = LaneKind::Connector;
        l.turn = turn;
        l.intersection = n;
        l.speed_limit = turn == Turn::Straight ? params.speed_limit : std::min(params.speed_limit, 7.0);
        const int segs = 8;
        for (int i = 0; i <= segs; ++i) {
          const double t = static_cast<double>(i) / segs;
          l.points.push_back(p0 * ((1 - t) * (1 - t)) + ctrl * (2 * (1 - t) * t) + p2 * (t * t));
        }
        l.successors.push_back(lout);
        g.lanes[lin].successors.push_back(l.id);
        head.lanes.push_back(l.id);
        g.lanes.push_back(std::move(l));
      }
      StopLine sl;
      sl.id = static_cast<int>(g.stop_lines.size());
      sl.a = p0 + right_of(uin) * kLaneOffset;
      sl.b = p0 - right_of(uin) * kLaneOffset;
      sl.lane = lin;
      sl.signal = head.id;
      g.lanes[lin].stop_line = sl.id;
      g.stop_lines.push_back(sl);
      g.signals.push_back(std::move(head));
    }
  }

  // Drivable surface: intersection squares plus road rectangles.
  for (int n = 0; n < nn; ++n) {
    const Vec2 c = center(n);
    g.drivable.push_back({{{c.x - hs, c.y - hs}, {c.x + hs, c.y - hs}, {c.x + hs, c.y + hs}, {c.x - hs, c.y + hs}}});
  }
  for (int n = 0; n < nn; ++n) {
    const Vec2 c = center(n);
    for (int d = 0; d < 4; ++d) {
      const Vec2 u = kDirs[d];
      const int m = neighbor(n, d);
      Vec2 a = c + u * hs;
      Vec2 b;
      if (m >= 0) {
        if (d >= 2) {
          continue;
        }
        b = center(m) - u * hs;
      } else {
        b = c + u * (B / 2);
      }
      g.drivable.push_back({rect(a, b, kHalfRoad)});
      g.sidewalks.push_back({strip(a, b, kSidewalkInner, kSidewalkOuter, 1.0)});
      g.sidewalks.push_back({strip(a, b, kSidewalkInner, kSidewalkOuter, -1.0)});
    }
  }

  // Parking lots in a seeded subset of grid cells.
  std::vector<double> xs{-B / 2};
  for (int c = 0; c < params.cols; ++c) {
    xs.push_back(c * B);
  }
  xs.push_back((params.cols - 1) * B + B / 2);
  std::vector<double> ys{-B / 2};
  for (int r = 0; r < params.rows; ++r) {
    ys.push_back(r * B);
  }
  ys.push_back((params.rows - 1) * B + B / 2);
  std::mt19937_64 rng(params.seed);
  std::bernoulli_distribution lot(params.parking_lot_fraction);
  for (std::size_t j = 0; j + 1 < ys.size(); ++j) {
    for (std::size_t i = 0; i + 1 < xs.size(); ++i) {
      const bool take = lot(rng);
      const double x0 = xs[i] + kLotMargin;
      const double x1 = xs[i + 1] - kLotMargin;
      const double y0 = ys[j] + kLotMargin;
      const double y1 = ys[j + 1] - kLotMargin;
      if (take && x1 - x0 > 6.0 && y1 - y0 > 6.0) {
        g.parking_lots.push_back({{{x0, y0}, {x1, y0}, {x1, y1}, {x0, y1}}});
      }
    }
  }

  g.finalize();
  g.validate();
  return g;
}

// ------------------------------------------------------------------ JSON

namespace
{

json points_json(const std::vector<Vec2> & pts)
{
  json a = json::array();
  for (const auto & p : pts) {
    a.push_back({p.x, p.y});
  }
  return a;
}

std::vector<Vec2> points_from(const json & a)
{
  std::vector<Vec2> pts;
  for (const auto & p : a) {
    pts.push_back({p.at(0).get<double>(), p.at(1).get<double>()});
  }
  return pts;
}

json polys_json(const std::vector<Polygon> & ps)
{
  json a = json::array();
  for (const auto & p : ps) {
    a.push_back(points_json(p.points));
  }
  return a;
}

std::vector<Polygon> polys_from(const json & a)
{
  std::vector<Polygon> out;
  for (const auto & p : a) {
    out.push_back({points_from(p)});
  }
  return out;
}

const char * turn_name(Turn t)
{
  switch (t) {
    case Turn::Straight: return "straight";
    case Turn::Left: return "left";
    case Turn::Right: return "right";
    default: return "none";
  }
}

Turn turn_from(const std::string & s)
{
  if (s == "straight") return Turn::Straight;
  if (s == "left") return Turn::Left;
  if (s == "right") return Turn::Right;
  return Turn::None;
}

}  // namespace

json to_json(const MapParams & p)
{
  return {{"rows", p.rows}, {"cols", p.cols}, {"block_size", p.block_size},
          {"parking_lot_fraction", p.parking_lot_fraction}, {"speed_limit", p.speed_limit}, {"seed", p.seed}};
}

MapParams map_params_from_json(const json & j)
{
  MapParams p;
  p.rows = j.value("rows", p.rows);
  p.cols = j.value("cols", p.cols);
  p.block_size = j.value("block_size", p.block_size);
  p.parking_lot_fraction = j.value("parking_lot_fraction", p.parking_lot_fraction);
  p.speed_limit = j.value("speed_limit", p.speed_limit);
  p.seed = j.value("seed", p.seed);
  p.validate();
  return p;
}

json to_json(const RoadGraph & g)
{
  json lanes = json::array();
  for (const auto & l : g.lanes) {
    lanes.push_back({
      {"id", l.id},
      {"kind", l.kind == LaneKind::Road ? "road" : "connector"},
      {"turn", turn_name(l.turn)},
      {"points", points_json(l.points)},
      {"speed_limit", l.speed_limit},
      {"successors", l.successors},
      {"neighbors", l.neighbors},
      {"entry", l.entry},
      {"exit", l.exit},
      {"stop_line", l.stop_line},
      {"intersection", l.intersection},
    });
  }
  json stops = json::array();
  for (const auto & s : g.stop_lines) {
    stops.push_back({{"id", s.id}, {"a", {s.a.x, s.a.y}}, {"b", {s.b.x, s.b.y}}, {"lane", s.lane}, {"signal", s.signal}});
  }
  json sigs = json::array();
  for (const auto & s : g.signals) {
    sigs.push_back({{"id", s.id}, {"position", {s.x, s.y, s.z}}, {"lanes", s.lanes},
                    {"intersection", s.intersection}, {"axis", s.axis}});
  }
  json inters = json::array();
  for (const auto & i : g.intersections) {
    inters.push_back({{"id", i.id}, {"center", {i.center.x, i.center.y}}, {"half_size", i.half_size}});
  }
  return {
    {"format", "twm-roadgraph"},
    {"version", 1},
    {"rows", g.rows},
    {"cols", g.cols},
    {"block_size", g.block_size},
    {"seed", g.seed},
    {"extent", {g.extent_min.x, g.extent_min.y, g.extent_max.x, g.extent_max.y}},
    {"lanes", lanes},
    {"stop_lines", stops},
    {"signals", sigs},
    {"intersections", inters},
    {"drivable", polys_json(g.drivable)},
    {"parking_lots", polys_json(g.parking_lots)},
    {"sidewalks", polys_json(g.sidewalks)},
  };
}

RoadGraph road_graph_from_json(const json & j)
{
  RoadGraph g;
  g.rows = j.at("rows").get<int>();
  g.cols = j.at("cols").get<int>();
  g.block_size = j.at("block_size").get<double>();
  g.seed = j.at("seed").get<std::uint64_t>();
  const auto & e = j.at("extent");
  g.extent_min = {e.at(0).get<double>(), e.at(1).get<double>()};
  g.extent_max = {e.at(2).get<double>(), e.at(3).get<double>()};
  for (const auto & lj : j.at("lanes")) {
    Lane l;
    l.id = lj.at("id").get<int>();
    l.kind = lj.at("kind").get<std::string>() == "road" ? LaneKind::Road : LaneKind::Connector;
    l.turn = turn_from(lj.at("turn").get<std::string>());
    l.points = points_from(lj.at("points"));
    l.speed_limit = lj.at("speed_limit").get<double>();
    l.successors = lj.at("successors").get<std::vector<int>>();
    l.neighbors = lj.at("neighbors").get<std::vector<int>>();
    l.entry = lj.at("entry").get<bool>();
    l.exit = lj.at("exit").get<bool>();
    l.stop_line = lj.at("stop_line").get<int>();
    l.intersection = lj.at("intersection").get<int>();
    g.lanes.push_back(std::move(l));
  }
  for (const auto & sj : j.at("stop_lines")) {
    StopLine s;
    s.id = sj.at("id").get<int>();
    s.a = {sj.at("a").at(0).get<double>(), sj.at("a").at(1).get<double>()};
    s.b = {sj.at("b").at(0).get<double>(), sj.at("b").at(1).get<double>()};
    s.lane = sj.at("lane").get<int>();
    s.signal = sj.at("signal").get<int>();
    g.stop_lines.push_back(s);
  }
  for (const auto & sj : j.at("signals")) {
    SignalHead s;
    s.id = sj.at("id").get<int>();
    s.x = sj.at("position").at(0).get<double>();
    s.y = sj.at("position").at(1).get<double>();
    s.z = sj.at("position").at(2).get<double>();
    s.lanes = sj.at("lanes").get<std::vector<int>>();
    s.intersection = sj.at("intersection").get<int>();
    s.axis = sj.at("axis").get<int>();
    g.signals.push_back(std::move(s));
  }
  for (const auto & ij : j.at("intersections")) {
    g.intersections.push_back({ij.at("id").get<int>(),
                               {ij.at("center").at(0).get<double>(), ij.at("center").at(1).get<double>()},
                               ij.at("half_size").get<double>()});
  }
  g.drivable = polys_from(j.at("drivable"));
  g.parking_lots = polys_from(j.at("parking_lots"));
  g.sidewalks = polys_from(j.at("sidewalks"));
  g.finalize();
  g.validate();
  return g;
}

// --------------------------------------------------------------- context

std::vector<ContextPoint> context_points(const RoadGraph & g, double spacing)
{
  std::vector<ContextPoint> out;
  for (const auto & l : g.lanes) {
    const double len = l.length();
    const int n = std::max(1, static_cast<int>(std::floor(len / spacing)));
    for (int i = 0; i <= n; ++i) {
      const double s = len * i / n;
      const double h = l.heading_at(s);
      out.push_back({l.point_at(s), {std::cos(h), std::sin(h)}, l.kind == LaneKind::Road ? 0 : 1});
    }
  }
  for (const auto & s : g.stop_lines) {
    const Vec2 d = s.b - s.a;
    const Vec2 u = d * (1.0 / geom::norm(d));
    for (int i = 0; i <= 2; ++i) {
      out.push_back({s.a + d * (i / 2.0), u, 2});
    }
  }
  auto outline = [&](const Polygon & poly, int kind, double step) {
    const std::size_t n = poly.points.size();
    for (std::size_t i = 0; i < n; ++i) {
      const Vec2 a = poly.points[i];
      const Vec2 b = poly.points[(i + 1) % n];
      const Vec2 d = b - a;
      const double len = geom::norm(d);
      const Vec2 u = d * (1.0 / len);
      const int k = std::max(1, static_cast<int>(std::floor(len / step)));
      for (int j = 0; j < k; ++j) {
        out.push_back({a + d * (static_cast<double>(j) / k), u, kind});
      }
    }
  };
  for (const auto & p : g.parking_lots) {
    outline(p, 3, 2 * spacing);
  }
  // Road edges: the long sides of each road rectangle.
  for (std::size_t i = g.intersections.size(); i < g.drivable.size(); ++i) {
    const auto & r = g.drivable[i].points;
    for (int side = 0; side < 2; ++side) {
      const Vec2 a = r[side * 2];
      const Vec2 b = r[side * 2 + 1];
      const Vec2 d = b - a;
      const double len = geom::norm(d);
      const Vec2 u = d * (1.0 / len);
      const int k = std::max(1, static_cast<int>(std::floor(len / (2 * spacing))));
      for (int j = 0; j <= k; ++j) {
        out.push_back({a + d * (static_cast<double>(j) / k), u, 4});
      }
    }
  }
  return out;
}

tensor::RoadContext crop_context(
  const std::vector<ContextPoint> & points, const geom::Pose2 & ego, double radius, int max_points,
  double position_scale)
{
  std::vector<std::pair<double, std::size_t>> order;
  for (std::size_t i = 0; i < points.size(); ++i) {
    const double d = std::hypot(points[i].p.x - ego.x, points[i].p.y - ego.y);
    if (d <= radius) {
      order.emplace_back(d, i);
    }
  }
  std::stable_sort(order.begin(), order.end(), [](const auto & a, const auto & b) { return a.first < b.first; });
  if (static_cast<int>(order.size()) > max_points) {
    order.resize(static_cast<std::size_t>(max_points));
  }
  const double c = std::cos(ego.heading);
  const double s = std::sin(ego.heading);
  tensor::RoadContext ctx;
  ctx.features.reserve(order.size() * tensor::RoadContext::kFeatures);
  for (const auto & [d, i] : order) {
    const auto & cp = points[i];
    const Vec2 p = geom::to_frame(ego, cp.p);
    const Vec2 dir{c * cp.dir.x + s * cp.dir.y, -s * cp.dir.x + c * cp.dir.y};
    ctx.features.push_back(p.x * position_scale);
    ctx.features.push_back(p.y * position_scale);
    ctx.features.push_back(dir.x);
    ctx.features.push_back(dir.y);
    for (int k = 0; k < 5; ++k) {
      ctx.features.push_back(k == cp.kind ? 1.0 : 0.0);
    }
  }
  return ctx;
}

}  // namespace twm::road
