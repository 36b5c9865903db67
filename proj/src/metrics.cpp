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

#include "twm/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <map>
#include <sstream>
#include <stdexcept>

namespace twm::metrics
{

using nlohmann::json;

namespace
{

constexpr double kDt = 0.1;

const std::array<const char *, kNumFeatures> kNames = {
  "valid_agents",      "entering_agents", "exiting_agents", "entering_distance", "exiting_distance",
  "offroad_rate",      "collision_rate",  "average_speed",  "tl_violation",      "tl_transition",
};

const std::array<const char *, kNumFeatures> kTitles = {
  "#Valid", "#Enter", "#Exit", "EnterDist", "ExitDist", "Offroad", "Collision", "AvgSpeed", "TLViol", "TLTrans",
};

}  // namespace

std::string feature_name(Feature f) { return kNames.at(static_cast<std::size_t>(f)); }

Feature feature_from_name(const std::string & name)
{
  for (int i = 0; i < kNumFeatures; ++i) {
    if (name == kNames[i]) {
      return static_cast<Feature>(i);
    }
  }
  throw std::invalid_argument("unknown metric feature '" + name + "'");
}

// ------------------------------------------------------------ histograms

Histogram::Histogram(double lo, double hi, int bins) : lo_(lo), hi_(hi), counts_(static_cast<std::size_t>(bins), 0.0)
{
  if (bins < 1 || !(hi > lo)) {
    throw std::invalid_argument("Histogram: need at least one bin over a non-empty range");
  }
}

void Histogram::add(double value)
{
  const int n = static_cast<int>(counts_.size());
  int k = static_cast<int>(std::floor((value - lo_) / (hi_ - lo_) * n));
  k = std::clamp(k, 0, n - 1);
  counts_[static_cast<std::size_t>(k)] += 1.0;
  total_ += 1.0;
}

void Histogram::add(const std::vector<double> & values)
{
  for (double v : values) {
    add(v);
  }
}

std::vector<double> Histogram::probabilities(double eps) const
{
  std::vector<double> p(counts_.size());
  const double denom = total_ + eps * static_cast<double>(counts_.size());
  for (std::size_t i = 0; i < p.size(); ++i) {
    p[i] = (counts_[i] + eps) / denom;
  }
  return p;
}

Histogram feature_histogram(Feature f, int max_agents)
{
  switch (f) {
    case Feature::ValidAgents:
    case Feature::EnteringAgents:
    case Feature::ExitingAgents:
      return {-0.5, max_agents + 0.5, max_agents + 1};
    case Feature::EnteringDistance:
    case Feature::ExitingDistance:
      return {0.0, 120.0, 32};
    case Feature::OffroadRate:
    case Feature::CollisionRate:
    case Feature::TLViolation:
      return {0.0, 1.0 + 1e-9, 20};
    case Feature::AverageSpeed:
      return {0.0, 25.0, 32};
    case Feature::TLTransition:
      break;
  }
  throw std::invalid_argument("feature_histogram: transition matrices have no histogram");
}

double js_divergence(const std::vector<double> & p, const std::vector<double> & q)
{
  if (p.size() != q.size()) {
    throw std::invalid_argument("js_divergence: length mismatch");
  }
  double acc_p = 0.0;
  double acc_q = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] < 0.0 || q[i] < 0.0) {
      throw std::invalid_argument("js_divergence: negative probability");
    }
    const double m = 0.5 * (p[i] + q[i]);
    if (p[i] > 0.0) {
      acc_p += p[i] * std::log2(p[i] / m);
    }
    if (q[i] > 0.0) {
      acc_q += q[i] * std::log2(q[i] / m);
    }
  }
  return std::clamp(0.5 * acc_p + 0.5 * acc_q, 0.0, 1.0);
}

std::vector<int> sliding_windows(int length, int window_len, int stride)
{
  if (window_len < 1 || stride < 1) {
    throw std::invalid_argument("sliding_windows: window length and stride must be positive");
  }
  if (length < window_len) {
    throw std::invalid_argument("sliding_windows: trace shorter than one window");
  }
  std::vector<int> out;
  for (int s = 0; s + window_len <= length; s += stride) {
    out.push_back(s);
  }
  return out;
}

// --------------------------------------------------------------- features

std::vector<double> WindowFeatures::values(Feature f) const
{
  switch (f) {
    case Feature::ValidAgents:
      return {static_cast<double>(valid_agents)};
    case Feature::EnteringAgents:
      return {static_cast<double>(entering_agents)};
    case Feature::ExitingAgents:
      return {static_cast<double>(exiting_agents)};
    case Feature::EnteringDistance:
      return entering_distance;
    case Feature::ExitingDistance:
      return exiting_distance;
    case Feature::OffroadRate:
      return {offroad_rate};
    case Feature::CollisionRate:
      return {collision_rate};
    case Feature::AverageSpeed:
      return empty ? std::vector<double>{} : std::vector<double>{average_speed};
    case Feature::TLViolation:
      return has_lights ? std::vector<double>{tl_violation} : std::vector<double>{};
    case Feature::TLTransition:
      break;
  }
  throw std::invalid_argument("WindowFeatures::values: unknown feature");
}

namespace
{

bool is_red_for_violation(tensor::SignalState s)
{
  return s == tensor::SignalState::SolidRed || s == tensor::SignalState::ArrowRed;
}

}  // namespace

WindowFeatures extract(const Scenario & s, const road::RoadGraph & map, int start, int len)
{
  if (start < 0 || len < 1 || start + len > s.steps) {
    throw std::invalid_argument("extract: window outside the scenario");
  }
  WindowFeatures w;
  const int end = start + len;
  const AgentTrack & ego = s.ego();

  // Valid boxes per step for collision tests.
  struct Box
  {
    int id;
    geom::Obb obb;
  };
  std::vector<std::vector<Box>> boxes(static_cast<std::size_t>(len));
  for (const auto & a : s.agents) {
    for (int t = std::max(start, a.birth); t < std::min(end, a.death()); ++t) {
      const auto & st = a.at(t);
      if (st.valid) {
        boxes[t - start].push_back({a.id, geom::Obb{{st.x, st.y}, st.heading, a.length, a.width}});
      }
    }
  }

  // Observed signal state per head and step.
  std::map<int, std::vector<tensor::SignalState>> head_state;
  for (const auto & l : s.lights) {
    for (int t = std::max(start, l.birth); t < std::min(end, l.death()); ++t) {
      const auto & st = l.at(t);
      if (!st.valid) {
        continue;
      }
      w.has_lights = true;
      if (l.head >= 0) {
        auto & v = head_state[l.head];
        v.resize(static_cast<std::size_t>(len), tensor::SignalState::Unknown);
        v[t - start] = st.state;
      }
    }
  }
  auto state_at = [&](int head, int t) {
    auto it = head_state.find(head);
    return it == head_state.end() ? tensor::SignalState::Unknown : it->second[t - start];
  };

  int offroad = 0;
  int colliding = 0;
  int violating = 0;
  double speed_sum = 0.0;
  int speed_agents = 0;
  for (const auto & a : s.agents) {
    if (a.id == s.ego_id) {
      continue;
    }
    const int lo = std::max(start, a.birth);
    const int hi = std::min(end, a.death());
    int first = -1;
    int last = -1;
    bool off = false;
    bool hit = false;
    bool viol = false;
    double v_sum = 0.0;
    int v_n = 0;
    for (int t = lo; t < hi; ++t) {
      const auto & st = a.at(t);
      if (!st.valid) {
        continue;
      }
      if (first < 0) {
        first = t;
      }
      const geom::Vec2 p{st.x, st.y};
      off = off || !map.on_drivable(p);
      if (!hit) {
        const geom::Obb mine{p, st.heading, a.length, a.width};
        for (const auto & b : boxes[t - start]) {
          if (b.id != a.id && geom::overlaps(mine, b.obb)) {
            hit = true;
            break;
          }
        }
      }
      if (last == t - 1 && last >= 0) {
        const auto & prev = a.at(t - 1);
        const geom::Vec2 q{prev.x, prev.y};
        v_sum += geom::distance(p, q) / kDt;
        ++v_n;
        if (!viol) {
          for (const auto & sl : map.stop_lines) {
            if (!geom::segments_intersect(q, p, sl.a, sl.b)) {
              continue;
            }
            const auto & lane = map.lanes[sl.lane];
            const double lane_dir = lane.heading_at(lane.length());
            if (geom::dot(p - q, {std::cos(lane_dir), std::sin(lane_dir)}) <= 0.0) {
              continue;
            }
            if (is_red_for_violation(state_at(sl.signal, t - 1)) || is_red_for_violation(state_at(sl.signal, t))) {
              viol = true;
              break;
            }
          }
        }
      }
      last = t;
    }
    if (first < 0) {
      continue;
    }
    ++w.valid_agents;
    if (first > start) {
      ++w.entering_agents;
      const auto & st = a.at(first);
      const auto & e = ego.at(first);
      w.entering_distance.push_back(std::hypot(st.x - e.x, st.y - e.y));
    }
    if (last < end - 1) {
      ++w.exiting_agents;
      const auto & st = a.at(last);
      const auto & e = ego.at(last);
      w.exiting_distance.push_back(std::hypot(st.x - e.x, st.y - e.y));
    }
    offroad += off;
    colliding += hit;
    violating += viol;
    if (v_n > 0) {
      speed_sum += v_sum / v_n;
      ++speed_agents;
    }
  }
  if (w.valid_agents > 0) {
    w.empty = false;
    const double n = w.valid_agents;
    w.offroad_rate = offroad / n;
    w.collision_rate = colliding / n;
    w.tl_violation = violating / n;
    w.average_speed = speed_agents > 0 ? speed_sum / speed_agents : 0.0;
  }
  return w;
}

// ------------------------------------------------------------- transitions

std::array<std::array<double, 9>, 9> TransitionMatrix::probabilities() const
{
  std::array<std::array<double, 9>, 9> p{};
  for (int i = 0; i < 9; ++i) {
    double row = 0.0;
    for (int j = 0; j < 9; ++j) {
      if (i != j) {
        row += counts[i][j];
      }
    }
    for (int j = 0; j < 9; ++j) {
      p[i][j] = (i == j || row == 0.0) ? 0.0 : counts[i][j] / row;
    }
  }
  return p;
}

double TransitionMatrix::total() const
{
  double t = 0.0;
  for (int i = 0; i < 9; ++i) {
    for (int j = 0; j < 9; ++j) {
      t += i == j ? 0.0 : counts[i][j];
    }
  }
  return t;
}

void TransitionMatrix::add(const Scenario & s, int start, int len)
{
  const int end = len < 0 ? s.steps : start + len;
  for (const auto & l : s.lights) {
    for (int t = std::max(start, l.birth) + 1; t < std::min(end, l.death()); ++t) {
      const auto & a = l.at(t - 1);
      const auto & b = l.at(t);
      if (a.valid && b.valid && a.state != b.state) {
        counts[static_cast<int>(a.state)][static_cast<int>(b.state)] += 1.0;
      }
    }
  }
}

double transition_jsd(const TransitionMatrix & a, const TransitionMatrix & b, double eps)
{
  auto flatten = [eps](const TransitionMatrix & m) {
    const auto p = m.probabilities();
    std::vector<double> v;
    v.reserve(81);
    double sum = 0.0;
    for (const auto & row : p) {
      for (double x : row) {
        v.push_back(x + eps);
        sum += x + eps;
      }
    }
    for (double & x : v) {
      x /= sum;
    }
    return v;
  };
  return js_divergence(flatten(a), flatten(b));
}

// --------------------------------------------------------------- composite

double composite(const std::array<std::optional<double>, kNumCompositeFeatures> & values, bool * partial)
{
  double sum = 0.0;
  int n = 0;
  for (const auto & v : values) {
    if (v) {
      sum += *v;
      ++n;
    }
  }
  if (n == 0) {
    throw std::invalid_argument("composite: every metric is missing");
  }
  if (partial != nullptr) {
    *partial = n < kNumCompositeFeatures;
  }
  return sum / n;
}

MetricReport evaluate(const std::vector<Scenario> & sim, const std::vector<Scenario> & reference,
                      const MetricConfig & cfg)
{
  if (sim.empty() || reference.empty()) {
    throw std::invalid_argument("evaluate: need at least one simulated and one reference scenario");
  }
  std::map<std::string, road::RoadGraph> maps;
  auto map_for = [&maps](const Scenario & s) -> const road::RoadGraph & {
    const std::string key = road::to_json(s.map).dump();
    auto it = maps.find(key);
    if (it == maps.end()) {
      it = maps.emplace(key, road::generate_map(s.map)).first;
    }
    return it->second;
  };

  MetricReport r;
  std::vector<WindowFeatures> ref_windows;
  TransitionMatrix ref_tm;
  for (const auto & s : reference) {
    const auto & map = map_for(s);
    for (int start : sliding_windows(s.steps, cfg.window_len, cfg.stride)) {
      ref_windows.push_back(extract(s, map, start, cfg.window_len));
    }
    ref_tm.add(s);
  }
  r.ref_windows = static_cast<int>(ref_windows.size());
  std::vector<std::vector<WindowFeatures>> by_index;
  TransitionMatrix sim_tm;
  for (const auto & s : sim) {
    const auto & map = map_for(s);
    const auto starts = sliding_windows(s.steps, cfg.window_len, cfg.stride);
    if (by_index.size() < starts.size()) {
      by_index.resize(starts.size());
    }
    for (std::size_t k = 0; k < starts.size(); ++k) {
      by_index[k].push_back(extract(s, map, starts[k], cfg.window_len));
    }
    sim_tm.add(s);
    r.sim_windows += static_cast<int>(starts.size());
  }

  for (int f = 0; f < kNumFeatures - 1; ++f) {
    const Feature feat = static_cast<Feature>(f);
    Histogram ref_h = feature_histogram(feat, cfg.max_agents);
    for (const auto & w : ref_windows) {
      ref_h.add(w.values(feat));
    }
    double sum = 0.0;
    int n = 0;
    for (std::size_t k = 0; k < by_index.size(); ++k) {
      const auto & windows = by_index[k];
      Histogram h = feature_histogram(feat, cfg.max_agents);
      for (const auto & w : windows) {
        h.add(w.values(feat));
      }
      if (h.total() == 0.0 || ref_h.total() == 0.0) {
        r.curves[f].push_back(std::numeric_limits<double>::quiet_NaN());
        continue;
      }
      const double d = js_divergence(h.probabilities(cfg.eps), ref_h.probabilities(cfg.eps));
      r.curves[f].push_back(d);
      sum += d;
      ++n;
    }
    if (n > 0) {
      r.jsd[f] = sum / n;
    }
  }
  if (sim_tm.total() > 0.0 && ref_tm.total() > 0.0) {
    r.jsd[static_cast<int>(Feature::TLTransition)] = transition_jsd(sim_tm, ref_tm, cfg.eps);
  }

  std::array<std::optional<double>, kNumCompositeFeatures> eight;
  std::copy(r.jsd.begin(), r.jsd.begin() + kNumCompositeFeatures, eight.begin());
  if (std::any_of(eight.begin(), eight.end(), [](const auto & v) { return v.has_value(); })) {
    r.composite = composite(eight, &r.composite_partial);
  } else {
    r.composite_partial = true;
  }
  double sum = 0.0;
  int n = 0;
  for (const auto & v : r.jsd) {
    if (v) {
      sum += *v;
      ++n;
    }
  }
  if (n > 0) {
    r.all_ten_mean = sum / n;
  }
  return r;
}

// ------------------------------------------------------------------ output

json to_json(const MetricReport & r)
{
  json jsd = json::object();
  json curves = json::object();
  for (int f = 0; f < kNumFeatures; ++f) {
    jsd[kNames[f]] = r.jsd[f] ? json(*r.jsd[f]) : json(nullptr);
    json c = json::array();
    for (double v : r.curves[f]) {
      c.push_back(std::isnan(v) ? json(nullptr) : json(v));
    }
    curves[kNames[f]] = c;
  }
  return {
    {"jsd", jsd},
    {"composite", r.composite ? json(*r.composite) : json(nullptr)},
    {"composite_partial", r.composite_partial},
    {"all_ten_mean", r.all_ten_mean ? json(*r.all_ten_mean) : json(nullptr)},
    {"sim_windows", r.sim_windows},
    {"ref_windows", r.ref_windows},
    {"curves", curves},
  };
}

std::string format_table(const std::vector<std::pair<std::string, MetricReport>> & rows)
{
  std::size_t label = 5;
  for (const auto & [name, r] : rows) {
    label = std::max(label, name.size());
  }
  std::ostringstream os;
  os << std::left << std::setw(static_cast<int>(label)) << "Run";
  for (const char * t : kTitles) {
    os << "  " << std::right << std::setw(9) << t;
  }
  os << "  " << std::setw(9) << "Composite" << "\n";
  for (const auto & [name, r] : rows) {
    os << std::left << std::setw(static_cast<int>(label)) << name << std::right << std::fixed << std::setprecision(4);
    for (const auto & v : r.jsd) {
      os << "  " << std::setw(9);
      if (v) {
        os << *v;
      } else {
        os << "-";
      }
    }
    os << "  " << std::setw(9);
    if (r.composite) {
      os << *r.composite;
    } else {
      os << "-";
    }
    os << "\n";
  }
  return os.str();
}

std::string format_curves(const MetricReport & r)
{
  std::ostringstream os;
  os << "window";
  for (int f = 0; f < kNumFeatures - 1; ++f) {
    os << "," << kNames[f];
  }
  os << "\n";
  std::size_t n = 0;
  for (int f = 0; f < kNumFeatures - 1; ++f) {
    n = std::max(n, r.curves[f].size());
  }
  os << std::setprecision(6);
  for (std::size_t k = 0; k < n; ++k) {
    os << k;
    for (int f = 0; f < kNumFeatures - 1; ++f) {
      os << ",";
      if (k < r.curves[f].size() && !std::isnan(r.curves[f][k])) {
        os << r.curves[f][k];
      }
    }
    os << "\n";
  }
  return os.str();
}

}  // namespace twm::metrics
