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

#ifndef TWM__METRICS_HPP_
#define TWM__METRICS_HPP_

#include "twm/road_graph.hpp"
#include "twm/scenario.hpp"

#include <json.hpp>

#include <array>
#include <optional>
#include <string>
#include <vector>

namespace twm::metrics
{

enum class Feature : int {
  ValidAgents = 0,
  EnteringAgents,
  ExitingAgents,
  EnteringDistance,
  ExitingDistance,
  OffroadRate,
  CollisionRate,
  AverageSpeed,
  TLViolation,
  TLTransition,
};
inline constexpr int kNumFeatures = 10;
inline constexpr int kNumCompositeFeatures = 8;

std::string feature_name(Feature f);
Feature feature_from_name(const std::string & name);

/// Fixed-edge histogram over [lo, hi) with `bins` equal bins; values outside
/// are clamped into the edge bins.
class Histogram
{
public:
  Histogram(double lo, double hi, int bins);
  void add(double value);
  void add(const std::vector<double> & values);
  const std::vector<double> & counts() const { return counts_; }
  double total() const { return total_; }
  /// (count + eps) / (total + bins * eps)
  std::vector<double> probabilities(double eps = 1e-9) const;

private:
  double lo_;
  double hi_;
  std::vector<double> counts_;
  double total_ = 0.0;
};

/// Bin layout of a feature: integer bins 0..max_agents for counts, 32 bins over
/// [0, 120] m for distances, 20 bins over [0, 1] for rates, 32 bins over
/// [0, 25] m/s for speed.
Histogram feature_histogram(Feature f, int max_agents);

/// Base-2 Jensen-Shannon divergence. Throws std::invalid_argument on length
/// mismatch or negative entries.
double js_divergence(const std::vector<double> & p, const std::vector<double> & q);

/// Offsets of complete windows.
std::vector<int> sliding_windows(int length, int window_len, int stride);

struct WindowFeatures
{
  int valid_agents = 0;
  int entering_agents = 0;
  int exiting_agents = 0;
  std::vector<double> entering_distance;
  std::vector<double> exiting_distance;
  double offroad_rate = 0.0;
  double collision_rate = 0.0;
  double average_speed = 0.0;
  double tl_violation = 0.0;
  bool empty = true;       // no valid non-ego agent
  bool has_lights = false; // any valid light observation in the window

  /// Values contributed to a feature's histogram.
  std::vector<double> values(Feature f) const;
};

/// Features of the window [start, start + len). The ego is excluded from
/// every agent feature but counts as a collision partner.
WindowFeatures extract(const Scenario & s, const road::RoadGraph & map, int start, int len);

/// 9 x 9 signal-state transition matrix.
struct TransitionMatrix
{
  std::array<std::array<double, 9>, 9> counts{};
  /// Rows normalized, diagonal zero; all-zero rows stay zero.
  std::array<std::array<double, 9>, 9> probabilities() const;
  double total() const;
  void add(const Scenario & s, int start = 0, int len = -1);
};

/// JSD of two transition matrices, each flattened into one distribution.
double transition_jsd(const TransitionMatrix & a, const TransitionMatrix & b, double eps = 1e-9);

struct MetricConfig
{
  int window_len = 91;
  int stride = 91;
  int max_agents = 32;
  double eps = 1e-9;
};

struct MetricReport
{
  std::array<std::optional<double>, kNumFeatures> jsd{};
  std::array<std::vector<double>, kNumFeatures> curves{};  // per window index, NaN when skipped
  std::optional<double> composite;
  std::optional<double> all_ten_mean;
  bool composite_partial = false;  // some of the eight inputs missing
  int sim_windows = 0;
  int ref_windows = 0;

  std::optional<double> get(Feature f) const { return jsd[static_cast<int>(f)]; }
};

/// Mean of the eight non-traffic-light metrics present. Sets `partial` when
/// some are missing; throws std::invalid_argument when all are.
double composite(const std::array<std::optional<double>, kNumCompositeFeatures> & values, bool * partial = nullptr);

/// Compare simulated traces against reference logs. For every window index k
/// the simulated values of window k across traces form one histogram, which is
/// compared with the histogram of all reference windows; per-feature JSDs are
/// averaged over window indices.
/// Maps are regenerated from each scenario's map parameters.
MetricReport evaluate(const std::vector<Scenario> & sim, const std::vector<Scenario> & reference,
                      const MetricConfig & cfg = {});

nlohmann::json to_json(const MetricReport & r);
/// Aligned plain-text table with one row per run, Table-style column order.
std::string format_table(const std::vector<std::pair<std::string, MetricReport>> & rows);
/// Per-window JSD curves as CSV (window index, then one column per feature).
std::string format_curves(const MetricReport & r);

}  // namespace twm::metrics

#endif  // TWM__METRICS_HPP_
