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

#ifndef TWM__PIPELINE_HPP_
#define TWM__PIPELINE_HPP_

#include "twm/diffusion.hpp"
#include "twm/metrics.hpp"
#include "twm/nn/denoiser.hpp"
#include "twm/road_graph.hpp"
#include "twm/rollout.hpp"
#include "twm/scenario.hpp"
#include "twm/synth_world.hpp"
#include "twm/train.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace twm::pipeline
{

namespace fs = std::filesystem;

/// Worker count from TWM_THREADS (default: hardware concurrency, at least 1).
int thread_count();

/// Run body(i) for i in [0, n) on thread_count() workers. The first exception
/// thrown by any call is rethrown after all workers finish.
void parallel_for(std::size_t n, const std::function<void(std::size_t)> & body);

/// Raised for IO failures; the message names the path.
class IoError : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

void write_text(const fs::path & path, const std::string & text);
std::string read_text(const fs::path & path);
void write_json(const fs::path & path, const nlohmann::json & j);
nlohmann::json read_json(const fs::path & path);
/// FNV-1a 64 of a file's bytes, as 16 hex digits.
std::string file_checksum(const fs::path & path);

// ---------------------------------------------------------------- data

struct DataConfig
{
  road::MapParams map;
  synth::WorldScriptConfig world;
  int n_scenarios = 100;
  int steps = 182;
  std::uint64_t seed = 0;

  void validate() const;
};
nlohmann::json to_json(const DataConfig & c);
DataConfig data_config_from_json(const nlohmann::json & j, DataConfig base = {});

/// World seed of scenario `index`.
std::uint64_t scenario_seed(std::uint64_t seed, int index);
Scenario generate_scenario(const DataConfig & cfg, const road::RoadGraph & map, int index);

/// Writes scenario_NNNN.json, map.json, config.json and manifest.json into
/// `out` and returns the manifest.
nlohmann::json gen_data(const DataConfig & cfg, const fs::path & out);

struct Dataset
{
  DataConfig config;
  road::RoadGraph map;
  std::vector<Scenario> scenarios;
  nlohmann::json manifest;
};
Dataset load_dataset(const fs::path & dir);

// ---------------------------------------------------------------- training

struct TrainRecipe
{
  nn::DenoiserConfig model;
  train::TrainConfig train;
  synth::ExportConfig export_cfg;
  std::int64_t checkpoint_every = 500;

  /// Model and export dims agree, history lengths agree.
  void validate() const;
};
nlohmann::json to_json(const TrainRecipe & r);
TrainRecipe train_recipe_from_json(const nlohmann::json & j, TrainRecipe base = {});

/// Small model that trains on one core in minutes.
TrainRecipe desk_recipe();

struct TrainOutcome
{
  std::int64_t start_step = 0;
  std::int64_t end_step = 0;
  double last_loss = 0.0;
};

/// Train on a dataset, writing config.json, loss.csv and checkpoint.twmc into
/// `out`. With `resume`, an existing checkpoint in `out` is restored first and
/// its configuration must match. `stop_at` ends the run early (the schedule
/// still follows recipe.train.steps).
TrainOutcome run_train(const Dataset & data, const TrainRecipe & recipe, const fs::path & out, bool resume,
                       std::optional<std::int64_t> stop_at = std::nullopt,
                       const std::function<void(std::int64_t, double)> & progress = {});

// ---------------------------------------------------------------- rollout

enum class Role { Diffusion, DiffusionFrozen, Idm };
Role role_from_string(const std::string & s);
std::string to_string(Role r);

struct RolloutJob
{
  Role world = Role::Diffusion;
  Role planner = Role::Idm;
  std::string checkpoint;
  diffusion::SamplerConfig sampler{16, diffusion::ClipMode::Soft};
  rollout::RolloutConfig rollout;
  rollout::IdmSettings idm;
  double context_radius = 80.0;

  bool needs_model() const { return world != Role::Idm || planner != Role::Idm; }
};
nlohmann::json to_json(const RolloutJob & j);
RolloutJob rollout_job_from_json(const nlohmann::json & j, RolloutJob base = {});

/// Loaded network shared by the diffusion roles of several rollouts.
struct Model
{
  std::unique_ptr<nn::DenoiserNet<float>> net;
  nn::DenoiserConfig config;
  tensor::NormConfig norm;
};
Model load_model(const std::string & checkpoint);

/// Build the controllers of a job and run it. Throws std::invalid_argument when
/// the model dims differ from the rollout dims.
rollout::RolloutTrace run_rollout(const RolloutJob & job, Model * model, const Scenario & init,
                                  const road::RoadGraph & map);

/// Write the trace as a scenario file plus a `.timing.json` sidecar.
void write_trace(const fs::path & path, const rollout::RolloutTrace & trace, const road::MapParams & map_params);

// ---------------------------------------------------------------- evaluate

struct EvalConfig
{
  metrics::MetricConfig metric;
  tensor::TensorDims dims;
  int reuse_gap = 11;
};
nlohmann::json to_json(const EvalConfig & c);
EvalConfig eval_config_from_json(const nlohmann::json & j, EvalConfig base = {});

/// Scenario files of a directory in name order (sidecars, configs and
/// manifests skipped).
std::vector<fs::path> scenario_files(const fs::path & dir);

/// Ground-truth logs are reduced to their perceived view; rollouts are used as is.
Scenario reference_view(const Scenario & s, const EvalConfig & cfg);

metrics::MetricReport evaluate_dirs(const fs::path & traces, const fs::path & reference, const EvalConfig & cfg,
                                    const fs::path & out);

// ---------------------------------------------------------------- render

/// `n` steps spread uniformly over [0, length - 1], both ends included.
std::vector<int> uniform_frames(int length, int n);

/// SVG of one step: map, agent boxes by type, signal glyphs by state, ego
/// highlighted. Throws std::out_of_range for a step outside the scenario.
std::string render_svg(const Scenario & s, const road::RoadGraph & map, int step);

/// slots x steps occupancy image (row 0 is the ego) under slot assignment.
std::vector<std::vector<bool>> validity_raster(const Scenario & s, const tensor::TensorDims & dims, int reuse_gap);
/// Binary PGM (P5): valid cells white.
std::string to_pgm(const std::vector<std::vector<bool>> & raster);

}  // namespace twm::pipeline

#endif  // TWM__PIPELINE_HPP_
