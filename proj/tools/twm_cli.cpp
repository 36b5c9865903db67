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

#include "twm/pipeline.hpp"
#include "twm/rollout.hpp"
#include "twm/scenario.hpp"
#include "twm/train.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace
{

using nlohmann::json;
namespace fs = std::filesystem;
namespace pl = twm::pipeline;

constexpr int kUsageError = 1;
constexpr int kRuntimeError = 2;

json config_file(const std::string & path, const char * section)
{
  if (path.empty()) {
    return json::object();
  }
  json j = pl::read_json(path);
  if (j.contains(section) && j.at(section).is_object()) {
    return j.at(section);
  }
  return j;
}

struct GenDataArgs
{
  std::string out;
  std::string config;
  std::optional<int> n;
  std::optional<int> steps;
  std::optional<std::uint64_t> seed;
  std::optional<int> rows;
  std::optional<int> cols;
  std::optional<double> visibility;
};

int gen_data(const GenDataArgs & a)
{
  pl::DataConfig c;
  if (a.n) c.n_scenarios = *a.n;
  if (a.steps) c.steps = *a.steps;
  if (a.seed) c.seed = *a.seed;
  if (a.rows) c.map.rows = *a.rows;
  if (a.cols) c.map.cols = *a.cols;
  if (a.visibility) c.world.visibility_range = *a.visibility;
  c = pl::data_config_from_json(config_file(a.config, "data"), c);
  const json m = pl::gen_data(c, a.out);
  std::cout << "wrote " << m.at("count").get<int>() << " scenarios to " << a.out << "\n"
            << "archetypes " << m.at("archetypes").dump() << "\n";
  return 0;
}

struct TrainArgs
{
  std::string data;
  std::string out;
  std::string config;
  std::optional<std::int64_t> steps;
  std::optional<std::uint64_t> seed;
  std::optional<std::int64_t> stop_at;
  bool resume = false;
  bool quiet = false;
};

int train(const TrainArgs & a)
{
  pl::TrainRecipe r = pl::desk_recipe();
  if (a.steps) r.train.steps = *a.steps;
  if (a.seed) {
    r.train.seed = *a.seed;
    r.model.init_seed = *a.seed;
  }
  r = pl::train_recipe_from_json(config_file(a.config, "train_recipe"), r);
  const pl::Dataset d = pl::load_dataset(a.data);
  const auto t = pl::run_train(d, r, a.out, a.resume, a.stop_at, [&](std::int64_t step, double loss) {
    if (!a.quiet && (step % 100 == 0)) {
      std::cout << "step " << step << " loss " << loss << std::endl;
    }
  });
  std::cout << "trained steps " << t.start_step << ".." << t.end_step << ", checkpoint "
            << (fs::path(a.out) / "checkpoint.twmc").string() << "\n";
  return 0;
}

struct RolloutArgs
{
  std::string init;
  std::string checkpoint;
  std::string out;
  std::string config;
  std::optional<std::string> world;
  std::optional<std::string> planner;
  std::optional<std::string> clip;
  std::optional<int> replan;
  std::optional<int> rollout_steps;
  std::optional<int> sampler_steps;
  std::optional<std::uint64_t> seed;
};

int run_rollout(const RolloutArgs & a)
{
  pl::RolloutJob job;
  if (!a.checkpoint.empty()) {
    job.checkpoint = a.checkpoint;
  }
  if (a.world) job.world = pl::role_from_string(*a.world);
  if (a.planner) job.planner = pl::role_from_string(*a.planner);
  if (a.clip) job.sampler.clip = twm::diffusion::clip_mode_from_string(*a.clip);
  if (a.replan) job.rollout.n_replan_steps = *a.replan;
  if (a.rollout_steps) job.rollout.n_rollout_steps = *a.rollout_steps;
  if (a.sampler_steps) job.sampler.n_steps = *a.sampler_steps;
  if (a.seed) {
    job.rollout.world_seed = 2 * *a.seed + 1;
    job.rollout.planner_seed = 2 * *a.seed + 2;
  }
  job = pl::rollout_job_from_json(config_file(a.config, "rollout_job"), job);

  pl::Model model;
  if (job.needs_model()) {
    if (job.checkpoint.empty()) {
      throw std::invalid_argument("--checkpoint is required for diffusion controllers");
    }
    model = pl::load_model(job.checkpoint);
    const json cfg = config_file(a.config, "rollout_job");
    const bool pinned = cfg.contains("rollout") && cfg.at("rollout").contains("dims");
    if (!pinned) {
      job.rollout.dims = model.config.dims;
    }
  }
  const twm::Scenario init = twm::load_scenario(a.init);
  const twm::road::RoadGraph map = twm::road::generate_map(init.map);
  const auto trace = pl::run_rollout(job, job.needs_model() ? &model : nullptr, init, map);

  json config = pl::to_json(job);
  config["init"] = a.init;
  pl::write_json(fs::path(a.out) / "config.json", config);
  pl::write_trace(fs::path(a.out) / "trace.json", trace, init.map);
  std::cout << "rollout " << trace.steps.size() << " steps, " << trace.intervals.size() << " intervals -> "
            << (fs::path(a.out) / "trace.json").string() << "\n";
  return 0;
}

struct EvaluateArgs
{
  std::string traces;
  std::string reference;
  std::string out;
  std::string config;
  std::optional<int> window;
  std::optional<int> stride;
  std::optional<int> agents;
};

int evaluate(const EvaluateArgs & a)
{
  pl::EvalConfig c;
  if (a.window) c.metric.window_len = *a.window;
  if (a.stride) c.metric.stride = *a.stride;
  if (a.agents) {
    c.dims.agents = *a.agents;
    c.metric.max_agents = *a.agents;
  }
  c = pl::eval_config_from_json(config_file(a.config, "evaluate"), c);
  const auto report = pl::evaluate_dirs(a.traces, a.reference, c, a.out);
  std::cout << twm::metrics::format_table({{fs::path(a.traces).filename().string(), report}});
  return 0;
}

struct RenderArgs
{
  std::string trace;
  std::string out;
  std::vector<int> steps;
  int frames = 5;
  int agents = 32;
  int reuse_gap = 11;
};

int render(const RenderArgs & a)
{
  const twm::Scenario s = twm::load_scenario(a.trace);
  const twm::road::RoadGraph map = twm::road::generate_map(s.map);
  const std::vector<int> steps = a.steps.empty() ? pl::uniform_frames(s.steps, a.frames) : a.steps;
  for (int step : steps) {
    char name[32];
    std::snprintf(name, sizeof(name), "frame_%05d.svg", step);
    pl::write_text(fs::path(a.out) / name, pl::render_svg(s, map, step));
  }
  twm::tensor::TensorDims dims;
  dims.agents = a.agents;
  pl::write_text(fs::path(a.out) / "validity.pgm", pl::to_pgm(pl::validity_raster(s, dims, a.reuse_gap)));
  pl::write_json(fs::path(a.out) / "config.json",
                 {{"trace", a.trace}, {"steps", steps}, {"agents", a.agents}, {"reuse_gap", a.reuse_gap}});
  std::cout << "rendered " << steps.size() << " frames to " << a.out << "\n";
  return 0;
}

}  // namespace

int main(int argc, char ** argv)
{
  CLI::App app{"Diffusion traffic world model: data, training, rollout, evaluation and rendering"};
  app.require_subcommand(1);

  GenDataArgs gd;
  auto * gen = app.add_subcommand("gen-data", "Generate synthetic scenarios and a manifest");
  gen->add_option("--out", gd.out, "Output directory")->required();
  gen->add_option("--config", gd.config, "JSON config (overrides flags)");
  gen->add_option("--n", gd.n, "Number of scenarios");
  gen->add_option("--steps", gd.steps, "Recorded steps per scenario");
  gen->add_option("--seed", gd.seed, "Dataset seed");
  gen->add_option("--rows", gd.rows, "Map block rows");
  gen->add_option("--cols", gd.cols, "Map block columns");
  gen->add_option("--visibility-range", gd.visibility, "Perception range in meters");

  TrainArgs tr;
  auto * trn = app.add_subcommand("train", "Train the denoiser on a dataset");
  trn->add_option("--data", tr.data, "Dataset directory")->required();
  trn->add_option("--out", tr.out, "Output directory")->required();
  trn->add_option("--config", tr.config, "JSON training recipe (overrides flags)");
  trn->add_option("--steps", tr.steps, "Optimization steps");
  trn->add_option("--seed", tr.seed, "Initialization and data seed");
  trn->add_option("--stop-at", tr.stop_at, "Stop early at this step (schedule unchanged)");
  trn->add_flag("--resume", tr.resume, "Continue from the checkpoint in --out");
  trn->add_flag("--quiet", tr.quiet, "No per-step progress");

  RolloutArgs ro;
  auto * rol = app.add_subcommand("rollout", "Closed-loop rollout from a scenario prefix");
  rol->add_option("--init", ro.init, "Initial scenario file")->required();
  rol->add_option("--out", ro.out, "Output directory")->required();
  rol->add_option("--checkpoint", ro.checkpoint, "Model checkpoint");
  rol->add_option("--config", ro.config, "JSON rollout job (overrides flags)");
  rol->add_option("--world", ro.world, "World model")->check(CLI::IsMember({"diff", "diff-frozen", "idm"}));
  rol->add_option("--planner", ro.planner, "Planner")->check(CLI::IsMember({"diff", "diff-frozen", "idm"}));
  rol->add_option("--clip-mode", ro.clip, "Sampler clipping")
    ->check(CLI::IsMember({"soft", "hard", "hard-validity", "none"}));
  rol->add_option("--replan", ro.replan, "Steps committed per controller call");
  rol->add_option("--rollout-steps", ro.rollout_steps, "Total steps including the history");
  rol->add_option("--steps", ro.sampler_steps, "Diffusion sampling steps");
  rol->add_option("--seed", ro.seed, "Seed of the world and planner streams");

  EvaluateArgs ev;
  auto * eva = app.add_subcommand("evaluate", "Realism metrics of traces against reference logs");
  eva->add_option("--traces", ev.traces, "Directory of simulated traces")->required();
  eva->add_option("--reference", ev.reference, "Directory of reference scenarios")->required();
  eva->add_option("--out", ev.out, "Output directory")->required();
  eva->add_option("--config", ev.config, "JSON metric config (overrides flags)");
  eva->add_option("--window", ev.window, "Window length in steps");
  eva->add_option("--stride", ev.stride, "Window stride in steps");
  eva->add_option("--agents", ev.agents, "Agent slots of the perceived reference");

  RenderArgs rd;
  auto * ren = app.add_subcommand("render", "SVG frames and a validity raster of a trace");
  ren->add_option("--trace", rd.trace, "Scenario or trace file")->required();
  ren->add_option("--out", rd.out, "Output directory")->required();
  ren->add_option("--frame", rd.steps, "Explicit frame steps");
  ren->add_option("--frames", rd.frames, "Number of uniformly spaced frames")->check(CLI::PositiveNumber);
  ren->add_option("--agents", rd.agents, "Raster rows (agent slots)")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError & e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kUsageError;
  }

  try {
    if (gen->parsed()) return gen_data(gd);
    if (trn->parsed()) return train(tr);
    if (rol->parsed()) return run_rollout(ro);
    if (eva->parsed()) return evaluate(ev);
    if (ren->parsed()) return render(rd);
  } catch (const std::logic_error & e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsageError;
  } catch (const twm::rollout::RolloutError & e) {
    std::cerr << "rollout aborted at step " << e.step() << ": " << e.what() << "\n";
    return kRuntimeError;
  } catch (const twm::train::TrainingAborted & e) {
    std::cerr << "training aborted at step " << e.step() << ": " << e.what() << "\n";
    return kRuntimeError;
  } catch (const std::exception & e) {
    std::cerr << "error: " << e.what() << "\n";
    return kRuntimeError;
  }
  return kUsageError;
}
