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

#include "twm/checkpoint.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <iomanip>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

namespace twm::pipeline
{

using nlohmann::json;

int thread_count()
{
  if (const char * env = std::getenv("TWM_THREADS")) {
    char * end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && v >= 1) {
      return static_cast<int>(std::min<long>(v, 256));
    }
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

void parallel_for(std::size_t n, const std::function<void(std::size_t)> & body)
{
  const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(thread_count()), n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) {
      body(i);
    }
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto work = [&]() {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= n) {
        return;
      }
      try {
        body(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!error) {
          error = std::current_exception();
        }
        next.store(n);
      }
    }
  };
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back(work);
  }
  for (auto & t : pool) {
    t.join();
  }
  if (error) {
    std::rethrow_exception(error);
  }
}

void write_text(const fs::path & path, const std::string & text)
{
  if (path.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
    if (ec) {
      throw IoError("cannot create directory " + path.parent_path().string() + ": " + ec.message());
    }
  }
  std::ofstream os(path, std::ios::binary);
  if (!os) {
    throw IoError("cannot open for writing: " + path.string());
  }
  os << text;
  if (!os) {
    throw IoError("write failed: " + path.string());
  }
}

std::string read_text(const fs::path & path)
{
  std::ifstream is(path, std::ios::binary);
  if (!is) {
    throw IoError("cannot open for reading: " + path.string());
  }
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

void write_json(const fs::path & path, const json & j) { write_text(path, j.dump(2) + "\n"); }

json read_json(const fs::path & path)
{
  try {
    return json::parse(read_text(path));
  } catch (const json::exception & e) {
    throw IoError("malformed JSON in " + path.string() + ": " + e.what());
  }
}

std::string file_checksum(const fs::path & path)
{
  const std::string bytes = read_text(path);
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

// ---------------------------------------------------------------- data

void DataConfig::validate() const
{
  map.validate();
  world.validate();
  if (n_scenarios < 0) {
    throw std::invalid_argument("n_scenarios must be >= 0");
  }
  if (steps < 1) {
    throw std::invalid_argument("steps must be >= 1");
  }
}

json to_json(const DataConfig & c)
{
  return {{"map", to_json(c.map)},
          {"world", synth::to_json(c.world)},
          {"n_scenarios", c.n_scenarios},
          {"steps", c.steps},
          {"seed", c.seed}};
}

DataConfig data_config_from_json(const json & j, DataConfig base)
{
  if (j.contains("map")) {
    json m = to_json(base.map);
    m.merge_patch(j.at("map"));
    base.map = road::map_params_from_json(m);
  }
  if (j.contains("world")) {
    json w = synth::to_json(base.world);
    w.merge_patch(j.at("world"));
    base.world = synth::world_config_from_json(w);
  }
  base.n_scenarios = j.value("n_scenarios", base.n_scenarios);
  base.steps = j.value("steps", base.steps);
  base.seed = j.value("seed", base.seed);
  return base;
}

std::uint64_t scenario_seed(std::uint64_t seed, int index)
{
  std::uint64_t z = seed * 0x9e3779b97f4a7c15ULL + static_cast<std::uint64_t>(index) + 0x632be59bd9b4e019ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

Scenario generate_scenario(const DataConfig & cfg, const road::RoadGraph & map, int index)
{
  synth::WorldScriptConfig w = cfg.world;
  w.seed = scenario_seed(cfg.seed, index);
  return synth::simulate_ground_truth(map, cfg.map, w, cfg.steps);
}

namespace
{

std::string scenario_name(int i)
{
  char buf[32];
  std::snprintf(buf, sizeof(buf), "scenario_%04d.json", i);
  return buf;
}

// Valid-run lengths and per-step valid counts of the non-ego agents.
void validity_summary(const Scenario & s, std::vector<int> & runs, std::vector<int> & counts)
{
  counts.assign(static_cast<std::size_t>(s.steps), 0);
  for (const auto & a : s.agents) {
    if (a.id == s.ego_id) {
      continue;
    }
    int run = 0;
    for (int t = a.birth; t < a.death(); ++t) {
      if (a.at(t).valid) {
        ++run;
        ++counts[static_cast<std::size_t>(t)];
      } else if (run > 0) {
        runs.push_back(run);
        run = 0;
      }
    }
    if (run > 0) {
      runs.push_back(run);
    }
  }
}

}  // namespace

json gen_data(const DataConfig & cfg, const fs::path & out)
{
  cfg.validate();
  const road::RoadGraph map = road::generate_map(cfg.map);
  write_json(out / "map.json", to_json(map));
  write_json(out / "config.json", to_json(cfg));

  std::vector<json> entries(static_cast<std::size_t>(cfg.n_scenarios));
  std::vector<synth::ArchetypeCounts> arche(entries.size());
  std::vector<std::vector<int>> runs(entries.size());
  std::vector<std::vector<int>> counts(entries.size());
  parallel_for(entries.size(), [&](std::size_t i) {
    const int idx = static_cast<int>(i);
    const Scenario s = generate_scenario(cfg, map, idx);
    const fs::path path = out / scenario_name(idx);
    save_scenario(path.string(), s);
    arche[i] = synth::count_archetypes(s);
    validity_summary(s, runs[i], counts[i]);
    entries[i] = {{"file", scenario_name(idx)},
                  {"seed", scenario_seed(cfg.seed, idx)},
                  {"agents", static_cast<int>(s.agents.size())},
                  {"checksum", file_checksum(path)}};
  });

  synth::ArchetypeCounts total;
  double run_sum = 0.0;
  std::size_t run_n = 0;
  double count_sum = 0.0;
  std::size_t count_n = 0;
  int count_max = 0;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    total.spawn += arche[i].spawn;
    total.occlusion += arche[i].occlusion;
    total.disocclusion += arche[i].disocclusion;
    total.removal += arche[i].removal;
    for (int r : runs[i]) {
      run_sum += r;
      ++run_n;
    }
    for (int c : counts[i]) {
      count_sum += c;
      ++count_n;
      count_max = std::max(count_max, c);
    }
  }
  json manifest = {
    {"count", cfg.n_scenarios},
    {"config", to_json(cfg)},
    {"map_checksum", file_checksum(out / "map.json")},
    {"scenarios", entries},
    {"archetypes",
     {{"spawn", total.spawn},
      {"occlusion", total.occlusion},
      {"disocclusion", total.disocclusion},
      {"removal", total.removal}}},
    {"validity",
     {{"runs", run_n},
      {"mean_run_steps", run_n ? run_sum / static_cast<double>(run_n) : 0.0},
      {"mean_valid_agents", count_n ? count_sum / static_cast<double>(count_n) : 0.0},
      {"max_valid_agents", count_max}}},
  };
  write_json(out / "manifest.json", manifest);
  return manifest;
}

Dataset load_dataset(const fs::path & dir)
{
  Dataset d;
  d.manifest = read_json(dir / "manifest.json");
  d.config = data_config_from_json(d.manifest.at("config"));
  d.map = road::road_graph_from_json(read_json(dir / "map.json"));
  const auto & entries = d.manifest.at("scenarios");
  d.scenarios.resize(entries.size());
  parallel_for(entries.size(), [&](std::size_t i) {
    const fs::path p = dir / entries[i].at("file").get<std::string>();
    if (!fs::exists(p)) {
      throw IoError("missing scenario file: " + p.string());
    }
    d.scenarios[i] = load_scenario(p.string());
  });
  return d;
}

// ---------------------------------------------------------------- training

void TrainRecipe::validate() const
{
  model.validate();
  train.validate();
  if (!(model.dims == export_cfg.dims)) {
    throw std::invalid_argument("model dims differ from export dims");
  }
  if (train.history_len != export_cfg.history_len) {
    throw std::invalid_argument("training and export history lengths differ");
  }
  if (model.max_context_points < export_cfg.max_context_points) {
    throw std::invalid_argument("export keeps more context points than the model accepts");
  }
  if (checkpoint_every < 1) {
    throw std::invalid_argument("checkpoint_every must be >= 1");
  }
}

json to_json(const TrainRecipe & r)
{
  const auto & e = r.export_cfg;
  return {{"model", twm::to_json(r.model)},
          {"train", twm::to_json(r.train)},
          {"export",
           {{"dims", twm::to_json(e.dims)},
            {"window_len", e.window_len},
            {"stride", e.stride},
            {"history_len", e.history_len},
            {"context_radius", e.context_radius},
            {"max_context_points", e.max_context_points},
            {"norm", twm::to_json(e.norm)}}},
          {"checkpoint_every", r.checkpoint_every}};
}

TrainRecipe train_recipe_from_json(const json & j, TrainRecipe base)
{
  if (j.contains("model")) {
    json m = twm::to_json(base.model);
    m.merge_patch(j.at("model"));
    from_json(m, base.model);
  }
  if (j.contains("train")) {
    json t = twm::to_json(base.train);
    t.merge_patch(j.at("train"));
    from_json(t, base.train);
  }
  if (j.contains("export")) {
    const json & e = j.at("export");
    auto & x = base.export_cfg;
    if (e.contains("dims")) {
      from_json(e.at("dims"), x.dims);
    }
    if (e.contains("norm")) {
      from_json(e.at("norm"), x.norm);
    }
    x.window_len = e.value("window_len", x.window_len);
    x.stride = e.value("stride", x.stride);
    x.history_len = e.value("history_len", x.history_len);
    x.context_radius = e.value("context_radius", x.context_radius);
    x.max_context_points = e.value("max_context_points", x.max_context_points);
  }
  base.checkpoint_every = j.value("checkpoint_every", base.checkpoint_every);
  return base;
}

TrainRecipe desk_recipe()
{
  TrainRecipe r;
  tensor::TensorDims dims{16, 4, 91};
  r.model.hidden_dim = 32;
  r.model.n_layers = 2;
  r.model.n_heads = 2;
  r.model.n_context_latents = 8;
  r.model.time_embed_dim = 16;
  r.model.mlp_ratio = 2;
  r.model.max_context_points = 64;
  r.model.dims = dims;
  r.train.steps = 3000;
  r.train.batch_size = 4;
  r.train.lr = 2e-3;
  r.train.warmup_steps = 100;
  r.export_cfg.dims = dims;
  r.export_cfg.max_context_points = 64;
  r.export_cfg.stride = 30;
  return r;
}

TrainOutcome run_train(const Dataset & data, const TrainRecipe & recipe, const fs::path & out, bool resume,
                       std::optional<std::int64_t> stop_at,
                       const std::function<void(std::int64_t, double)> & progress)
{
  recipe.validate();
  const std::vector<train::Example> examples = synth::make_examples(data.scenarios, data.map, recipe.export_cfg);
  if (examples.empty() && recipe.train.steps > 0) {
    throw std::invalid_argument("dataset yields no training windows");
  }

  const fs::path ckpt = out / "checkpoint.twmc";
  const fs::path loss_path = out / "loss.csv";
  train::Trainer trainer(recipe.model, recipe.train);
  TrainOutcome outcome;
  std::string loss_log;
  if (resume && fs::exists(ckpt)) {
    const checkpoint::Header h = checkpoint::read_header(ckpt.string());
    if (!(h.train == recipe.train)) {
      throw std::invalid_argument("checkpoint training configuration differs from the requested one: " +
                                  ckpt.string());
    }
    checkpoint::restore(ckpt.string(), trainer);
    outcome.start_step = trainer.step();
    if (fs::exists(loss_path)) {
      // keep the lines of steps already in the checkpoint
      std::istringstream is(read_text(loss_path));
      std::string line;
      while (std::getline(is, line)) {
        const auto comma = line.find(',');
        if (line.rfind("step", 0) == 0 ||
            (comma != std::string::npos && std::stoll(line.substr(0, comma)) < outcome.start_step)) {
          loss_log += line + "\n";
        }
      }
    }
  }
  if (loss_log.empty()) {
    loss_log = "step,loss,lr\n";
  }
  json config = to_json(recipe);
  config["dataset"] = {{"config", data.manifest.at("config")}, {"count", data.scenarios.size()}};
  write_json(out / "config.json", config);

  const std::int64_t end = std::min(recipe.train.steps, stop_at.value_or(recipe.train.steps));
  std::ostringstream log(loss_log, std::ios::ate);
  log << std::setprecision(9);
  while (trainer.step() < end) {
    const std::int64_t step = trainer.step();
    const double loss = trainer.train_step(examples);
    log << step << ',' << loss << ',' << train::learning_rate(recipe.train, step) << '\n';
    outcome.last_loss = loss;
    if (progress) {
      progress(step, loss);
    }
    if (trainer.step() % recipe.checkpoint_every == 0 && trainer.step() < end) {
      checkpoint::save(ckpt.string(), trainer, recipe.export_cfg.norm);
      write_text(loss_path, log.str());
    }
  }
  checkpoint::save(ckpt.string(), trainer, recipe.export_cfg.norm);
  write_text(loss_path, log.str());
  outcome.end_step = trainer.step();
  return outcome;
}

// ---------------------------------------------------------------- rollout

Role role_from_string(const std::string & s)
{
  if (s == "diff") {
    return Role::Diffusion;
  }
  if (s == "diff-frozen") {
    return Role::DiffusionFrozen;
  }
  if (s == "idm") {
    return Role::Idm;
  }
  throw std::invalid_argument("unknown controller '" + s + "' (expected diff, diff-frozen or idm)");
}

std::string to_string(Role r)
{
  switch (r) {
    case Role::Diffusion:
      return "diff";
    case Role::DiffusionFrozen:
      return "diff-frozen";
    case Role::Idm:
      return "idm";
  }
  return "idm";
}

json to_json(const RolloutJob & j)
{
  const auto & p = j.idm.params;
  return {{"world", to_string(j.world)},
          {"planner", to_string(j.planner)},
          {"checkpoint", j.checkpoint},
          {"sampler", {{"n_steps", j.sampler.n_steps}, {"clip", diffusion::to_string(j.sampler.clip)}}},
          {"rollout", rollout::to_json(j.rollout)},
          {"idm",
           {{"v0", p.v0},
            {"T", p.T},
            {"a_max", p.a_max},
            {"b", p.b},
            {"s0", p.s0},
            {"delta", p.delta},
            {"cyclist_v0", j.idm.cyclist_v0},
            {"max_projection_dist", j.idm.max_projection_dist},
            {"route_lanes", j.idm.route_lanes}}},
          {"context_radius", j.context_radius}};
}

RolloutJob rollout_job_from_json(const json & j, RolloutJob base)
{
  if (j.contains("world")) {
    base.world = role_from_string(j.at("world").get<std::string>());
  }
  if (j.contains("planner")) {
    base.planner = role_from_string(j.at("planner").get<std::string>());
  }
  base.checkpoint = j.value("checkpoint", base.checkpoint);
  if (j.contains("sampler")) {
    const json & s = j.at("sampler");
    base.sampler.n_steps = s.value("n_steps", base.sampler.n_steps);
    if (s.contains("clip")) {
      base.sampler.clip = diffusion::clip_mode_from_string(s.at("clip").get<std::string>());
    }
  }
  if (j.contains("rollout")) {
    json r = rollout::to_json(base.rollout);
    r.merge_patch(j.at("rollout"));
    base.rollout = rollout::rollout_config_from_json(r);
  }
  if (j.contains("idm")) {
    const json & m = j.at("idm");
    auto & p = base.idm.params;
    p.v0 = m.value("v0", p.v0);
    p.T = m.value("T", p.T);
    p.a_max = m.value("a_max", p.a_max);
    p.b = m.value("b", p.b);
    p.s0 = m.value("s0", p.s0);
    p.delta = m.value("delta", p.delta);
    base.idm.cyclist_v0 = m.value("cyclist_v0", base.idm.cyclist_v0);
    base.idm.max_projection_dist = m.value("max_projection_dist", base.idm.max_projection_dist);
    base.idm.route_lanes = m.value("route_lanes", base.idm.route_lanes);
  }
  base.context_radius = j.value("context_radius", base.context_radius);
  return base;
}

Model load_model(const std::string & path)
{
  Model m;
  checkpoint::Header h;
  m.net = checkpoint::load_network(path, &h);
  m.config = h.model;
  m.norm = h.norm;
  return m;
}

namespace
{

struct RoleControllers
{
  std::unique_ptr<rollout::Controller> base;
  std::unique_ptr<rollout::Controller> wrapped;
  rollout::Controller & get() { return wrapped ? *wrapped : *base; }
};

RoleControllers make_role(Role role, const RolloutJob & job, Model * model, bool world)
{
  RoleControllers rc;
  if (role == Role::Idm) {
    rc.base = std::make_unique<rollout::IdmController>(job.idm, "idm");
    return rc;
  }
  if (model == nullptr || !model->net) {
    throw std::invalid_argument("a diffusion controller needs a checkpoint");
  }
  if (!(model->config.dims == job.rollout.dims)) {
    throw std::invalid_argument("checkpoint dims differ from the rollout dims");
  }
  rollout::FrameSettings fs;
  fs.dims = job.rollout.dims;
  fs.norm = model->norm;
  fs.history_len = job.rollout.history_len;
  fs.context_radius = job.context_radius;
  fs.max_context_points = model->config.max_context_points;
  rc.base = std::make_unique<rollout::DiffusionController>(*model->net, fs, job.sampler, "diffusion");
  if (role == Role::DiffusionFrozen) {
    rc.wrapped = std::make_unique<rollout::FrozenValidity>(*rc.base, world);
  }
  return rc;
}

}  // namespace

rollout::RolloutTrace run_rollout(const RolloutJob & job, Model * model, const Scenario & init,
                                  const road::RoadGraph & map)
{
  job.rollout.validate();
  RoleControllers world = make_role(job.world, job, model, true);
  RoleControllers planner = make_role(job.planner, job, model, false);
  return rollout::rollout(world.get(), planner.get(), init, map, job.rollout);
}

void write_trace(const fs::path & path, const rollout::RolloutTrace & trace, const road::MapParams & map_params)
{
  write_json(path, to_json(rollout::to_scenario(trace, map_params)));
  fs::path sidecar = path;
  sidecar.replace_extension(".timing.json");
  write_json(sidecar, rollout::timing_json(trace));
}

// ---------------------------------------------------------------- evaluate

json to_json(const EvalConfig & c)
{
  return {{"window_len", c.metric.window_len},
          {"stride", c.metric.stride},
          {"max_agents", c.metric.max_agents},
          {"eps", c.metric.eps},
          {"dims", twm::to_json(c.dims)},
          {"reuse_gap", c.reuse_gap}};
}

EvalConfig eval_config_from_json(const json & j, EvalConfig base)
{
  base.metric.window_len = j.value("window_len", base.metric.window_len);
  base.metric.stride = j.value("stride", base.metric.stride);
  base.metric.max_agents = j.value("max_agents", base.metric.max_agents);
  base.metric.eps = j.value("eps", base.metric.eps);
  if (j.contains("dims")) {
    from_json(j.at("dims"), base.dims);
  }
  base.reuse_gap = j.value("reuse_gap", base.reuse_gap);
  return base;
}

std::vector<fs::path> scenario_files(const fs::path & dir)
{
  if (!fs::is_directory(dir)) {
    throw IoError("not a directory: " + dir.string());
  }
  std::vector<fs::path> files;
  for (const auto & e : fs::directory_iterator(dir)) {
    const fs::path & p = e.path();
    const std::string name = p.filename().string();
    if (!e.is_regular_file() || p.extension() != ".json") {
      continue;
    }
    if (name.ends_with(".timing.json") || name == "config.json" || name == "manifest.json" ||
        name == "map.json" || name == "report.json") {
      continue;
    }
    files.push_back(p);
  }
  std::sort(files.begin(), files.end());
  return files;
}

Scenario reference_view(const Scenario & s, const EvalConfig & cfg)
{
  if (!s.provenance.is_null()) {
    return s;
  }
  return synth::perceived(s, cfg.dims, cfg.reuse_gap);
}

metrics::MetricReport evaluate_dirs(const fs::path & traces, const fs::path & reference, const EvalConfig & cfg,
                                    const fs::path & out)
{
  const auto sim_files = scenario_files(traces);
  const auto ref_files = scenario_files(reference);
  if (sim_files.empty()) {
    throw IoError("no traces in " + traces.string());
  }
  if (ref_files.empty()) {
    throw IoError("no reference scenarios in " + reference.string());
  }
  std::vector<Scenario> sim(sim_files.size());
  std::vector<Scenario> ref(ref_files.size());
  auto load = [](const fs::path & p) {
    try {
      return load_scenario(p.string());
    } catch (const IoError &) {
      throw;
    } catch (const std::exception & e) {
      throw std::invalid_argument("schema mismatch in " + p.string() + ": " + e.what());
    }
  };
  parallel_for(sim.size(), [&](std::size_t i) { sim[i] = load(sim_files[i]); });
  parallel_for(ref.size(), [&](std::size_t i) { ref[i] = reference_view(load(ref_files[i]), cfg); });

  const metrics::MetricReport report = metrics::evaluate(sim, ref, cfg.metric);
  json rj = metrics::to_json(report);
  write_json(out / "report.json", rj);
  write_text(out / "table.txt", metrics::format_table({{traces.filename().string(), report}}));
  write_text(out / "curves.csv", metrics::format_curves(report));
  json config = to_json(cfg);
  config["traces"] = traces.string();
  config["reference"] = reference.string();
  write_json(out / "config.json", config);
  return report;
}

// ---------------------------------------------------------------- render

std::vector<int> uniform_frames(int length, int n)
{
  if (length < 1 || n < 1) {
    throw std::invalid_argument("uniform_frames: length and n must be >= 1");
  }
  std::vector<int> frames;
  if (n == 1) {
    return {0};
  }
  for (int i = 0; i < n; ++i) {
    const long f = static_cast<long>(i) * length / (n - 1);
    frames.push_back(static_cast<int>(std::min<long>(f, length - 1)));
  }
  return frames;
}

namespace
{

const char * agent_color(tensor::AgentType type)
{
  switch (type) {
    case tensor::AgentType::AV:
      return "#d62728";
    case tensor::AgentType::Car:
      return "#1f77b4";
    case tensor::AgentType::Pedestrian:
      return "#2ca02c";
    case tensor::AgentType::Cyclist:
      return "#9467bd";
  }
  return "#7f7f7f";
}

const char * signal_color(tensor::SignalState s)
{
  switch (s) {
    case tensor::SignalState::ArrowGreen:
    case tensor::SignalState::SolidGreen:
      return "#00c000";
    case tensor::SignalState::ArrowYellow:
    case tensor::SignalState::SolidYellow:
    case tensor::SignalState::FlashingYellow:
      return "#f0c000";
    case tensor::SignalState::ArrowRed:
    case tensor::SignalState::SolidRed:
    case tensor::SignalState::FlashingRed:
      return "#e00000";
    case tensor::SignalState::Unknown:
      break;
  }
  return "#808080";
}

std::string polygon_points(const std::vector<geom::Vec2> & pts, double ymax)
{
  std::ostringstream os;
  os << std::fixed << std::setprecision(2);
  for (std::size_t i = 0; i < pts.size(); ++i) {
    os << (i ? " " : "") << pts[i].x << ',' << (ymax - pts[i].y);
  }
  return os.str();
}

}  // namespace

std::string render_svg(const Scenario & s, const road::RoadGraph & map, int step)
{
  if (step < 0 || step >= s.steps) {
    throw std::out_of_range("render: step " + std::to_string(step) + " outside [0, " +
                            std::to_string(s.steps) + ")");
  }
  const double pad = 5.0;
  const double x0 = map.extent_min.x - pad;
  const double y0 = map.extent_min.y - pad;
  const double w = map.extent_max.x - map.extent_min.x + 2 * pad;
  const double h = map.extent_max.y - map.extent_min.y + 2 * pad;
  const double ymax = map.extent_max.y + map.extent_min.y;  // flips y about the extent center

  std::ostringstream os;
  os << std::fixed << std::setprecision(2);
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"" << x0 << ' ' << y0 << ' ' << w << ' ' << h
     << "\" width=\"" << static_cast<int>(w * 4) << "\" height=\"" << static_cast<int>(h * 4) << "\">\n";
  os << "<rect x=\"" << x0 << "\" y=\"" << y0 << "\" width=\"" << w << "\" height=\"" << h
     << "\" fill=\"#ffffff\"/>\n";
  for (const auto & p : map.drivable) {
    os << "<polygon points=\"" << polygon_points(p.points, ymax) << "\" fill=\"#d9d9d9\"/>\n";
  }
  for (const auto & p : map.parking_lots) {
    os << "<polygon points=\"" << polygon_points(p.points, ymax) << "\" fill=\"#ececff\"/>\n";
  }
  for (const auto & p : map.sidewalks) {
    os << "<polygon points=\"" << polygon_points(p.points, ymax) << "\" fill=\"#f2efe6\"/>\n";
  }
  for (const auto & lane : map.lanes) {
    os << "<polyline points=\"" << polygon_points(lane.points, ymax)
       << "\" fill=\"none\" stroke=\"#a0a0a0\" stroke-width=\"0.2\"/>\n";
  }
  for (const auto & sl : map.stop_lines) {
    os << "<line x1=\"" << sl.a.x << "\" y1=\"" << ymax - sl.a.y << "\" x2=\"" << sl.b.x << "\" y2=\""
       << ymax - sl.b.y << "\" stroke=\"#404040\" stroke-width=\"0.3\"/>\n";
  }
  for (const auto & l : s.lights) {
    if (!l.alive_at(step) || !l.at(step).valid) {
      continue;
    }
    const auto & ls = l.at(step);
    os << "<circle class=\"signal\" cx=\"" << ls.x << "\" cy=\"" << ymax - ls.y << "\" r=\"1.2\" fill=\"" << signal_color(ls.state)
       << "\" stroke=\"#000000\" stroke-width=\"0.2\"/>\n";
  }
  for (const auto & a : s.agents) {
    if (!a.alive_at(step) || !a.at(step).valid) {
      continue;
    }
    const auto & st = a.at(step);
    const double deg = -st.heading * 180.0 / 3.14159265358979323846;
    const bool ego = a.id == s.ego_id;
    os << "<rect class=\"agent\" x=\"" << -a.length / 2 << "\" y=\"" << -a.width / 2 << "\" width=\"" << a.length
       << "\" height=\"" << a.width << "\" transform=\"translate(" << st.x << ',' << ymax - st.y << ") rotate("
       << deg << ")\" fill=\"" << agent_color(a.type) << "\" stroke=\"" << (ego ? "#000000" : "none")
       << "\" stroke-width=\"" << (ego ? 0.5 : 0.0) << "\"/>\n";
  }
  os << "</svg>\n";
  return os.str();
}

std::vector<std::vector<bool>> validity_raster(const Scenario & s, const tensor::TensorDims & dims, int reuse_gap)
{
  const synth::SlotTables st = synth::scenario_slots(s, 0, s.steps, dims, reuse_gap);
  std::vector<std::vector<bool>> r(static_cast<std::size_t>(dims.agents),
                                   std::vector<bool>(static_cast<std::size_t>(s.steps), false));
  for (int t = 0; t < s.steps; ++t) {
    r[0][static_cast<std::size_t>(t)] = true;
    const auto & row = st.agents[static_cast<std::size_t>(t)];
    for (std::size_t k = 0; k < row.size(); ++k) {
      if (row[k] >= 0) {
        r[k + 1][static_cast<std::size_t>(t)] = true;
      }
    }
  }
  return r;
}

std::string to_pgm(const std::vector<std::vector<bool>> & raster)
{
  const std::size_t rows = raster.size();
  const std::size_t cols = rows ? raster[0].size() : 0;
  std::string out = "P5\n" + std::to_string(cols) + " " + std::to_string(rows) + "\n255\n";
  for (const auto & row : raster) {
    for (bool v : row) {
      out.push_back(v ? static_cast<char>(255) : static_cast<char>(0));
    }
  }
  return out;
}

}  // namespace twm::pipeline
