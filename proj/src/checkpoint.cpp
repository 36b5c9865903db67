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

#include "twm/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <map>
#include <stdexcept>

namespace twm
{

using nlohmann::json;

namespace
{

template <typename T>
void get_if(const json & j, const char * key, T & out)
{
  if (j.contains(key)) {
    out = j.at(key).get<T>();
  }
}

constexpr char kMagic[4] = {'T', 'W', 'M', 'C'};

}  // namespace

json to_json(const tensor::TensorDims & d)
{
  return {{"agents", d.agents}, {"lights", d.lights}, {"timesteps", d.timesteps}};
}

void from_json(const json & j, tensor::TensorDims & d)
{
  get_if(j, "agents", d.agents);
  get_if(j, "lights", d.lights);
  get_if(j, "timesteps", d.timesteps);
}

json to_json(const tensor::NormConfig & c)
{
  return {
    {"position_scale", c.position_scale}, {"heading_divisor", c.heading_divisor},
    {"mu_length", c.mu_length},           {"mu_width", c.mu_width},
    {"mu_height", c.mu_height},           {"mu_type", c.mu_type},
    {"sigma_length", c.sigma_length},     {"sigma_width", c.sigma_width},
    {"sigma_height", c.sigma_height},     {"sigma_type", c.sigma_type},
  };
}

void from_json(const json & j, tensor::NormConfig & c)
{
  get_if(j, "position_scale", c.position_scale);
  get_if(j, "heading_divisor", c.heading_divisor);
  get_if(j, "mu_length", c.mu_length);
  get_if(j, "mu_width", c.mu_width);
  get_if(j, "mu_height", c.mu_height);
  get_if(j, "mu_type", c.mu_type);
  get_if(j, "sigma_length", c.sigma_length);
  get_if(j, "sigma_width", c.sigma_width);
  get_if(j, "sigma_height", c.sigma_height);
  get_if(j, "sigma_type", c.sigma_type);
  c.validate();
}

json to_json(const nn::DenoiserConfig & c)
{
  return {
    {"hidden_dim", c.hidden_dim},
    {"n_layers", c.n_layers},
    {"n_heads", c.n_heads},
    {"n_context_latents", c.n_context_latents},
    {"time_embed_dim", c.time_embed_dim},
    {"mlp_ratio", c.mlp_ratio},
    {"max_context_points", c.max_context_points},
    {"dims", to_json(c.dims)},
    {"init_seed", c.init_seed},
  };
}

void from_json(const json & j, nn::DenoiserConfig & c)
{
  get_if(j, "hidden_dim", c.hidden_dim);
  get_if(j, "n_layers", c.n_layers);
  get_if(j, "n_heads", c.n_heads);
  get_if(j, "n_context_latents", c.n_context_latents);
  get_if(j, "time_embed_dim", c.time_embed_dim);
  get_if(j, "mlp_ratio", c.mlp_ratio);
  get_if(j, "max_context_points", c.max_context_points);
  if (j.contains("dims")) {
    from_json(j.at("dims"), c.dims);
  }
  get_if(j, "init_seed", c.init_seed);
  c.validate();
}

json to_json(const train::TrainConfig & c)
{
  return {
    {"steps", c.steps},
    {"batch_size", c.batch_size},
    {"lr", c.lr},
    {"min_lr_ratio", c.min_lr_ratio},
    {"warmup_steps", c.warmup_steps},
    {"weight_decay", c.weight_decay},
    {"clip_norm", c.clip_norm},
    {"ema_decay", c.ema_decay},
    {"bp_prob", c.bp_prob},
    {"history_len", c.history_len},
    {"control_keep_prob", c.control_keep_prob},
    {"seed", c.seed},
    {"divergence_window", c.divergence_window},
    {"divergence_factor", c.divergence_factor},
  };
}

void from_json(const json & j, train::TrainConfig & c)
{
  get_if(j, "steps", c.steps);
  get_if(j, "batch_size", c.batch_size);
  get_if(j, "lr", c.lr);
  get_if(j, "min_lr_ratio", c.min_lr_ratio);
  get_if(j, "warmup_steps", c.warmup_steps);
  get_if(j, "weight_decay", c.weight_decay);
  get_if(j, "clip_norm", c.clip_norm);
  get_if(j, "ema_decay", c.ema_decay);
  get_if(j, "bp_prob", c.bp_prob);
  get_if(j, "history_len", c.history_len);
  get_if(j, "control_keep_prob", c.control_keep_prob);
  get_if(j, "seed", c.seed);
  get_if(j, "divergence_window", c.divergence_window);
  get_if(j, "divergence_factor", c.divergence_factor);
  c.validate();
}

namespace checkpoint
{

namespace
{

struct Entry
{
  std::string name;
  std::vector<std::size_t> shape;
  const std::vector<float> * data;
};

void write_file(const std::string & path, const json & header, const std::vector<Entry> & entries)
{
  json h = header;
  h["arrays"] = json::array();
  for (const auto & e : entries) {
    h["arrays"].push_back({{"name", e.name}, {"shape", e.shape}, {"count", e.data->size()}});
  }
  const std::string text = h.dump();
  std::ofstream os(path, std::ios::binary);
  if (!os) {
    throw std::runtime_error("cannot open checkpoint for writing: " + path);
  }
  os.write(kMagic, 4);
  const std::uint32_t version = kVersion;
  os.write(reinterpret_cast<const char *>(&version), 4);
  const std::uint64_t len = text.size();
  os.write(reinterpret_cast<const char *>(&len), 8);
  os.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (const auto & e : entries) {
    os.write(reinterpret_cast<const char *>(e.data->data()), static_cast<std::streamsize>(e.data->size() * 4));
  }
  if (!os) {
    throw std::runtime_error("write failed: " + path);
  }
}

struct Loaded
{
  json header;
  std::map<std::string, std::pair<std::vector<std::size_t>, std::vector<float>>> arrays;
};

json read_json_header(std::ifstream & is, const std::string & path)
{
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, kMagic, 4) != 0) {
    throw std::runtime_error("not a twm checkpoint: " + path);
  }
  std::uint32_t version = 0;
  is.read(reinterpret_cast<char *>(&version), 4);
  if (version != kVersion) {
    throw std::runtime_error("unsupported checkpoint version " + std::to_string(version) + ": " + path);
  }
  std::uint64_t len = 0;
  is.read(reinterpret_cast<char *>(&len), 8);
  if (!is || len > (1ull << 30)) {
    throw std::runtime_error("corrupt checkpoint header: " + path);
  }
  std::string text(len, '\0');
  is.read(text.data(), static_cast<std::streamsize>(len));
  if (!is) {
    throw std::runtime_error("truncated checkpoint header: " + path);
  }
  return json::parse(text);
}

Loaded read_file(const std::string & path)
{
  std::ifstream is(path, std::ios::binary);
  if (!is) {
    throw std::runtime_error("cannot open checkpoint: " + path);
  }
  Loaded out;
  out.header = read_json_header(is, path);
  for (const auto & a : out.header.at("arrays")) {
    const std::string name = a.at("name").get<std::string>();
    const auto count = a.at("count").get<std::size_t>();
    std::vector<float> data(count);
    is.read(reinterpret_cast<char *>(data.data()), static_cast<std::streamsize>(count * 4));
    if (!is) {
      throw std::runtime_error("truncated checkpoint payload at '" + name + "': " + path);
    }
    out.arrays[name] = {a.at("shape").get<std::vector<std::size_t>>(), std::move(data)};
  }
  return out;
}

Header parse_header(const json & h)
{
  Header out;
  from_json(h.at("model"), out.model);
  from_json(h.at("train"), out.train);
  from_json(h.at("norm"), out.norm);
  out.step = h.at("step").get<std::int64_t>();
  out.has_ema = h.value("has_ema", false);
  return out;
}

const std::vector<float> & lookup(
  Loaded & f, const std::string & name, const std::vector<std::size_t> & shape, const std::string & path)
{
  auto it = f.arrays.find(name);
  if (it == f.arrays.end()) {
    throw std::runtime_error("checkpoint missing array '" + name + "': " + path);
  }
  if (it->second.first != shape) {
    throw std::runtime_error("checkpoint array '" + name + "' has the wrong shape: " + path);
  }
  return it->second.second;
}

}  // namespace

void save(const std::string & path, train::Trainer & trainer, const tensor::NormConfig & norm)
{
  auto & store = trainer.net().params();
  json header = {
    {"format", "twm-checkpoint"},
    {"model", to_json(trainer.net().config())},
    {"train", to_json(trainer.config())},
    {"norm", to_json(norm)},
    {"step", trainer.step()},
    {"optimizer_steps", trainer.optimizer().steps()},
    {"initial_loss", trainer.initial_loss()},
    {"above_count", trainer.above_count()},
    {"has_ema", !trainer.ema().empty()},
  };
  std::vector<Entry> entries;
  std::size_t k = 0;
  for (const auto & p : store.params()) {
    entries.push_back({p.name, p.shape, &p.value});
  }
  for (const auto & p : store.params()) {
    entries.push_back({"adam.m/" + p.name, p.shape, &trainer.optimizer().first_moments()[k]});
    entries.push_back({"adam.v/" + p.name, p.shape, &trainer.optimizer().second_moments()[k]});
    if (!trainer.ema().empty()) {
      entries.push_back({"ema/" + p.name, p.shape, &trainer.ema()[k]});
    }
    ++k;
  }
  write_file(path, header, entries);
}

void restore(const std::string & path, train::Trainer & trainer)
{
  Loaded f = read_file(path);
  const Header h = parse_header(f.header);
  if (!(h.model == trainer.net().config())) {
    throw std::runtime_error("checkpoint model configuration differs from the requested one: " + path);
  }
  auto & store = trainer.net().params();
  std::size_t k = 0;
  for (auto & p : store.params()) {
    p.value = lookup(f, p.name, p.shape, path);
    trainer.optimizer().first_moments()[k] = lookup(f, "adam.m/" + p.name, p.shape, path);
    trainer.optimizer().second_moments()[k] = lookup(f, "adam.v/" + p.name, p.shape, path);
    if (!trainer.ema().empty()) {
      trainer.ema()[k] = h.has_ema ? lookup(f, "ema/" + p.name, p.shape, path) : p.value;
    }
    ++k;
  }
  trainer.optimizer().set_steps(f.header.at("optimizer_steps").get<std::int64_t>());
  trainer.set_step(h.step);
  trainer.set_initial_loss(f.header.value("initial_loss", -1.0));
  trainer.set_above_count(f.header.value("above_count", std::int64_t{0}));
}

Header read_header(const std::string & path)
{
  std::ifstream is(path, std::ios::binary);
  if (!is) {
    throw std::runtime_error("cannot open checkpoint: " + path);
  }
  return parse_header(read_json_header(is, path));
}

std::unique_ptr<nn::DenoiserNet<float>> load_network(const std::string & path, Header * header, bool prefer_ema)
{
  Loaded f = read_file(path);
  const Header h = parse_header(f.header);
  auto net = std::make_unique<nn::DenoiserNet<float>>(h.model);
  const bool ema = prefer_ema && h.has_ema;
  for (auto & p : net->params().params()) {
    p.value = lookup(f, (ema ? "ema/" : "") + p.name, p.shape, path);
  }
  if (header != nullptr) {
    *header = h;
  }
  return net;
}

}  // namespace checkpoint
}  // namespace twm
