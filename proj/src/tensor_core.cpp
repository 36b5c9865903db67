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

#include "twm/tensor_core.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>
#include <sstream>
#include <stdexcept>

namespace twm::tensor
{
namespace
{
constexpr std::array<const char *, kNumAgentTypes> kAgentTypeNames = {
  "av", "car", "pedestrian", "cyclist"};
constexpr std::array<const char *, kNumSignalStates> kSignalNames = {
  "unknown",     "arrow_green", "arrow_red",    "arrow_yellow",   "solid_green",
  "solid_red",   "solid_yellow", "flashing_red", "flashing_yellow"};

double onehot(bool hot) { return hot ? 1.0 : -1.0; }

void require_finite(double v, const char * what, int e, int t)
{
  if (!std::isfinite(v)) {
    std::ostringstream msg;
    msg << "normalize: non-finite " << what << " at element " << e << ", step " << t;
    throw std::domain_error(msg.str());
  }
}

template <typename T>
void write_pod(std::ostream & os, T v)
{
  os.write(reinterpret_cast<const char *>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::istream & is)
{
  T v{};
  is.read(reinterpret_cast<char *>(&v), sizeof(T));
  if (!is) {
    throw std::runtime_error("multitensor: truncated stream");
  }
  return v;
}

constexpr char kMagic[4] = {'T', 'W', 'M', 'T'};
constexpr std::uint32_t kVersion = 1;
}  // namespace

std::string to_string(AgentType type) { return kAgentTypeNames.at(static_cast<int>(type)); }
std::string to_string(SignalState state) { return kSignalNames.at(static_cast<int>(state)); }

AgentType agent_type_from_string(const std::string & s)
{
  for (int i = 0; i < kNumAgentTypes; ++i) {
    if (s == kAgentTypeNames[i]) {
      return static_cast<AgentType>(i);
    }
  }
  throw std::invalid_argument("unknown agent type '" + s + "'");
}

SignalState signal_state_from_string(const std::string & s)
{
  for (int i = 0; i < kNumSignalStates; ++i) {
    if (s == kSignalNames[i]) {
      return static_cast<SignalState>(i);
    }
  }
  throw std::invalid_argument("unknown signal state '" + s + "'");
}

SceneTensor::SceneTensor(ElementKind kind, int elements, int timesteps, int channels)
: kind_(kind), elements_(elements), timesteps_(timesteps), channels_(channels)
{
  if (elements < 0 || timesteps <= 0 || channels <= 0) {
    throw std::invalid_argument("SceneTensor: invalid shape");
  }
  data_.assign(static_cast<std::size_t>(elements) * timesteps * channels, 0.0);
}

bool SceneTensor::same_shape(const SceneTensor & other) const
{
  return elements_ == other.elements_ && timesteps_ == other.timesteps_ &&
         channels_ == other.channels_;
}

bool SceneTensor::all_finite() const
{
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

bool SceneTensor::within_bound(double bound) const
{
  return std::all_of(data_.begin(), data_.end(), [bound](double v) { return std::abs(v) <= bound; });
}

MultiTensor::MultiTensor(const TensorDims & dims)
: agents(ElementKind::Agent, dims.agents, dims.timesteps, kAgentDim),
  lights(ElementKind::Light, dims.lights, dims.timesteps, kLightDim)
{
}

TensorDims MultiTensor::dims() const
{
  return TensorDims{agents.elements(), lights.elements(), agents.timesteps()};
}

bool MultiTensor::same_shape(const MultiTensor & other) const
{
  return agents.same_shape(other.agents) && lights.same_shape(other.lights);
}

void NormConfig::validate() const
{
  for (double s : {position_scale, heading_divisor, sigma_length, sigma_width, sigma_height,
                   sigma_type}) {
    if (!(s > 0.0)) {
      throw std::invalid_argument("NormConfig: scales must be positive");
    }
  }
}

RawScene::RawScene(const TensorDims & d)
: dims(d),
  agents(static_cast<std::size_t>(d.agents) * d.timesteps),
  lights(static_cast<std::size_t>(d.lights) * d.timesteps)
{
}

MultiTensor normalize(const RawScene & scene, const NormConfig & cfg)
{
  cfg.validate();
  const auto & dims = scene.dims;
  MultiTensor out(dims);
  for (int e = 0; e < dims.agents; ++e) {
    for (int t = 0; t < dims.timesteps; ++t) {
      const auto & a = scene.agent(e, t);
      auto c = out.agents.cell(e, t);
      if (!a.valid) {
        std::fill(c.begin(), c.end(), 0.0);
        c[agent_ch::kValidity] = -1.0;
        continue;
      }
      require_finite(a.x, "x", e, t);
      require_finite(a.y, "y", e, t);
      require_finite(a.z, "z", e, t);
      require_finite(a.heading, "heading", e, t);
      require_finite(a.length, "length", e, t);
      require_finite(a.width, "width", e, t);
      require_finite(a.height, "height", e, t);
      if (a.heading < -std::numbers::pi || a.heading >= std::numbers::pi) {
        std::ostringstream msg;
        msg << "normalize: heading " << a.heading << " outside [-pi, pi) at element " << e
            << ", step " << t;
        throw std::domain_error(msg.str());
      }
      c[agent_ch::kX] = a.x * cfg.position_scale;
      c[agent_ch::kY] = a.y * cfg.position_scale;
      c[agent_ch::kZ] = a.z * cfg.position_scale;
      c[agent_ch::kHeading] = a.heading / cfg.heading_divisor;
      c[agent_ch::kLength] = (a.length - cfg.mu_length) / (2.0 * cfg.sigma_length);
      c[agent_ch::kWidth] = (a.width - cfg.mu_width) / (2.0 * cfg.sigma_width);
      c[agent_ch::kHeight] = (a.height - cfg.mu_height) / (2.0 * cfg.sigma_height);
      for (int k = 0; k < kNumAgentTypes; ++k) {
        c[agent_ch::kType + k] = onehot(static_cast<int>(a.type) == k);
      }
      c[agent_ch::kValidity] = 1.0;
    }
  }
  for (int e = 0; e < dims.lights; ++e) {
    for (int t = 0; t < dims.timesteps; ++t) {
      const auto & l = scene.light(e, t);
      auto c = out.lights.cell(e, t);
      if (!l.valid) {
        std::fill(c.begin(), c.end(), 0.0);
        c[light_ch::kValidity] = -1.0;
        continue;
      }
      require_finite(l.x, "light x", e, t);
      require_finite(l.y, "light y", e, t);
      require_finite(l.z, "light z", e, t);
      c[light_ch::kX] = l.x * cfg.position_scale;
      c[light_ch::kY] = l.y * cfg.position_scale;
      c[light_ch::kZ] = l.z * cfg.position_scale;
      for (int k = 0; k < kNumSignalStates; ++k) {
        c[light_ch::kState + k] = onehot(static_cast<int>(l.state) == k);
      }
      c[light_ch::kValidity] = 1.0;
    }
  }
  return out;
}

RawScene denormalize(const MultiTensor & x, const NormConfig & cfg)
{
  cfg.validate();
  if (!x.all_finite()) {
    throw std::domain_error("denormalize: non-finite tensor");
  }
  const TensorDims dims = x.dims();
  RawScene out(dims);
  for (int e = 0; e < dims.agents; ++e) {
    for (int t = 0; t < dims.timesteps; ++t) {
      const auto c = x.agents.cell(e, t);
      auto & a = out.agent(e, t);
      a.x = c[agent_ch::kX] / cfg.position_scale;
      a.y = c[agent_ch::kY] / cfg.position_scale;
      a.z = c[agent_ch::kZ] / cfg.position_scale;
      a.heading = c[agent_ch::kHeading] * cfg.heading_divisor;
      a.length = c[agent_ch::kLength] * 2.0 * cfg.sigma_length + cfg.mu_length;
      a.width = c[agent_ch::kWidth] * 2.0 * cfg.sigma_width + cfg.mu_width;
      a.height = c[agent_ch::kHeight] * 2.0 * cfg.sigma_height + cfg.mu_height;
      const auto types = c.subspan(agent_ch::kType, kNumAgentTypes);
      a.type = static_cast<AgentType>(std::max_element(types.begin(), types.end()) - types.begin());
      a.valid = validity_prob(c[agent_ch::kValidity]) >= 0.5;
    }
  }
  for (int e = 0; e < dims.lights; ++e) {
    for (int t = 0; t < dims.timesteps; ++t) {
      const auto c = x.lights.cell(e, t);
      auto & l = out.light(e, t);
      l.x = c[light_ch::kX] / cfg.position_scale;
      l.y = c[light_ch::kY] / cfg.position_scale;
      l.z = c[light_ch::kZ] / cfg.position_scale;
      const auto states = c.subspan(light_ch::kState, kNumSignalStates);
      l.state =
        static_cast<SignalState>(std::max_element(states.begin(), states.end()) - states.begin());
      l.valid = validity_prob(c[light_ch::kValidity]) >= 0.5;
    }
  }
  return out;
}

double validity_prob(double raw) { return std::clamp(raw, -1.0, 1.0) / 2.0 + 0.5; }
double validity_logit(double prob) { return 2.0 * prob - 1.0; }

Decomposed decompose(const SceneTensor & x)
{
  Decomposed out;
  out.elements = x.elements();
  out.timesteps = x.timesteps();
  out.value_channels = x.channels() - 1;
  out.values.reserve(static_cast<std::size_t>(out.elements) * out.timesteps * out.value_channels);
  out.validity.reserve(static_cast<std::size_t>(out.elements) * out.timesteps);
  for (int e = 0; e < x.elements(); ++e) {
    for (int t = 0; t < x.timesteps(); ++t) {
      const auto c = x.cell(e, t);
      out.values.insert(out.values.end(), c.begin(), c.end() - 1);
      out.validity.push_back(validity_prob(c.back()));
    }
  }
  return out;
}

SceneTensor compose(const Decomposed & parts, ElementKind kind)
{
  SceneTensor out(kind, parts.elements, parts.timesteps, parts.value_channels + 1);
  std::size_t v = 0;
  std::size_t m = 0;
  for (int e = 0; e < parts.elements; ++e) {
    for (int t = 0; t < parts.timesteps; ++t) {
      auto c = out.cell(e, t);
      for (int d = 0; d < parts.value_channels; ++d) {
        c[d] = parts.values[v++];
      }
      c.back() = validity_logit(parts.validity[m++]);
    }
  }
  return out;
}

SceneTensor impute_invalid(const SceneTensor & x)
{
  SceneTensor out = x;
  for (int e = 0; e < out.elements(); ++e) {
    for (int t = 0; t < out.timesteps(); ++t) {
      auto c = out.cell(e, t);
      if (validity_prob(c.back()) < 0.5) {
        std::fill(c.begin(), c.end() - 1, 0.0);
      }
    }
  }
  return out;
}

MultiTensor impute_invalid(const MultiTensor & x)
{
  MultiTensor out;
  out.agents = impute_invalid(x.agents);
  out.lights = impute_invalid(x.lights);
  return out;
}

CellMask::CellMask(int e, int t, int d, bool value)
: elements(e),
  timesteps(t),
  channels(d),
  bits(static_cast<std::size_t>(e) * t * d, value ? 1 : 0)
{
}

std::size_t CellMask::count() const
{
  return static_cast<std::size_t>(std::count(bits.begin(), bits.end(), std::uint8_t{1}));
}

MultiMask empty_mask(const TensorDims & dims)
{
  return {
    CellMask(dims.agents, dims.timesteps, kAgentDim), CellMask(dims.lights, dims.timesteps, kLightDim)};
}

MultiMask full_mask(const TensorDims & dims)
{
  return {
    CellMask(dims.agents, dims.timesteps, kAgentDim, true),
    CellMask(dims.lights, dims.timesteps, kLightDim, true)};
}

MultiMask history_mask(const TensorDims & dims, int history_len)
{
  if (history_len < 0 || history_len >= dims.timesteps) {
    throw std::invalid_argument("history_len must lie in [0, T)");
  }
  MultiMask m = empty_mask(dims);
  for (CellMask * cm : {&m.agents, &m.lights}) {
    for (int e = 0; e < cm->elements; ++e) {
      for (int t = 0; t < history_len; ++t) {
        for (int d = 0; d < cm->channels; ++d) {
          cm->set(e, t, d, true);
        }
      }
    }
  }
  return m;
}

MultiMask make_task_mask(const TaskMaskParams & params, const TensorDims & dims, std::mt19937_64 & rng)
{
  if (params.history_len < 0 || params.history_len >= dims.timesteps) {
    throw std::invalid_argument("make_task_mask: history_len must lie in [0, T)");
  }
  if (params.context_fraction < 0.0 || params.context_fraction > 1.0 ||
      params.control_keep_prob < 0.0 || params.control_keep_prob > 1.0) {
    throw std::invalid_argument("make_task_mask: probabilities must lie in [0, 1]");
  }
  MultiMask m;
  if (params.kind == TaskKind::BehaviorPrediction) {
    m = history_mask(dims, params.history_len);
  } else {
    m = empty_mask(dims);
    for (CellMask * cm : {&m.agents, &m.lights}) {
      std::vector<int> order(cm->elements);
      for (int e = 0; e < cm->elements; ++e) {
        order[e] = e;
      }
      std::shuffle(order.begin(), order.end(), rng);
      const int n_context =
        static_cast<int>(std::lround(params.context_fraction * cm->elements));
      for (int i = 0; i < n_context; ++i) {
        const int e = order[i];
        for (int t = 0; t < cm->timesteps; ++t) {
          for (int d = 0; d < cm->channels; ++d) {
            cm->set(e, t, d, true);
          }
        }
      }
    }
  }
  if (params.control_keep_prob < 1.0) {
    std::bernoulli_distribution keep(params.control_keep_prob);
    for (CellMask * cm : {&m.agents, &m.lights}) {
      for (auto & b : cm->bits) {
        const bool k = keep(rng);
        b = (b != 0 && k) ? 1 : 0;
      }
    }
  }
  return m;
}

ConditioningSet make_conditioning(const MultiTensor & x, const MultiMask & mask, RoadContext context)
{
  ConditioningSet c;
  c.mask = mask;
  c.values = x;
  auto apply = [](SceneTensor & t, const CellMask & m) {
    if (static_cast<std::size_t>(m.bits.size()) != t.size()) {
      throw std::invalid_argument("make_conditioning: mask shape mismatch");
    }
    auto & d = t.data();
    for (std::size_t i = 0; i < d.size(); ++i) {
      if (m.bits[i] == 0) {
        d[i] = 0.0;
      }
    }
  };
  apply(c.values.agents, mask.agents);
  apply(c.values.lights, mask.lights);
  c.context = std::move(context);
  return c;
}

void write_multitensor(std::ostream & os, const MultiTensor & x, const NormConfig & cfg)
{
  static_assert(std::endian::native == std::endian::little, "container is little-endian");
  os.write(kMagic, 4);
  write_pod<std::uint32_t>(os, kVersion);
  const TensorDims d = x.dims();
  write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(d.agents));
  write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(d.lights));
  write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(d.timesteps));
  write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(x.agents.channels()));
  write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(x.lights.channels()));
  for (double v : {cfg.position_scale, cfg.heading_divisor, cfg.mu_length, cfg.mu_width,
                   cfg.mu_height, cfg.mu_type, cfg.sigma_length, cfg.sigma_width, cfg.sigma_height,
                   cfg.sigma_type}) {
    write_pod<double>(os, v);
  }
  os.write(
    reinterpret_cast<const char *>(x.agents.data().data()),
    static_cast<std::streamsize>(x.agents.size() * sizeof(double)));
  os.write(
    reinterpret_cast<const char *>(x.lights.data().data()),
    static_cast<std::streamsize>(x.lights.size() * sizeof(double)));
  if (!os) {
    throw std::runtime_error("multitensor: write failed");
  }
}

void read_multitensor(std::istream & is, MultiTensor & x, NormConfig & cfg)
{
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, kMagic, 4) != 0) {
    throw std::runtime_error("multitensor: bad magic");
  }
  const auto version = read_pod<std::uint32_t>(is);
  if (version != kVersion) {
    throw std::runtime_error("multitensor: unsupported version " + std::to_string(version));
  }
  TensorDims d;
  d.agents = static_cast<int>(read_pod<std::uint32_t>(is));
  d.lights = static_cast<int>(read_pod<std::uint32_t>(is));
  d.timesteps = static_cast<int>(read_pod<std::uint32_t>(is));
  const auto da = read_pod<std::uint32_t>(is);
  const auto dl = read_pod<std::uint32_t>(is);
  if (da != static_cast<std::uint32_t>(kAgentDim) || dl != static_cast<std::uint32_t>(kLightDim)) {
    throw std::runtime_error("multitensor: unexpected channel counts");
  }
  for (double * p : {&cfg.position_scale, &cfg.heading_divisor, &cfg.mu_length, &cfg.mu_width,
                     &cfg.mu_height, &cfg.mu_type, &cfg.sigma_length, &cfg.sigma_width,
                     &cfg.sigma_height, &cfg.sigma_type}) {
    *p = read_pod<double>(is);
  }
  x = MultiTensor(d);
  is.read(
    reinterpret_cast<char *>(x.agents.data().data()),
    static_cast<std::streamsize>(x.agents.size() * sizeof(double)));
  is.read(
    reinterpret_cast<char *>(x.lights.data().data()),
    static_cast<std::streamsize>(x.lights.size() * sizeof(double)));
  if (!is) {
    throw std::runtime_error("multitensor: truncated payload");
  }
}

void save_multitensor(const std::string & path, const MultiTensor & x, const NormConfig & cfg)
{
  std::ofstream os(path, std::ios::binary);
  if (!os) {
    throw std::runtime_error("cannot open '" + path + "' for writing");
  }
  write_multitensor(os, x, cfg);
}

void load_multitensor(const std::string & path, MultiTensor & x, NormConfig & cfg)
{
  std::ifstream is(path, std::ios::binary);
  if (!is) {
    throw std::runtime_error("cannot open '" + path + "'");
  }
  read_multitensor(is, x, cfg);
}

}  // namespace twm::tensor
