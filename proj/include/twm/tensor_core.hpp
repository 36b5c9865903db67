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

#ifndef TWM__TENSOR_CORE_HPP_
#define TWM__TENSOR_CORE_HPP_

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace twm::tensor
{

inline constexpr int kAgentDim = 12;
inline constexpr int kLightDim = 13;
inline constexpr int kNumAgentTypes = 4;
inline constexpr int kNumSignalStates = 9;

/// Agent channel order. Validity is always the last channel.
namespace agent_ch
{
inline constexpr int kX = 0;
inline constexpr int kY = 1;
inline constexpr int kZ = 2;
inline constexpr int kHeading = 3;
inline constexpr int kLength = 4;
inline constexpr int kWidth = 5;
inline constexpr int kHeight = 6;
inline constexpr int kType = 7;  // 4 one-hot channels: AV, car, pedestrian, cyclist
inline constexpr int kValidity = 11;
}  // namespace agent_ch

/// Traffic-light channel order. Validity is always the last channel.
namespace light_ch
{
inline constexpr int kX = 0;
inline constexpr int kY = 1;
inline constexpr int kZ = 2;
inline constexpr int kState = 3;  // 9 one-hot channels
inline constexpr int kValidity = 12;
}  // namespace light_ch

enum class AgentType : std::uint8_t { AV = 0, Car = 1, Pedestrian = 2, Cyclist = 3 };

enum class SignalState : std::uint8_t {
  Unknown = 0,
  ArrowGreen = 1,
  ArrowRed = 2,
  ArrowYellow = 3,
  SolidGreen = 4,
  SolidRed = 5,
  SolidYellow = 6,
  FlashingRed = 7,
  FlashingYellow = 8,
};

std::string to_string(AgentType type);
std::string to_string(SignalState state);
AgentType agent_type_from_string(const std::string & s);
SignalState signal_state_from_string(const std::string & s);

enum class ElementKind : std::uint8_t { Agent, Light };

/// Scene-tensor dimensions shared by one model configuration.
struct TensorDims
{
  int agents = 32;
  int lights = 8;
  int timesteps = 91;

  bool operator==(const TensorDims &) const = default;
};

/// Dense E x T x D array in normalized units.
class SceneTensor
{
public:
  SceneTensor() = default;
  SceneTensor(ElementKind kind, int elements, int timesteps, int channels);

  ElementKind kind() const { return kind_; }
  int elements() const { return elements_; }
  int timesteps() const { return timesteps_; }
  int channels() const { return channels_; }
  int validity_channel() const { return channels_ - 1; }
  std::size_t size() const { return data_.size(); }

  double & at(int e, int t, int d) { return data_[index(e, t, d)]; }
  double at(int e, int t, int d) const { return data_[index(e, t, d)]; }
  std::size_t index(int e, int t, int d) const
  {
    return (static_cast<std::size_t>(e) * timesteps_ + t) * channels_ + d;
  }

  std::span<double> cell(int e, int t) { return {data_.data() + index(e, t, 0), static_cast<std::size_t>(channels_)}; }
  std::span<const double> cell(int e, int t) const
  {
    return {data_.data() + index(e, t, 0), static_cast<std::size_t>(channels_)};
  }

  std::vector<double> & data() { return data_; }
  const std::vector<double> & data() const { return data_; }

  bool same_shape(const SceneTensor & other) const;
  bool all_finite() const;
  /// Every channel inside [-bound, bound].
  bool within_bound(double bound = 3.0) const;

private:
  ElementKind kind_ = ElementKind::Agent;
  int elements_ = 0;
  int timesteps_ = 0;
  int channels_ = 0;
  std::vector<double> data_;
};

/// The agents and traffic-light tensors denoised jointly.
struct MultiTensor
{
  SceneTensor agents;
  SceneTensor lights;

  MultiTensor() = default;
  explicit MultiTensor(const TensorDims & dims);

  TensorDims dims() const;
  std::size_t total_cells() const { return agents.size() + lights.size(); }
  bool same_shape(const MultiTensor & other) const;
  bool all_finite() const { return agents.all_finite() && lights.all_finite(); }
};

/// Feature scaling constants. Box channels map through (f - mean) / (2 * std).
struct NormConfig
{
  double position_scale = 1.0 / 80.0;
  double heading_divisor = 3.14159265358979323846;
  double mu_length = 4.5;
  double mu_width = 2.0;
  double mu_height = 1.75;
  double mu_type = 0.5;
  double sigma_length = 2.5;
  double sigma_width = 0.8;
  double sigma_height = 0.6;
  double sigma_type = 0.5;

  /// Throws std::invalid_argument when a scale is non-positive.
  void validate() const;
  bool operator==(const NormConfig &) const = default;
};

/// Physical, ego-frame agent features at one step.
struct AgentFeatures
{
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;
  double heading = 0.0;
  double length = 0.0;
  double width = 0.0;
  double height = 0.0;
  AgentType type = AgentType::Car;
  bool valid = false;
};

/// Physical, ego-frame traffic-light features at one step.
struct LightFeatures
{
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;
  SignalState state = SignalState::Unknown;
  bool valid = false;
};

/// Un-normalized scene in the ego frame, element-major.
struct RawScene
{
  TensorDims dims;
  std::vector<AgentFeatures> agents;
  std::vector<LightFeatures> lights;

  RawScene() = default;
  explicit RawScene(const TensorDims & d);

  AgentFeatures & agent(int e, int t) { return agents[static_cast<std::size_t>(e) * dims.timesteps + t]; }
  const AgentFeatures & agent(int e, int t) const
  {
    return agents[static_cast<std::size_t>(e) * dims.timesteps + t];
  }
  LightFeatures & light(int e, int t) { return lights[static_cast<std::size_t>(e) * dims.timesteps + t]; }
  const LightFeatures & light(int e, int t) const
  {
    return lights[static_cast<std::size_t>(e) * dims.timesteps + t];
  }
};

/// Map physical features to the normalized multi-tensor. Invalid steps carry
/// zero value channels and validity -1.
/// Throws std::domain_error on non-finite input or heading outside [-pi, pi).
MultiTensor normalize(const RawScene & scene, const NormConfig & cfg);

/// Inverse of normalize. Validity is committed at M(x) >= 0.5; one-hot groups
/// decode to their arg-max.
RawScene denormalize(const MultiTensor & x, const NormConfig & cfg);

/// M(raw) = clip(raw, -1, 1) / 2 + 1/2
double validity_prob(double raw);
/// M^-1(m) = 2 m - 1
double validity_logit(double prob);

struct Decomposed
{
  int elements = 0;
  int timesteps = 0;
  int value_channels = 0;
  std::vector<double> values;    // E x T x (D - 1)
  std::vector<double> validity;  // E x T, in [0, 1]
};

Decomposed decompose(const SceneTensor & x);
/// Concatenate values with M^-1(validity).
SceneTensor compose(const Decomposed & parts, ElementKind kind);

/// Zero the value channels of every step whose validity channel decodes as invalid.
SceneTensor impute_invalid(const SceneTensor & x);
MultiTensor impute_invalid(const MultiTensor & x);

/// Per-cell boolean mask with tensor shape.
struct CellMask
{
  int elements = 0;
  int timesteps = 0;
  int channels = 0;
  std::vector<std::uint8_t> bits;

  CellMask() = default;
  CellMask(int e, int t, int d, bool value = false);
  bool at(int e, int t, int d) const { return bits[(static_cast<std::size_t>(e) * timesteps + t) * channels + d] != 0; }
  void set(int e, int t, int d, bool v)
  {
    bits[(static_cast<std::size_t>(e) * timesteps + t) * channels + d] = v ? 1 : 0;
  }
  std::size_t count() const;
};

struct MultiMask
{
  CellMask agents;
  CellMask lights;
};

enum class TaskKind : std::uint8_t { BehaviorPrediction, SceneGen };

struct TaskMaskParams
{
  TaskKind kind = TaskKind::BehaviorPrediction;
  int history_len = 11;
  double context_fraction = 0.0;
  double control_keep_prob = 1.0;
};

/// Inpainting mask for one task, AND-combined with a Bernoulli control mask.
/// Throws std::invalid_argument when history_len >= T.
MultiMask make_task_mask(const TaskMaskParams & params, const TensorDims & dims, std::mt19937_64 & rng);

/// Mask that fixes every channel of the first history_len steps (no control mask).
MultiMask history_mask(const TensorDims & dims, int history_len);
MultiMask empty_mask(const TensorDims & dims);
MultiMask full_mask(const TensorDims & dims);

/// Roadgraph context as a point set: rows of kContextFeatures values.
struct RoadContext
{
  static constexpr int kFeatures = 9;  // x, y, dir_x, dir_y, 5 one-hot kinds
  std::vector<double> features;
  std::size_t points() const { return features.size() / kFeatures; }
};

/// Inpainting mask, inpainted values (zero where the mask is false) and roadgraph context.
struct ConditioningSet
{
  MultiMask mask;
  MultiTensor values;
  RoadContext context;
};

/// Build x_bar = m_bar * x together with the mask and context.
ConditioningSet make_conditioning(const MultiTensor & x, const MultiMask & mask, RoadContext context = {});

// Binary container. Layout is documented in docs/FORMATS.md.
void write_multitensor(std::ostream & os, const MultiTensor & x, const NormConfig & cfg);
void read_multitensor(std::istream & is, MultiTensor & x, NormConfig & cfg);
void save_multitensor(const std::string & path, const MultiTensor & x, const NormConfig & cfg);
void load_multitensor(const std::string & path, MultiTensor & x, NormConfig & cfg);

}  // namespace twm::tensor

#endif  // TWM__TENSOR_CORE_HPP_
