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

#ifndef TWM__CHECKPOINT_HPP_
#define TWM__CHECKPOINT_HPP_

#include "twm/nn/denoiser.hpp"
#include "twm/tensor_core.hpp"
#include "twm/train.hpp"

#include <json.hpp>

#include <memory>
#include <string>

namespace twm
{

// JSON views of the configuration structs. Unknown keys are ignored and
// missing keys keep their defaults.
nlohmann::json to_json(const tensor::TensorDims & d);
nlohmann::json to_json(const tensor::NormConfig & c);
nlohmann::json to_json(const nn::DenoiserConfig & c);
nlohmann::json to_json(const train::TrainConfig & c);
void from_json(const nlohmann::json & j, tensor::TensorDims & d);
void from_json(const nlohmann::json & j, tensor::NormConfig & c);
void from_json(const nlohmann::json & j, nn::DenoiserConfig & c);
void from_json(const nlohmann::json & j, train::TrainConfig & c);

namespace checkpoint
{

inline constexpr std::uint32_t kVersion = 1;

/// Write the full trainer state (parameters, AdamW moments, EMA, step, configs).
void save(const std::string & path, train::Trainer & trainer, const tensor::NormConfig & norm);

/// Restore a trainer written by save(). The model configuration stored in the
/// file must equal the trainer's. Throws std::runtime_error on mismatch or corruption.
void restore(const std::string & path, train::Trainer & trainer);

struct Header
{
  nn::DenoiserConfig model;
  train::TrainConfig train;
  tensor::NormConfig norm;
  std::int64_t step = 0;
  bool has_ema = false;
};

Header read_header(const std::string & path);

/// Inference network from a checkpoint; uses EMA weights when present and `prefer_ema`.
std::unique_ptr<nn::DenoiserNet<float>> load_network(
  const std::string & path, Header * header = nullptr, bool prefer_ema = true);

}  // namespace checkpoint
}  // namespace twm

#endif  // TWM__CHECKPOINT_HPP_
