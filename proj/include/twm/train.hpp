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

#ifndef TWM__TRAIN_HPP_
#define TWM__TRAIN_HPP_

#include "twm/nn/denoiser.hpp"
#include "twm/nn/optimizer.hpp"
#include "twm/tensor_core.hpp"

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

namespace twm::train
{

/// One training window: normalized multi-tensor plus its roadgraph context.
struct Example
{
  tensor::MultiTensor x;
  tensor::RoadContext context;
};

struct TrainConfig
{
  std::int64_t steps = 1000;
  int batch_size = 4;
  double lr = 1e-3;
  double min_lr_ratio = 0.1;   // cosine decay floor relative to lr
  std::int64_t warmup_steps = 100;
  double weight_decay = 0.01;
  double clip_norm = 1.0;
  double ema_decay = 0.0;      // 0 disables the EMA copy
  double bp_prob = 0.5;        // probability of the behavior-prediction task
  int history_len = 11;
  double control_keep_prob = 1.0;
  std::uint64_t seed = 0;
  std::int64_t divergence_window = 100;
  double divergence_factor = 10.0;

  void validate() const;
  bool operator==(const TrainConfig &) const = default;
};

/// Raised when training must stop; carries the offending step.
class TrainingAborted : public std::runtime_error
{
public:
  TrainingAborted(const std::string & what, std::int64_t step)
  : std::runtime_error(what), step_(step)
  {
  }
  std::int64_t step() const { return step_; }

private:
  std::int64_t step_;
};

/// Learning rate at a step: linear warmup, then cosine decay to min_lr_ratio * lr.
double learning_rate(const TrainConfig & cfg, std::int64_t step);

/// Seed of the random stream used by one optimization step.
std::uint64_t step_seed(std::uint64_t seed, std::int64_t step);

/// Model, optimizer and EMA state. Training is resumable: the random stream of
/// step k depends only on (seed, k).
class Trainer
{
public:
  Trainer(const nn::DenoiserConfig & model, const TrainConfig & cfg);

  nn::DenoiserNet<float> & net() { return net_; }
  const TrainConfig & config() const { return cfg_; }
  nn::AdamW & optimizer() { return opt_; }
  std::vector<std::vector<float>> & ema() { return ema_; }
  std::int64_t step() const { return step_; }
  void set_step(std::int64_t s) { step_ = s; }
  double initial_loss() const { return initial_loss_; }
  void set_initial_loss(double v) { initial_loss_ = v; }
  std::int64_t above_count() const { return above_count_; }
  void set_above_count(std::int64_t v) { above_count_ = v; }

  /// Loss of one step on the given data without updating anything.
  double evaluate_step_loss(const std::vector<Example> & data, std::int64_t step);

  /// Run one optimization step and return its mean batch loss.
  /// Throws TrainingAborted on non-finite loss or sustained divergence.
  double train_step(const std::vector<Example> & data);

  /// Run until `config().steps`, calling `on_step(step, loss)` after each update.
  std::vector<double> run(
    const std::vector<Example> & data, const std::function<void(std::int64_t, double)> & on_step = {});

  /// Copy the EMA weights into the network (no-op when EMA is disabled).
  void load_ema_into_net();

private:
  double batch_loss(const std::vector<Example> & data, std::int64_t step, bool accumulate);

  TrainConfig cfg_;
  nn::DenoiserNet<float> net_;
  nn::AdamW opt_;
  std::vector<std::vector<float>> ema_;
  std::int64_t step_ = 0;
  double initial_loss_ = -1.0;
  std::int64_t above_count_ = 0;
};

}  // namespace twm::train

#endif  // TWM__TRAIN_HPP_
