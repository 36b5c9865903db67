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

#include "twm/train.hpp"

#include "twm/diffusion.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

namespace twm::train
{

void TrainConfig::validate() const
{
  if (steps < 0 || batch_size < 1 || lr < 0.0 || warmup_steps < 0 || history_len < 1) {
    throw std::invalid_argument("train config: steps, batch size, lr, warmup and history must be non-negative");
  }
  if (bp_prob < 0.0 || bp_prob > 1.0 || control_keep_prob < 0.0 || control_keep_prob > 1.0) {
    throw std::invalid_argument("train config: probabilities must lie in [0, 1]");
  }
  if (ema_decay < 0.0 || ema_decay >= 1.0) {
    throw std::invalid_argument("train config: ema_decay must lie in [0, 1)");
  }
}

double learning_rate(const TrainConfig & cfg, std::int64_t step)
{
  if (cfg.warmup_steps > 0 && step < cfg.warmup_steps) {
    return cfg.lr * static_cast<double>(step + 1) / static_cast<double>(cfg.warmup_steps);
  }
  const double span = static_cast<double>(std::max<std::int64_t>(1, cfg.steps - cfg.warmup_steps));
  const double p = std::clamp(static_cast<double>(step - cfg.warmup_steps) / span, 0.0, 1.0);
  const double floor = cfg.min_lr_ratio;
  return cfg.lr * (floor + (1.0 - floor) * 0.5 * (1.0 + std::cos(std::numbers::pi * p)));
}

std::uint64_t step_seed(std::uint64_t seed, std::int64_t step)
{
  // splitmix64 over the pair
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ull * (static_cast<std::uint64_t>(step) + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

Trainer::Trainer(const nn::DenoiserConfig & model, const TrainConfig & cfg)
: cfg_((cfg.validate(), cfg)), net_(model)
{
  nn::AdamWConfig oc;
  oc.lr = cfg.lr;
  oc.weight_decay = cfg.weight_decay;
  oc.clip_norm = cfg.clip_norm;
  opt_ = nn::AdamW(net_.params(), oc);
  if (cfg.ema_decay > 0.0) {
    for (const auto & p : net_.params().params()) {
      ema_.push_back(p.value);
    }
  }
}

double Trainer::batch_loss(const std::vector<Example> & data, std::int64_t step, bool accumulate)
{
  if (data.empty()) {
    throw std::invalid_argument("training data is empty");
  }
  std::mt19937_64 rng(step_seed(cfg_.seed, step));
  std::uniform_int_distribution<std::size_t> pick(0, data.size() - 1);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const auto dims = net_.config().dims;
  double total = 0.0;
  for (int b = 0; b < cfg_.batch_size; ++b) {
    const Example & ex = data[pick(rng)];
    if (!(ex.x.dims().agents == dims.agents && ex.x.dims().lights == dims.lights &&
          ex.x.dims().timesteps == dims.timesteps)) {
      throw std::invalid_argument("training example shape does not match the model configuration");
    }
    tensor::TaskMaskParams tp;
    tp.kind = unit(rng) < cfg_.bp_prob ? tensor::TaskKind::BehaviorPrediction : tensor::TaskKind::SceneGen;
    tp.history_len = cfg_.history_len;
    tp.context_fraction = unit(rng);
    tp.control_keep_prob = cfg_.control_keep_prob;
    const tensor::MultiMask mask = tensor::make_task_mask(tp, dims, rng);
    const double t = unit(rng);
    const tensor::MultiTensor eps = diffusion::gaussian_like(dims, rng);
    const tensor::MultiTensor x = tensor::impute_invalid(ex.x);
    const tensor::ConditioningSet cond = tensor::make_conditioning(x, mask, ex.context);
    const tensor::MultiTensor z = diffusion::forward_noise(x, t, eps);
    const tensor::MultiTensor v = diffusion::v_target(x, eps, t);
    const tensor::MultiTensor w = diffusion::build_loss_weight(x);
    const tensor::MultiTensor vh = net_.forward(z, t, cond);
    const double loss = diffusion::masked_loss(vh, v, w);
    total += loss;
    if (accumulate && std::isfinite(loss)) {
      tensor::MultiTensor g = diffusion::masked_loss_grad(vh, v, w);
      const double inv = 1.0 / cfg_.batch_size;
      for (auto & c : g.agents.data()) {
        c *= inv;
      }
      for (auto & c : g.lights.data()) {
        c *= inv;
      }
      net_.backward(g);
    }
  }
  return total / cfg_.batch_size;
}

double Trainer::evaluate_step_loss(const std::vector<Example> & data, std::int64_t step)
{
  return batch_loss(data, step, false);
}

double Trainer::train_step(const std::vector<Example> & data)
{
  net_.params().zero_grad();
  double loss = 0.0;
  try {
    loss = batch_loss(data, step_, true);
  } catch (const std::runtime_error & e) {
    throw TrainingAborted(std::string("training aborted at step ") + std::to_string(step_) + ": " + e.what(), step_);
  }
  if (!std::isfinite(loss)) {
    std::ostringstream msg;
    msg << "training aborted: non-finite loss at step " << step_;
    throw TrainingAborted(msg.str(), step_);
  }
  if (initial_loss_ < 0.0) {
    initial_loss_ = loss;
  }
  if (loss > cfg_.divergence_factor * initial_loss_) {
    if (++above_count_ >= cfg_.divergence_window) {
      std::ostringstream msg;
      msg << "training aborted: loss above " << cfg_.divergence_factor << "x its initial value for "
          << above_count_ << " consecutive steps (step " << step_ << ")";
      throw TrainingAborted(msg.str(), step_);
    }
  } else {
    above_count_ = 0;
  }
  opt_.step(net_.params(), learning_rate(cfg_, step_));
  if (!ema_.empty()) {
    std::size_t k = 0;
    const float d = static_cast<float>(cfg_.ema_decay);
    for (const auto & p : net_.params().params()) {
      auto & e = ema_[k++];
      for (std::size_t i = 0; i < p.size(); ++i) {
        e[i] = d * e[i] + (1.0f - d) * p.value[i];
      }
    }
  }
  for (const auto & p : net_.params().params()) {
    for (const float v : p.value) {
      if (!std::isfinite(v)) {
        throw TrainingAborted(
          "training aborted: non-finite parameter '" + p.name + "' at step " + std::to_string(step_), step_);
      }
    }
  }
  ++step_;
  return loss;
}

std::vector<double> Trainer::run(
  const std::vector<Example> & data, const std::function<void(std::int64_t, double)> & on_step)
{
  std::vector<double> curve;
  while (step_ < cfg_.steps) {
    const std::int64_t s = step_;
    const double loss = train_step(data);
    curve.push_back(loss);
    if (on_step) {
      on_step(s, loss);
    }
  }
  return curve;
}

void Trainer::load_ema_into_net()
{
  if (ema_.empty()) {
    return;
  }
  std::size_t k = 0;
  for (auto & p : net_.params().params()) {
    p.value = ema_[k++];
  }
}

}  // namespace twm::train
