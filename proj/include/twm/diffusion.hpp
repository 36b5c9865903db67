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

#ifndef TWM__DIFFUSION_HPP_
#define TWM__DIFFUSION_HPP_

#include "twm/tensor_core.hpp"

#include <random>
#include <string>
#include <vector>

// Variance-preserving diffusion with the alpha-cosine schedule and
// v-prediction, plus the validity-aware pieces needed to generate sparse
// scene tensors: the supervision mask, the masked loss and the clipping
// variants applied to every intermediate prediction.

namespace twm::diffusion
{

using tensor::ConditioningSet;
using tensor::MultiTensor;
using tensor::SceneTensor;

struct AlphaSigma
{
  double alpha;
  double sigma;
};

/// alpha_t = cos(pi t / 2), sigma_t = sin(pi t / 2). Throws for t outside [0, 1].
AlphaSigma schedule(double t);

/// z_t = alpha_t x + sigma_t eps
MultiTensor forward_noise(const MultiTensor & x, double t, const MultiTensor & eps);

/// v = alpha_t eps - sigma_t x
MultiTensor v_target(const MultiTensor & x, const MultiTensor & eps, double t);

/// x_hat = alpha_t z_t - sigma_t v_hat
MultiTensor x_from_v(const MultiTensor & z_t, const MultiTensor & v_hat, double t);

struct Transition
{
  double alpha_ts;
  double sigma_ts_sq;
};

/// Marginal transition q(z_t | z_s) for 0 <= s < t <= 1.
Transition transition(double t, double s);

/// Coefficients of q(z_s | z_t, x) = N(coef_z z_t + coef_x x, variance I).
struct Posterior
{
  double coef_z;
  double coef_x;
  double variance;
};

Posterior posterior(double t, double s);

/// One ancestral step from t to s. At s = 0 the variance vanishes and no noise is drawn.
MultiTensor denoise_step(
  const MultiTensor & z_t, const MultiTensor & x_hat, double t, double s, std::mt19937_64 & rng);

/// Standard normal tensor of the given shape.
MultiTensor gaussian_like(const tensor::TensorDims & dims, std::mt19937_64 & rng);

/// Supervision weights for one tensor: valid steps weight every channel,
/// invalid steps weight only the validity channel. `valid` is E x T.
SceneTensor build_loss_weight(
  tensor::ElementKind kind, int elements, int timesteps, int channels,
  const std::vector<std::uint8_t> & valid);

/// Weights derived from the validity channel of a ground-truth multi-tensor.
MultiTensor build_loss_weight(const MultiTensor & x_gt);

/// Sum of squared weighted residuals divided by the total cell count.
double masked_loss(const MultiTensor & v_hat, const MultiTensor & v_tgt, const MultiTensor & w);

/// d masked_loss / d v_hat = 2 (v_hat - v) w^2 / N
MultiTensor masked_loss_grad(
  const MultiTensor & v_hat, const MultiTensor & v_tgt, const MultiTensor & w);

enum class ClipMode { Soft, Hard, HardValidity, None };

std::string to_string(ClipMode mode);
/// Accepts soft, hard, hard-validity, none.
ClipMode clip_mode_from_string(const std::string & s);

SceneTensor clip(const SceneTensor & x_hat, ClipMode mode);
MultiTensor clip(const MultiTensor & x_hat, ClipMode mode);

/// x_hat <- mask * x_bar + (1 - mask) * x_hat
void apply_inpainting(MultiTensor & x_hat, const ConditioningSet & cond);

/// Uniform descending grid 1 = t_0 > t_1 > ... > t_n = 0.
std::vector<double> time_grid(int n_steps);

/// Anything that predicts v from a noisy multi-tensor.
class Denoiser
{
public:
  virtual ~Denoiser() = default;
  virtual MultiTensor predict_v(const MultiTensor & z_t, double t, const ConditioningSet & cond) = 0;
};

struct SamplerConfig
{
  int n_steps = 32;
  ClipMode clip = ClipMode::Soft;
};

/// Ancestral sampler. Returns the final clean prediction; validity is left
/// as a continuous channel for the caller to threshold.
MultiTensor sample(
  Denoiser & denoiser, const ConditioningSet & cond, const SamplerConfig & cfg, std::mt19937_64 & rng);

}  // namespace twm::diffusion

#endif  // TWM__DIFFUSION_HPP_
