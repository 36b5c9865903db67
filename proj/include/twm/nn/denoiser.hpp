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

#ifndef TWM__NN__DENOISER_HPP_
#define TWM__NN__DENOISER_HPP_

#include "twm/diffusion.hpp"
#include "twm/nn/layers.hpp"
#include "twm/nn/params.hpp"
#include "twm/tensor_core.hpp"

#include <cstdint>
#include <memory>
#include <vector>

namespace twm::nn
{

struct DenoiserConfig
{
  int hidden_dim = 128;
  int n_layers = 4;
  int n_heads = 4;
  int n_context_latents = 32;
  int time_embed_dim = 32;  // width of the sinusoidal diffusion-time features
  int mlp_ratio = 4;
  int max_context_points = 256;
  tensor::TensorDims dims{};
  std::uint64_t init_seed = 0;

  /// Throws std::invalid_argument on inconsistent settings.
  void validate() const;
  int agent_input_dim() const { return 3 * tensor::kAgentDim; }
  int light_input_dim() const { return 3 * tensor::kLightDim; }
  bool operator==(const DenoiserConfig &) const = default;
};

/// Latent-query encoder over the roadgraph point set.
template <typename T>
class ContextEncoder
{
public:
  ContextEncoder(ParamStore<T> & store, const DenoiserConfig & cfg, std::mt19937_64 & rng);

  /// Returns n_context_latents x hidden_dim. An empty point set yields all-zero
  /// latents and sets `empty`.
  std::vector<T> forward(const tensor::RoadContext & context, bool & empty);
  void backward(const T * dlatents);

private:
  std::size_t hidden_;
  std::size_t n_latents_;
  std::size_t max_points_;
  Linear<T> point_fc1_;
  Gelu<T> point_act_;
  Linear<T> point_fc2_;
  LayerNorm<T> point_ln_;
  Param<T> * queries_;
  LayerNorm<T> query_ln_;
  Attention<T> cross_;
  LayerNorm<T> mlp_ln_;
  Mlp<T> mlp_;
  // cache
  bool empty_ = true;
  std::size_t n_points_ = 0;
  std::vector<T> points_n_;
};

/// One axial block: time-axis self-attention, element-axis self-attention,
/// cross-attention to the context latents, MLP. Pre-norm residuals.
template <typename T>
class AxialBlock
{
public:
  AxialBlock(ParamStore<T> & store, const std::string & name, const DenoiserConfig & cfg, std::mt19937_64 & rng);

  /// x: (elements * timesteps) x hidden, element-major; updated in place.
  void forward(T * x, std::size_t elements, std::size_t timesteps, const T * latents, std::size_t n_latents);
  /// dx: gradient w.r.t. the block output on entry, w.r.t. its input on exit.
  void backward(T * dx, T * dlatents);

private:
  std::size_t hidden_;
  std::size_t elements_ = 0;
  std::size_t timesteps_ = 0;
  std::size_t n_latents_ = 0;
  LayerNorm<T> ln_time_;
  Attention<T> time_attn_;
  LayerNorm<T> ln_elem_;
  Attention<T> elem_attn_;
  LayerNorm<T> ln_cross_;
  Attention<T> cross_attn_;
  LayerNorm<T> ln_mlp_;
  Mlp<T> mlp_;
};

/// v-predictor over the concatenated agent and traffic-light tokens.
template <typename T>
class DenoiserNet
{
public:
  explicit DenoiserNet(const DenoiserConfig & cfg);
  DenoiserNet(const DenoiserNet &) = delete;
  DenoiserNet & operator=(const DenoiserNet &) = delete;

  const DenoiserConfig & config() const { return cfg_; }
  ParamStore<T> & params() { return store_; }
  const ParamStore<T> & params() const { return store_; }

  /// Predict v for (z_t, t, conditioning). Keeps activations for backward().
  /// Throws std::runtime_error naming the layer when activations turn non-finite.
  tensor::MultiTensor forward(const tensor::MultiTensor & z_t, double t, const tensor::ConditioningSet & cond);

  /// Accumulate parameter gradients for d loss / d v_hat.
  void backward(const tensor::MultiTensor & dv_hat);

  /// Context latents for a roadgraph point set (no caching side effects on forward()).
  std::vector<T> encode_context(const tensor::RoadContext & context, bool & empty);

  /// Diffusion-time embedding (1 x hidden_dim).
  std::vector<T> time_embedding(double t);

  bool last_context_empty() const { return context_empty_; }

private:
  void check_finite(const std::vector<T> & v, const char * where, int layer) const;

  DenoiserConfig cfg_;
  ParamStore<T> store_;
  std::mt19937_64 init_rng_;
  Linear<T> in_agents_;
  Linear<T> in_lights_;
  Linear<T> time_fc1_;
  Silu<T> time_act_;
  Linear<T> time_fc2_;
  ContextEncoder<T> context_;
  LayerNorm<T> ln_latents_;
  std::vector<std::unique_ptr<AxialBlock<T>>> blocks_;
  LayerNorm<T> ln_out_;
  Linear<T> out_agents_;
  Linear<T> out_lights_;
  std::vector<T> time_pe_;  // timesteps x hidden, fixed

  // cache
  bool context_empty_ = true;
  std::vector<T> latents_n_;
};

/// Sinusoidal features of a scalar diffusion time.
std::vector<double> sinusoidal_time_features(double t, int width);

/// diffusion::Denoiser adapter around a network.
template <typename T>
class NetDenoiser : public diffusion::Denoiser
{
public:
  explicit NetDenoiser(DenoiserNet<T> & net) : net_(net) {}
  tensor::MultiTensor predict_v(
    const tensor::MultiTensor & z_t, double t, const tensor::ConditioningSet & cond) override
  {
    return net_.forward(z_t, t, cond);
  }

private:
  DenoiserNet<T> & net_;
};

}  // namespace twm::nn

#endif  // TWM__NN__DENOISER_HPP_
