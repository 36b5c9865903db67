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

#include "twm/diffusion.hpp"
#include "twm/nn/denoiser.hpp"
#include "twm/nn/optimizer.hpp"

#include <doctest.h>

#include <cmath>
#include <random>
#include <stdexcept>

using namespace twm;
using nn::DenoiserConfig;
using nn::DenoiserNet;
using tensor::MultiTensor;

namespace
{

DenoiserConfig tiny_config()
{
  DenoiserConfig c;
  c.hidden_dim = 8;
  c.n_layers = 2;
  c.n_heads = 2;
  c.n_context_latents = 3;
  c.time_embed_dim = 8;
  c.mlp_ratio = 2;
  c.max_context_points = 16;
  c.dims = {3, 2, 5};
  c.init_seed = 42;
  return c;
}

tensor::RoadContext random_context(int points, std::mt19937_64 & rng, double shift = 0.0)
{
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  tensor::RoadContext c;
  for (int p = 0; p < points; ++p) {
    c.features.push_back(u(rng) + shift);
    c.features.push_back(u(rng));
    c.features.push_back(u(rng));
    c.features.push_back(u(rng));
    for (int k = 0; k < 5; ++k) {
      c.features.push_back(k == p % 5 ? 1.0 : 0.0);
    }
  }
  return c;
}

MultiTensor random_tensor(const tensor::TensorDims & dims, std::mt19937_64 & rng)
{
  MultiTensor x(dims);
  std::normal_distribution<double> n;
  for (auto & v : x.agents.data()) {
    v = n(rng);
  }
  for (auto & v : x.lights.data()) {
    v = n(rng);
  }
  return x;
}

}  // namespace

TEST_CASE("config validation")
{
  DenoiserConfig c = tiny_config();
  CHECK_NOTHROW(c.validate());
  c.n_heads = 3;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  CHECK(c.agent_input_dim() == 36);
  CHECK(c.light_input_dim() == 39);
}

TEST_CASE("forward preserves tensor shapes and is deterministic")
{
  const DenoiserConfig cfg = tiny_config();
  DenoiserNet<float> net(cfg);
  DenoiserNet<float> twin(cfg);
  std::mt19937_64 rng(1);
  const MultiTensor z = random_tensor(cfg.dims, rng);
  auto cond = tensor::make_conditioning(z, tensor::history_mask(cfg.dims, 2), random_context(7, rng));
  const MultiTensor v = net.forward(z, 0.3, cond);
  CHECK(v.same_shape(z));
  CHECK(v.all_finite());
  CHECK(twin.forward(z, 0.3, cond).agents.data() == v.agents.data());
  CHECK_THROWS_AS(net.forward(MultiTensor(tensor::TensorDims{4, 2, 5}), 0.3, cond), std::invalid_argument);
}

TEST_CASE("context encoder contract")
{
  const DenoiserConfig cfg = tiny_config();
  DenoiserNet<double> net(cfg);
  std::mt19937_64 rng(2);
  bool empty = false;
  const auto lat = net.encode_context(tensor::RoadContext{}, empty);
  CHECK(empty);
  REQUIRE(lat.size() == static_cast<std::size_t>(cfg.n_context_latents * cfg.hidden_dim));
  for (double v : lat) {
    CHECK(v == 0.0);
  }
  std::mt19937_64 r1(5), r2(5);
  const auto a = net.encode_context(random_context(10, r1), empty);
  CHECK_FALSE(empty);
  CHECK(a.size() == lat.size());
  const auto b = net.encode_context(random_context(10, r2, 0.5), empty);
  double diff = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff += std::abs(a[i] - b[i]);
  }
  CHECK(diff > 1e-6);
  // More points than the budget are truncated rather than rejected.
  const auto c = net.encode_context(random_context(40, rng), empty);
  CHECK(c.size() == lat.size());
}

TEST_CASE("agent permutation equivariance")
{
  const DenoiserConfig cfg = tiny_config();
  DenoiserNet<double> net(cfg);
  std::mt19937_64 rng(3);
  const MultiTensor z = random_tensor(cfg.dims, rng);
  const MultiTensor x = random_tensor(cfg.dims, rng);
  tensor::TaskMaskParams p;
  p.history_len = 2;
  p.control_keep_prob = 0.7;
  const auto mask = tensor::make_task_mask(p, cfg.dims, rng);
  const auto ctx = random_context(6, rng);
  const auto cond = tensor::make_conditioning(x, mask, ctx);
  const MultiTensor v = net.forward(z, 0.6, cond);

  const int perm[3] = {2, 0, 1};
  auto permute = [&](const tensor::SceneTensor & s) {
    tensor::SceneTensor o = s;
    for (int e = 0; e < s.elements(); ++e) {
      for (int t = 0; t < s.timesteps(); ++t) {
        for (int d = 0; d < s.channels(); ++d) {
          o.at(perm[e], t, d) = s.at(e, t, d);
        }
      }
    }
    return o;
  };
  MultiTensor zp = z;
  zp.agents = permute(z.agents);
  auto condp = cond;
  condp.values.agents = permute(cond.values.agents);
  for (int e = 0; e < 3; ++e) {
    for (int t = 0; t < 5; ++t) {
      for (int d = 0; d < tensor::kAgentDim; ++d) {
        condp.mask.agents.set(perm[e], t, d, cond.mask.agents.at(e, t, d));
      }
    }
  }
  const MultiTensor vp = net.forward(zp, 0.6, condp);
  for (int e = 0; e < 3; ++e) {
    for (int t = 0; t < 5; ++t) {
      for (int d = 0; d < tensor::kAgentDim; ++d) {
        CHECK(vp.agents.at(perm[e], t, d) == doctest::Approx(v.agents.at(e, t, d)).epsilon(1e-10));
      }
    }
  }
  for (std::size_t i = 0; i < v.lights.size(); ++i) {
    CHECK(vp.lights.data()[i] == doctest::Approx(v.lights.data()[i]).epsilon(1e-10));
  }
}

TEST_CASE("time embedding separates the sampler grid")
{
  DenoiserNet<double> net(tiny_config());
  const auto grid = diffusion::time_grid(32);
  std::vector<std::vector<double>> emb;
  for (double t : grid) {
    emb.push_back(net.time_embedding(t));
  }
  for (std::size_t i = 0; i < emb.size(); ++i) {
    for (std::size_t j = i + 1; j < emb.size(); ++j) {
      double d = 0.0;
      for (std::size_t k = 0; k < emb[i].size(); ++k) {
        d += std::abs(emb[i][k] - emb[j][k]);
      }
      CHECK(d > 1e-9);
    }
  }
}

TEST_CASE("masked loss gradient matches central differences")
{
  DenoiserConfig cfg = tiny_config();
  DenoiserNet<double> net(cfg);
  std::mt19937_64 rng(4);
  // Perturb every parameter so gains and biases are not at their symmetric init.
  {
    std::normal_distribution<double> n(0.0, 0.2);
    for (auto & p : net.params().params()) {
      for (auto & v : p.value) {
        v += n(rng);
      }
    }
  }
  const MultiTensor x = random_tensor(cfg.dims, rng);
  const MultiTensor eps = random_tensor(cfg.dims, rng);
  const double t = 0.35;
  tensor::TaskMaskParams tp;
  tp.history_len = 2;
  tp.control_keep_prob = 0.8;
  const auto cond = tensor::make_conditioning(x, tensor::make_task_mask(tp, cfg.dims, rng), random_context(9, rng));
  const MultiTensor z = diffusion::forward_noise(x, t, eps);
  const MultiTensor vt = diffusion::v_target(x, eps, t);
  MultiTensor w = random_tensor(cfg.dims, rng);

  auto loss = [&]() { return diffusion::masked_loss(net.forward(z, t, cond), vt, w); };
  net.params().zero_grad();
  const MultiTensor vh = net.forward(z, t, cond);
  net.backward(diffusion::masked_loss_grad(vh, vt, w));

  std::size_t checked = 0;
  double worst = 0.0;
  for (auto & p : net.params().params()) {
    std::uniform_int_distribution<std::size_t> pick(0, p.size() - 1);
    for (int rep = 0; rep < 2; ++rep) {
      const std::size_t i = pick(rng);
      const double v0 = p.value[i];
      const double h = 1e-5;
      p.value[i] = v0 + h;
      const double lp = loss();
      p.value[i] = v0 - h;
      const double lm = loss();
      p.value[i] = v0;
      const double fd = (lp - lm) / (2 * h);
      const double an = p.grad[i];
      const double scale = std::max({std::abs(fd), std::abs(an), 1e-6});
      const double rel = std::abs(fd - an) / scale;
      CAPTURE(p.name);
      CAPTURE(fd);
      CAPTURE(an);
      CHECK(rel < 1e-3);
      worst = std::max(worst, rel);
      ++checked;
    }
  }
  MESSAGE("checked " << checked << " coordinates, worst relative error " << worst);
}

TEST_CASE("adamw with zero learning rate leaves parameters unchanged")
{
  DenoiserNet<float> net(tiny_config());
  std::vector<std::vector<float>> before;
  for (auto & p : net.params().params()) {
    before.push_back(p.value);
    for (auto & g : p.grad) {
      g = 0.5f;
    }
  }
  nn::AdamW opt(net.params(), nn::AdamWConfig{});
  for (int i = 0; i < 5; ++i) {
    opt.step(net.params(), 0.0);
  }
  std::size_t k = 0;
  for (auto & p : net.params().params()) {
    CHECK(p.value == before[k++]);
  }
}

TEST_CASE("adamw clips the global gradient norm")
{
  nn::ParamStore<float> store;
  auto & p = store.add("w", {2});
  p.grad = {30.0f, 40.0f};
  nn::AdamWConfig c;
  c.weight_decay = 0.0;
  nn::AdamW opt(store, c);
  CHECK(opt.step(store, 0.1) == doctest::Approx(50.0));
  // First Adam step moves each coordinate by lr * sign(g) regardless of scale.
  CHECK(p.value[0] == doctest::Approx(-0.1).epsilon(1e-4));
  CHECK(p.value[1] == doctest::Approx(-0.1).epsilon(1e-4));
}
