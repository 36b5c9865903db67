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

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>
#include <stdexcept>

namespace twm::diffusion
{
namespace
{
void require_shape(const MultiTensor & a, const MultiTensor & b, const char * what)
{
  if (!a.same_shape(b)) {
    throw std::invalid_argument(std::string(what) + ": shape mismatch");
  }
}

// out = ca * a + cb * b, element-wise over both tensors.
MultiTensor lincomb(double ca, const MultiTensor & a, double cb, const MultiTensor & b)
{
  MultiTensor out = a;
  auto mix = [&](std::vector<double> & o, const std::vector<double> & x, const std::vector<double> & y) {
    for (std::size_t i = 0; i < o.size(); ++i) {
      o[i] = ca * x[i] + cb * y[i];
    }
  };
  mix(out.agents.data(), a.agents.data(), b.agents.data());
  mix(out.lights.data(), a.lights.data(), b.lights.data());
  return out;
}
}  // namespace

AlphaSigma schedule(double t)
{
  if (!(t >= 0.0 && t <= 1.0)) {
    std::ostringstream msg;
    msg << "schedule: t = " << t << " outside [0, 1]";
    throw std::domain_error(msg.str());
  }
  // Exact endpoints: cos(pi/2) is not exactly zero in floating point.
  if (t == 0.0) {
    return {1.0, 0.0};
  }
  if (t == 1.0) {
    return {0.0, 1.0};
  }
  const double a = 0.5 * std::numbers::pi * t;
  return {std::cos(a), std::sin(a)};
}

MultiTensor forward_noise(const MultiTensor & x, double t, const MultiTensor & eps)
{
  require_shape(x, eps, "forward_noise");
  const auto [alpha, sigma] = schedule(t);
  return lincomb(alpha, x, sigma, eps);
}

MultiTensor v_target(const MultiTensor & x, const MultiTensor & eps, double t)
{
  require_shape(x, eps, "v_target");
  const auto [alpha, sigma] = schedule(t);
  return lincomb(alpha, eps, -sigma, x);
}

MultiTensor x_from_v(const MultiTensor & z_t, const MultiTensor & v_hat, double t)
{
  require_shape(z_t, v_hat, "x_from_v");
  const auto [alpha, sigma] = schedule(t);
  return lincomb(alpha, z_t, -sigma, v_hat);
}

Transition transition(double t, double s)
{
  if (!(s >= 0.0 && t <= 1.0 && s < t)) {
    std::ostringstream msg;
    msg << "transition: require 0 <= s < t <= 1, got t = " << t << ", s = " << s;
    throw std::domain_error(msg.str());
  }
  const auto [alpha_t, sigma_t] = schedule(t);
  const auto [alpha_s, sigma_s] = schedule(s);
  if (alpha_s <= 0.0) {
    throw std::domain_error("transition: alpha_s = 0");
  }
  const double alpha_ts = alpha_t / alpha_s;
  const double sigma_ts_sq = std::max(0.0, sigma_t * sigma_t - alpha_ts * alpha_ts * sigma_s * sigma_s);
  return {alpha_ts, sigma_ts_sq};
}

Posterior posterior(double t, double s)
{
  const Transition tr = transition(t, s);
  const auto [alpha_t, sigma_t] = schedule(t);
  const auto [alpha_s, sigma_s] = schedule(s);
  const double sigma_t_sq = sigma_t * sigma_t;
  const double sigma_s_sq = sigma_s * sigma_s;
  return {
    tr.alpha_ts * sigma_s_sq / sigma_t_sq, alpha_s * tr.sigma_ts_sq / sigma_t_sq,
    tr.sigma_ts_sq * sigma_s_sq / sigma_t_sq};
}

MultiTensor denoise_step(
  const MultiTensor & z_t, const MultiTensor & x_hat, double t, double s, std::mt19937_64 & rng)
{
  require_shape(z_t, x_hat, "denoise_step");
  const Posterior p = posterior(t, s);
  MultiTensor out = lincomb(p.coef_z, z_t, p.coef_x, x_hat);
  if (p.variance > 0.0) {
    const double sd = std::sqrt(p.variance);
    std::normal_distribution<double> normal(0.0, 1.0);
    for (auto * d : {&out.agents.data(), &out.lights.data()}) {
      for (double & v : *d) {
        v += sd * normal(rng);
      }
    }
  }
  return out;
}

MultiTensor gaussian_like(const tensor::TensorDims & dims, std::mt19937_64 & rng)
{
  MultiTensor out(dims);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (auto * d : {&out.agents.data(), &out.lights.data()}) {
    for (double & v : *d) {
      v = normal(rng);
    }
  }
  return out;
}

SceneTensor build_loss_weight(
  tensor::ElementKind kind, int elements, int timesteps, int channels,
  const std::vector<std::uint8_t> & valid)
{
  if (valid.size() != static_cast<std::size_t>(elements) * timesteps) {
    throw std::invalid_argument("build_loss_weight: validity grid shape mismatch");
  }
  SceneTensor w(kind, elements, timesteps, channels);
  for (int e = 0; e < elements; ++e) {
    for (int t = 0; t < timesteps; ++t) {
      auto c = w.cell(e, t);
      if (valid[static_cast<std::size_t>(e) * timesteps + t] != 0) {
        std::fill(c.begin(), c.end(), 1.0);
      } else {
        c.back() = 1.0;
      }
    }
  }
  return w;
}

MultiTensor build_loss_weight(const MultiTensor & x_gt)
{
  auto grid = [](const SceneTensor & x) {
    std::vector<std::uint8_t> v(static_cast<std::size_t>(x.elements()) * x.timesteps());
    for (int e = 0; e < x.elements(); ++e) {
      for (int t = 0; t < x.timesteps(); ++t) {
        v[static_cast<std::size_t>(e) * x.timesteps() + t] =
          tensor::validity_prob(x.at(e, t, x.validity_channel())) >= 0.5 ? 1 : 0;
      }
    }
    return v;
  };
  MultiTensor w;
  w.agents = build_loss_weight(
    x_gt.agents.kind(), x_gt.agents.elements(), x_gt.agents.timesteps(), x_gt.agents.channels(),
    grid(x_gt.agents));
  w.lights = build_loss_weight(
    x_gt.lights.kind(), x_gt.lights.elements(), x_gt.lights.timesteps(), x_gt.lights.channels(),
    grid(x_gt.lights));
  return w;
}

double masked_loss(const MultiTensor & v_hat, const MultiTensor & v_tgt, const MultiTensor & w)
{
  require_shape(v_hat, v_tgt, "masked_loss");
  require_shape(v_hat, w, "masked_loss");
  double acc = 0.0;
  auto add = [&acc](const SceneTensor & a, const SceneTensor & b, const SceneTensor & ww) {
    const auto & x = a.data();
    const auto & y = b.data();
    const auto & m = ww.data();
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double r = (x[i] - y[i]) * m[i];
      acc += r * r;
    }
  };
  add(v_hat.agents, v_tgt.agents, w.agents);
  add(v_hat.lights, v_tgt.lights, w.lights);
  return acc / static_cast<double>(v_hat.total_cells());
}

MultiTensor masked_loss_grad(const MultiTensor & v_hat, const MultiTensor & v_tgt, const MultiTensor & w)
{
  require_shape(v_hat, v_tgt, "masked_loss_grad");
  require_shape(v_hat, w, "masked_loss_grad");
  MultiTensor g = v_hat;
  const double scale = 2.0 / static_cast<double>(v_hat.total_cells());
  auto fill = [scale](SceneTensor & out, const SceneTensor & a, const SceneTensor & b, const SceneTensor & ww) {
    auto & o = out.data();
    for (std::size_t i = 0; i < o.size(); ++i) {
      const double m = ww.data()[i];
      o[i] = scale * (a.data()[i] - b.data()[i]) * m * m;
    }
  };
  fill(g.agents, v_hat.agents, v_tgt.agents, w.agents);
  fill(g.lights, v_hat.lights, v_tgt.lights, w.lights);
  return g;
}

std::string to_string(ClipMode mode)
{
  switch (mode) {
    case ClipMode::Soft:
      return "soft";
    case ClipMode::Hard:
      return "hard";
    case ClipMode::HardValidity:
      return "hard-validity";
    case ClipMode::None:
      return "none";
  }
  return "none";
}

ClipMode clip_mode_from_string(const std::string & s)
{
  if (s == "soft") {
    return ClipMode::Soft;
  }
  if (s == "hard") {
    return ClipMode::Hard;
  }
  if (s == "hard-validity") {
    return ClipMode::HardValidity;
  }
  if (s == "none") {
    return ClipMode::None;
  }
  throw std::invalid_argument("unknown clip mode '" + s + "'");
}

SceneTensor clip(const SceneTensor & x_hat, ClipMode mode)
{
  if (mode == ClipMode::None) {
    return x_hat;
  }
  SceneTensor out = x_hat;
  for (int e = 0; e < out.elements(); ++e) {
    for (int t = 0; t < out.timesteps(); ++t) {
      auto c = out.cell(e, t);
      const double raw = c.back();
      const double m = tensor::validity_prob(raw);
      const bool invalid = m < 0.5;
      switch (mode) {
        case ClipMode::Soft:
          for (std::size_t d = 0; d + 1 < c.size(); ++d) {
            c[d] *= m;
          }
          c.back() = std::clamp(raw, -1.0, 1.0);
          break;
        case ClipMode::Hard:
          c.back() = invalid ? -1.0 : 1.0;
          break;
        case ClipMode::HardValidity:
          if (invalid) {
            std::fill(c.begin(), c.end() - 1, 0.0);
          }
          c.back() = invalid ? -1.0 : 1.0;
          break;
        case ClipMode::None:
          break;
      }
    }
  }
  return out;
}

MultiTensor clip(const MultiTensor & x_hat, ClipMode mode)
{
  MultiTensor out;
  out.agents = clip(x_hat.agents, mode);
  out.lights = clip(x_hat.lights, mode);
  return out;
}

void apply_inpainting(MultiTensor & x_hat, const ConditioningSet & cond)
{
  auto overwrite = [](SceneTensor & x, const SceneTensor & xbar, const tensor::CellMask & m) {
    if (m.bits.size() != x.size() || !xbar.same_shape(x)) {
      throw std::invalid_argument("apply_inpainting: conditioning shape mismatch");
    }
    auto & d = x.data();
    for (std::size_t i = 0; i < d.size(); ++i) {
      if (m.bits[i] != 0) {
        d[i] = xbar.data()[i];
      }
    }
  };
  overwrite(x_hat.agents, cond.values.agents, cond.mask.agents);
  overwrite(x_hat.lights, cond.values.lights, cond.mask.lights);
}

std::vector<double> time_grid(int n_steps)
{
  if (n_steps < 1) {
    throw std::invalid_argument("time_grid: n_steps must be >= 1");
  }
  std::vector<double> g(n_steps + 1);
  for (int k = 0; k <= n_steps; ++k) {
    g[k] = 1.0 - static_cast<double>(k) / n_steps;
  }
  g.front() = 1.0;
  g.back() = 0.0;
  return g;
}

MultiTensor sample(
  Denoiser & denoiser, const ConditioningSet & cond, const SamplerConfig & cfg, std::mt19937_64 & rng)
{
  const std::vector<double> grid = time_grid(cfg.n_steps);
  const tensor::TensorDims dims = cond.values.dims();
  MultiTensor z = gaussian_like(dims, rng);
  MultiTensor x_hat;
  for (int k = 0; k < cfg.n_steps; ++k) {
    const double t = grid[k];
    const double s = grid[k + 1];
    const MultiTensor v_hat = denoiser.predict_v(z, t, cond);
    if (!v_hat.same_shape(z)) {
      std::ostringstream msg;
      msg << "sample: denoiser output shape mismatch at step " << k;
      throw std::runtime_error(msg.str());
    }
    x_hat = clip(x_from_v(z, v_hat, t), cfg.clip);
    apply_inpainting(x_hat, cond);
    z = denoise_step(z, x_hat, t, s, rng);
  }
  return z;
}

}  // namespace twm::diffusion
