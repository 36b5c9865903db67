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

#include "twm/nn/denoiser.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace twm::nn
{
namespace
{
template <typename T>
void add_into(std::vector<T> & dst, const std::vector<T> & src)
{
  for (std::size_t i = 0; i < dst.size(); ++i) {
    dst[i] += src[i];
  }
}

// rows ordered (a, b) -> (b, a); each row is `width` wide.
template <typename T>
void swap_axes(const T * src, std::size_t na, std::size_t nb, std::size_t width, T * dst)
{
  for (std::size_t a = 0; a < na; ++a) {
    for (std::size_t b = 0; b < nb; ++b) {
      std::copy_n(src + (a * nb + b) * width, width, dst + (b * na + a) * width);
    }
  }
}
}  // namespace

void DenoiserConfig::validate() const
{
  if (hidden_dim <= 0 || n_layers < 0 || n_heads <= 0 || n_context_latents <= 0 ||
      time_embed_dim <= 0 || time_embed_dim % 2 != 0 || mlp_ratio <= 0 || max_context_points < 0) {
    throw std::invalid_argument("DenoiserConfig: non-positive size");
  }
  if (hidden_dim % n_heads != 0) {
    throw std::invalid_argument("DenoiserConfig: hidden_dim must be divisible by n_heads");
  }
  if (hidden_dim % 2 != 0) {
    throw std::invalid_argument("DenoiserConfig: hidden_dim must be even");
  }
  if (dims.agents <= 0 || dims.lights < 0 || dims.timesteps <= 0) {
    throw std::invalid_argument("DenoiserConfig: invalid tensor dims");
  }
}

std::vector<double> sinusoidal_time_features(double t, int width)
{
  const int half = width / 2;
  std::vector<double> f(width);
  for (int i = 0; i < half; ++i) {
    const double freq = std::exp(-std::log(10000.0) * i / half);
    const double arg = 1000.0 * t * freq;
    f[i] = std::sin(arg);
    f[half + i] = std::cos(arg);
  }
  return f;
}

// ---------------------------------------------------------------- ContextEncoder

template <typename T>
ContextEncoder<T>::ContextEncoder(ParamStore<T> & store, const DenoiserConfig & cfg, std::mt19937_64 & rng)
: hidden_(cfg.hidden_dim),
  n_latents_(cfg.n_context_latents),
  max_points_(cfg.max_context_points),
  point_fc1_(store, "ctx.point_fc1", tensor::RoadContext::kFeatures, cfg.hidden_dim, rng),
  point_fc2_(store, "ctx.point_fc2", cfg.hidden_dim, cfg.hidden_dim, rng),
  point_ln_(store, "ctx.point_ln", cfg.hidden_dim),
  queries_(&store.add("ctx.queries", {static_cast<std::size_t>(cfg.n_context_latents), static_cast<std::size_t>(cfg.hidden_dim)})),
  query_ln_(store, "ctx.query_ln", cfg.hidden_dim),
  cross_(store, "ctx.cross", cfg.hidden_dim, cfg.n_heads, rng),
  mlp_ln_(store, "ctx.mlp_ln", cfg.hidden_dim),
  mlp_(store, "ctx.mlp", cfg.hidden_dim, cfg.hidden_dim * cfg.mlp_ratio, rng)
{
  std::normal_distribution<double> normal(0.0, 1.0);
  for (auto & q : queries_->value) {
    q = static_cast<T>(normal(rng));
  }
}

template <typename T>
std::vector<T> ContextEncoder<T>::forward(const tensor::RoadContext & context, bool & empty)
{
  const std::size_t h = hidden_;
  n_points_ = std::min(context.points(), max_points_);
  empty_ = n_points_ == 0;
  empty = empty_;
  std::vector<T> latents(n_latents_ * h, T(0));
  if (empty_) {
    return latents;
  }
  const std::size_t f = tensor::RoadContext::kFeatures;
  std::vector<T> pts(n_points_ * f);
  for (std::size_t i = 0; i < pts.size(); ++i) {
    pts[i] = static_cast<T>(context.features[i]);
  }
  std::vector<T> a(n_points_ * h);
  std::vector<T> b(n_points_ * h);
  point_fc1_.forward(pts.data(), n_points_, a.data());
  point_act_.forward(a.data(), a.size(), b.data());
  point_fc2_.forward(b.data(), n_points_, a.data());
  points_n_.resize(n_points_ * h);
  point_ln_.forward(a.data(), n_points_, points_n_.data());

  latents = queries_->value;
  std::vector<T> qn(n_latents_ * h);
  std::vector<T> upd(n_latents_ * h);
  query_ln_.forward(latents.data(), n_latents_, qn.data());
  cross_.forward(qn.data(), 1, n_latents_, points_n_.data(), n_points_, true, upd.data());
  add_into(latents, upd);
  mlp_ln_.forward(latents.data(), n_latents_, qn.data());
  mlp_.forward(qn.data(), n_latents_, upd.data());
  add_into(latents, upd);
  return latents;
}

template <typename T>
void ContextEncoder<T>::backward(const T * dlatents)
{
  if (empty_) {
    return;
  }
  const std::size_t h = hidden_;
  std::vector<T> dl(dlatents, dlatents + n_latents_ * h);
  std::vector<T> dqn(n_latents_ * h, T(0));
  mlp_.backward(dl.data(), n_latents_, dqn.data());
  mlp_ln_.backward(dqn.data(), n_latents_, dl.data());

  std::fill(dqn.begin(), dqn.end(), T(0));
  std::vector<T> dpoints(n_points_ * h, T(0));
  cross_.backward(dl.data(), dqn.data(), dpoints.data());
  query_ln_.backward(dqn.data(), n_latents_, dl.data());
  add_into(queries_->grad, dl);

  std::vector<T> da(n_points_ * h, T(0));
  point_ln_.backward(dpoints.data(), n_points_, da.data());
  std::vector<T> db(n_points_ * h, T(0));
  point_fc2_.backward(da.data(), n_points_, db.data());
  std::fill(da.begin(), da.end(), T(0));
  point_act_.backward(db.data(), db.size(), da.data());
  point_fc1_.backward(da.data(), n_points_, nullptr);
}

// ---------------------------------------------------------------- AxialBlock

template <typename T>
AxialBlock<T>::AxialBlock(
  ParamStore<T> & store, const std::string & name, const DenoiserConfig & cfg, std::mt19937_64 & rng)
: hidden_(cfg.hidden_dim),
  ln_time_(store, name + ".ln_time", cfg.hidden_dim),
  time_attn_(store, name + ".time_attn", cfg.hidden_dim, cfg.n_heads, rng),
  ln_elem_(store, name + ".ln_elem", cfg.hidden_dim),
  elem_attn_(store, name + ".elem_attn", cfg.hidden_dim, cfg.n_heads, rng),
  ln_cross_(store, name + ".ln_cross", cfg.hidden_dim),
  cross_attn_(store, name + ".cross_attn", cfg.hidden_dim, cfg.n_heads, rng),
  ln_mlp_(store, name + ".ln_mlp", cfg.hidden_dim),
  mlp_(store, name + ".mlp", cfg.hidden_dim, cfg.hidden_dim * cfg.mlp_ratio, rng)
{
}

template <typename T>
void AxialBlock<T>::forward(
  T * x, std::size_t elements, std::size_t timesteps, const T * latents, std::size_t n_latents)
{
  elements_ = elements;
  timesteps_ = timesteps;
  n_latents_ = n_latents;
  const std::size_t n = elements * timesteps;
  const std::size_t h = hidden_;
  std::vector<T> a(n * h);
  std::vector<T> b(n * h);
  std::vector<T> c(n * h);

  ln_time_.forward(x, n, a.data());
  time_attn_.forward(a.data(), elements, timesteps, a.data(), timesteps, false, b.data());
  for (std::size_t i = 0; i < n * h; ++i) {
    x[i] += b[i];
  }

  ln_elem_.forward(x, n, a.data());
  swap_axes(a.data(), elements, timesteps, h, b.data());
  elem_attn_.forward(b.data(), timesteps, elements, b.data(), elements, false, c.data());
  swap_axes(c.data(), timesteps, elements, h, a.data());
  for (std::size_t i = 0; i < n * h; ++i) {
    x[i] += a[i];
  }

  ln_cross_.forward(x, n, a.data());
  cross_attn_.forward(a.data(), 1, n, latents, n_latents, true, b.data());
  for (std::size_t i = 0; i < n * h; ++i) {
    x[i] += b[i];
  }

  ln_mlp_.forward(x, n, a.data());
  mlp_.forward(a.data(), n, b.data());
  for (std::size_t i = 0; i < n * h; ++i) {
    x[i] += b[i];
  }
}

template <typename T>
void AxialBlock<T>::backward(T * dx, T * dlatents)
{
  const std::size_t n = elements_ * timesteps_;
  const std::size_t h = hidden_;
  std::vector<T> da(n * h, T(0));

  mlp_.backward(dx, n, da.data());
  ln_mlp_.backward(da.data(), n, dx);

  std::fill(da.begin(), da.end(), T(0));
  cross_attn_.backward(dx, da.data(), dlatents);
  ln_cross_.backward(da.data(), n, dx);

  std::vector<T> dperm(n * h);
  swap_axes(dx, elements_, timesteps_, h, dperm.data());
  std::vector<T> dbp(n * h, T(0));
  elem_attn_.backward(dperm.data(), dbp.data(), dbp.data());
  swap_axes(dbp.data(), timesteps_, elements_, h, da.data());
  ln_elem_.backward(da.data(), n, dx);

  std::fill(da.begin(), da.end(), T(0));
  time_attn_.backward(dx, da.data(), da.data());
  ln_time_.backward(da.data(), n, dx);
}

// ---------------------------------------------------------------- DenoiserNet

template <typename T>
DenoiserNet<T>::DenoiserNet(const DenoiserConfig & cfg)
: cfg_((cfg.validate(), cfg)),
  init_rng_(cfg.init_seed),
  in_agents_(store_, "in_agents", cfg.agent_input_dim(), cfg.hidden_dim, init_rng_),
  in_lights_(store_, "in_lights", cfg.light_input_dim(), cfg.hidden_dim, init_rng_),
  time_fc1_(store_, "time_fc1", cfg.time_embed_dim, cfg.hidden_dim, init_rng_),
  time_fc2_(store_, "time_fc2", cfg.hidden_dim, cfg.hidden_dim, init_rng_),
  context_(store_, cfg, init_rng_),
  ln_latents_(store_, "ln_latents", cfg.hidden_dim),
  ln_out_(store_, "ln_out", cfg.hidden_dim),
  out_agents_(store_, "out_agents", cfg.hidden_dim, tensor::kAgentDim, init_rng_, 0.1),
  out_lights_(store_, "out_lights", cfg.hidden_dim, tensor::kLightDim, init_rng_, 0.1)
{
  for (int l = 0; l < cfg.n_layers; ++l) {
    blocks_.push_back(
      std::make_unique<AxialBlock<T>>(store_, "block" + std::to_string(l), cfg, init_rng_));
  }
  const std::size_t steps = cfg.dims.timesteps;
  const std::size_t h = cfg.hidden_dim;
  time_pe_.resize(steps * h);
  for (std::size_t t = 0; t < steps; ++t) {
    for (std::size_t i = 0; i < h / 2; ++i) {
      const double freq = std::exp(-std::log(10000.0) * (2.0 * i) / static_cast<double>(h));
      time_pe_[t * h + 2 * i] = static_cast<T>(std::sin(t * freq));
      time_pe_[t * h + 2 * i + 1] = static_cast<T>(std::cos(t * freq));
    }
  }
}

template <typename T>
std::vector<T> DenoiserNet<T>::time_embedding(double t)
{
  const auto feats = sinusoidal_time_features(t, cfg_.time_embed_dim);
  std::vector<T> f(feats.begin(), feats.end());
  std::vector<T> a(cfg_.hidden_dim);
  std::vector<T> b(cfg_.hidden_dim);
  time_fc1_.forward(f.data(), 1, a.data());
  time_act_.forward(a.data(), a.size(), b.data());
  time_fc2_.forward(b.data(), 1, a.data());
  return a;
}

template <typename T>
std::vector<T> DenoiserNet<T>::encode_context(const tensor::RoadContext & context, bool & empty)
{
  return context_.forward(context, empty);
}

template <typename T>
void DenoiserNet<T>::check_finite(const std::vector<T> & v, const char * where, int layer) const
{
  for (const T x : v) {
    if (!std::isfinite(static_cast<double>(x))) {
      std::ostringstream msg;
      msg << "denoiser: non-finite activation after " << where;
      if (layer >= 0) {
        msg << " (layer " << layer << ")";
      }
      throw std::runtime_error(msg.str());
    }
  }
}

template <typename T>
tensor::MultiTensor DenoiserNet<T>::forward(
  const tensor::MultiTensor & z_t, double t, const tensor::ConditioningSet & cond)
{
  const auto & d = cfg_.dims;
  const tensor::TensorDims zd = z_t.dims();
  if (zd.agents != d.agents || zd.lights != d.lights || zd.timesteps != d.timesteps ||
      !cond.values.same_shape(z_t) || cond.mask.agents.bits.size() != z_t.agents.size() ||
      cond.mask.lights.bits.size() != z_t.lights.size()) {
    throw std::invalid_argument("denoiser: input shape does not match the model configuration");
  }
  const std::size_t steps = d.timesteps;
  const std::size_t h = cfg_.hidden_dim;
  const std::size_t na = static_cast<std::size_t>(d.agents) * steps;
  const std::size_t nl = static_cast<std::size_t>(d.lights) * steps;
  const std::size_t n = na + nl;

  auto pack = [](const tensor::SceneTensor & z, const tensor::CellMask & m, const tensor::SceneTensor & xb) {
    const std::size_t rows = static_cast<std::size_t>(z.elements()) * z.timesteps();
    const std::size_t dch = z.channels();
    std::vector<T> in(rows * 3 * dch);
    for (std::size_t r = 0; r < rows; ++r) {
      T * row = in.data() + r * 3 * dch;
      for (std::size_t c = 0; c < dch; ++c) {
        row[c] = static_cast<T>(z.data()[r * dch + c]);
        row[dch + c] = m.bits[r * dch + c] ? T(1) : T(0);
        row[2 * dch + c] = static_cast<T>(xb.data()[r * dch + c]);
      }
    }
    return in;
  };
  const std::vector<T> in_a = pack(z_t.agents, cond.mask.agents, cond.values.agents);
  const std::vector<T> in_l = pack(z_t.lights, cond.mask.lights, cond.values.lights);

  std::vector<T> x(n * h);
  in_agents_.forward(in_a.data(), na, x.data());
  if (nl > 0) {
    in_lights_.forward(in_l.data(), nl, x.data() + na * h);
  }
  const std::vector<T> temb = time_embedding(t);
  for (std::size_t r = 0; r < n; ++r) {
    const std::size_t step = r % steps;
    T * row = x.data() + r * h;
    for (std::size_t j = 0; j < h; ++j) {
      row[j] += time_pe_[step * h + j] + temb[j];
    }
  }

  std::vector<T> latents = context_.forward(cond.context, context_empty_);
  const std::size_t nlat = cfg_.n_context_latents;
  latents_n_.resize(nlat * h);
  ln_latents_.forward(latents.data(), nlat, latents_n_.data());

  const std::size_t elements = static_cast<std::size_t>(d.agents + d.lights);
  for (std::size_t l = 0; l < blocks_.size(); ++l) {
    blocks_[l]->forward(x.data(), elements, steps, latents_n_.data(), nlat);
    check_finite(x, "axial block", static_cast<int>(l));
  }

  std::vector<T> y(n * h);
  ln_out_.forward(x.data(), n, y.data());
  std::vector<T> out_a(na * tensor::kAgentDim);
  std::vector<T> out_l(nl * tensor::kLightDim);
  out_agents_.forward(y.data(), na, out_a.data());
  if (nl > 0) {
    out_lights_.forward(y.data() + na * h, nl, out_l.data());
  }
  check_finite(out_a, "agent output projection", -1);
  check_finite(out_l, "light output projection", -1);

  tensor::MultiTensor v(d);
  std::copy(out_a.begin(), out_a.end(), v.agents.data().begin());
  std::copy(out_l.begin(), out_l.end(), v.lights.data().begin());
  return v;
}

template <typename T>
void DenoiserNet<T>::backward(const tensor::MultiTensor & dv_hat)
{
  const auto & d = cfg_.dims;
  const std::size_t steps = d.timesteps;
  const std::size_t h = cfg_.hidden_dim;
  const std::size_t na = static_cast<std::size_t>(d.agents) * steps;
  const std::size_t nl = static_cast<std::size_t>(d.lights) * steps;
  const std::size_t n = na + nl;

  std::vector<T> dya(dv_hat.agents.data().begin(), dv_hat.agents.data().end());
  std::vector<T> dyl(dv_hat.lights.data().begin(), dv_hat.lights.data().end());
  std::vector<T> dy(n * h, T(0));
  out_agents_.backward(dya.data(), na, dy.data());
  if (nl > 0) {
    out_lights_.backward(dyl.data(), nl, dy.data() + na * h);
  }
  std::vector<T> dx(n * h, T(0));
  ln_out_.backward(dy.data(), n, dx.data());

  const std::size_t nlat = cfg_.n_context_latents;
  std::vector<T> dlat_n(nlat * h, T(0));
  for (std::size_t l = blocks_.size(); l-- > 0;) {
    blocks_[l]->backward(dx.data(), dlat_n.data());
  }

  std::vector<T> dtemb(h, T(0));
  for (std::size_t r = 0; r < n; ++r) {
    const T * row = dx.data() + r * h;
    for (std::size_t j = 0; j < h; ++j) {
      dtemb[j] += row[j];
    }
  }
  std::vector<T> da(h, T(0));
  time_fc2_.backward(dtemb.data(), 1, da.data());
  std::vector<T> db(h, T(0));
  time_act_.backward(da.data(), h, db.data());
  time_fc1_.backward(db.data(), 1, nullptr);

  in_agents_.backward(dx.data(), na, nullptr);
  if (nl > 0) {
    in_lights_.backward(dx.data() + na * h, nl, nullptr);
  }

  std::vector<T> dlat(nlat * h, T(0));
  ln_latents_.backward(dlat_n.data(), nlat, dlat.data());
  context_.backward(dlat.data());
}

template class ContextEncoder<float>;
template class ContextEncoder<double>;
template class AxialBlock<float>;
template class AxialBlock<double>;
template class DenoiserNet<float>;
template class DenoiserNet<double>;

}  // namespace twm::nn
