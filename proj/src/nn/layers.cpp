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

#include "twm/nn/layers.hpp"

#include "twm/kernels/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace twm::nn
{
namespace
{
template <typename T>
void init_normal(std::vector<T> & v, double sd, std::mt19937_64 & rng)
{
  std::normal_distribution<double> normal(0.0, sd);
  for (auto & x : v) {
    x = static_cast<T>(normal(rng));
  }
}

// Copy a (rows x width) column block starting at `col` out of a row-major matrix with `stride` columns.
template <typename T>
void gather_cols(const T * src, std::size_t rows, std::size_t stride, std::size_t col, std::size_t width, T * dst)
{
  for (std::size_t r = 0; r < rows; ++r) {
    std::copy_n(src + r * stride + col, width, dst + r * width);
  }
}

template <typename T>
void scatter_cols(const T * src, std::size_t rows, std::size_t stride, std::size_t col, std::size_t width, T * dst)
{
  for (std::size_t r = 0; r < rows; ++r) {
    std::copy_n(src + r * width, width, dst + r * stride + col);
  }
}

template <typename T>
void scatter_add_cols(
  const T * src, std::size_t rows, std::size_t stride, std::size_t col, std::size_t width, T * dst)
{
  for (std::size_t r = 0; r < rows; ++r) {
    T * d = dst + r * stride + col;
    const T * s = src + r * width;
    for (std::size_t j = 0; j < width; ++j) {
      d[j] += s[j];
    }
  }
}

constexpr double kSqrt2OverPi = 0.79788456080286535588;
constexpr double kGeluCoef = 0.044715;
}  // namespace

// ---------------------------------------------------------------- Linear

template <typename T>
Linear<T>::Linear(
  ParamStore<T> & store, const std::string & name, std::size_t in, std::size_t out,
  std::mt19937_64 & rng, double init_gain)
: in_(in), out_(out)
{
  w_ = &store.add(name + ".w", {in, out}, true);
  b_ = &store.add(name + ".b", {out}, false);
  init_normal(w_->value, init_gain / std::sqrt(static_cast<double>(in)), rng);
}

template <typename T>
void Linear<T>::forward(const T * x, std::size_t rows, T * y)
{
  x_.assign(x, x + rows * in_);
  for (std::size_t r = 0; r < rows; ++r) {
    std::copy(b_->value.begin(), b_->value.end(), y + r * out_);
  }
  kernels::gemm_nn(rows, out_, in_, x, w_->value.data(), y);
}

template <typename T>
void Linear<T>::backward(const T * dy, std::size_t rows, T * dx)
{
  if (rows * in_ != x_.size()) {
    throw std::logic_error("Linear::backward without matching forward");
  }
  if (dx != nullptr) {
    kernels::gemm_nt(rows, in_, out_, dy, w_->value.data(), dx);
  }
  kernels::gemm_tn(in_, out_, rows, x_.data(), dy, w_->grad.data());
  T * db = b_->grad.data();
  for (std::size_t r = 0; r < rows; ++r) {
    const T * row = dy + r * out_;
    for (std::size_t j = 0; j < out_; ++j) {
      db[j] += row[j];
    }
  }
}

// ---------------------------------------------------------------- LayerNorm

template <typename T>
LayerNorm<T>::LayerNorm(ParamStore<T> & store, const std::string & name, std::size_t dim) : dim_(dim)
{
  gain_ = &store.add(name + ".g", {dim}, false);
  bias_ = &store.add(name + ".b", {dim}, false);
  std::fill(gain_->value.begin(), gain_->value.end(), T(1));
}

template <typename T>
void LayerNorm<T>::forward(const T * x, std::size_t rows, T * y)
{
  constexpr double eps = 1e-5;
  xhat_.resize(rows * dim_);
  rstd_.resize(rows);
  const T * g = gain_->value.data();
  const T * b = bias_->value.data();
  for (std::size_t r = 0; r < rows; ++r) {
    const T * xr = x + r * dim_;
    double mean = 0.0;
    for (std::size_t j = 0; j < dim_; ++j) {
      mean += xr[j];
    }
    mean /= static_cast<double>(dim_);
    double var = 0.0;
    for (std::size_t j = 0; j < dim_; ++j) {
      const double d = xr[j] - mean;
      var += d * d;
    }
    var /= static_cast<double>(dim_);
    const T rstd = static_cast<T>(1.0 / std::sqrt(var + eps));
    rstd_[r] = rstd;
    T * xh = xhat_.data() + r * dim_;
    T * yr = y + r * dim_;
    for (std::size_t j = 0; j < dim_; ++j) {
      xh[j] = static_cast<T>(xr[j] - mean) * rstd;
      yr[j] = xh[j] * g[j] + b[j];
    }
  }
}

template <typename T>
void LayerNorm<T>::backward(const T * dy, std::size_t rows, T * dx)
{
  const T * g = gain_->value.data();
  T * dg = gain_->grad.data();
  T * db = bias_->grad.data();
  std::vector<T> dxh(dim_);
  for (std::size_t r = 0; r < rows; ++r) {
    const T * dyr = dy + r * dim_;
    const T * xh = xhat_.data() + r * dim_;
    double mean_d = 0.0;
    double mean_dx = 0.0;
    for (std::size_t j = 0; j < dim_; ++j) {
      dg[j] += dyr[j] * xh[j];
      db[j] += dyr[j];
      dxh[j] = dyr[j] * g[j];
      mean_d += dxh[j];
      mean_dx += dxh[j] * xh[j];
    }
    mean_d /= static_cast<double>(dim_);
    mean_dx /= static_cast<double>(dim_);
    T * dxr = dx + r * dim_;
    for (std::size_t j = 0; j < dim_; ++j) {
      dxr[j] += rstd_[r] * static_cast<T>(dxh[j] - mean_d - xh[j] * mean_dx);
    }
  }
}

// ---------------------------------------------------------------- activations

template <typename T>
void Gelu<T>::forward(const T * x, std::size_t n, T * y)
{
  x_.assign(x, x + n);
  for (std::size_t i = 0; i < n; ++i) {
    const T v = x[i];
    const T u = static_cast<T>(kSqrt2OverPi) * (v + static_cast<T>(kGeluCoef) * v * v * v);
    y[i] = T(0.5) * v * (T(1) + std::tanh(u));
  }
}

template <typename T>
void Gelu<T>::backward(const T * dy, std::size_t n, T * dx)
{
  for (std::size_t i = 0; i < n; ++i) {
    const T v = x_[i];
    const T u = static_cast<T>(kSqrt2OverPi) * (v + static_cast<T>(kGeluCoef) * v * v * v);
    const T th = std::tanh(u);
    const T du = static_cast<T>(kSqrt2OverPi) * (T(1) + T(3) * static_cast<T>(kGeluCoef) * v * v);
    dx[i] += dy[i] * (T(0.5) * (T(1) + th) + T(0.5) * v * (T(1) - th * th) * du);
  }
}

template <typename T>
void Silu<T>::forward(const T * x, std::size_t n, T * y)
{
  x_.assign(x, x + n);
  for (std::size_t i = 0; i < n; ++i) {
    y[i] = x[i] / (T(1) + std::exp(-x[i]));
  }
}

template <typename T>
void Silu<T>::backward(const T * dy, std::size_t n, T * dx)
{
  for (std::size_t i = 0; i < n; ++i) {
    const T s = T(1) / (T(1) + std::exp(-x_[i]));
    dx[i] += dy[i] * s * (T(1) + x_[i] * (T(1) - s));
  }
}

// ---------------------------------------------------------------- Attention

template <typename T>
Attention<T>::Attention(
  ParamStore<T> & store, const std::string & name, std::size_t dim, std::size_t heads,
  std::mt19937_64 & rng)
: dim_(dim), heads_(heads)
{
  if (heads == 0 || dim % heads != 0) {
    throw std::invalid_argument("Attention: dim must be divisible by heads");
  }
  head_dim_ = dim / heads;
  q_ = Linear<T>(store, name + ".q", dim, dim, rng);
  k_ = Linear<T>(store, name + ".k", dim, dim, rng);
  v_ = Linear<T>(store, name + ".v", dim, dim, rng);
  o_ = Linear<T>(store, name + ".o", dim, dim, rng);
}

template <typename T>
void Attention<T>::forward(
  const T * xq, std::size_t n_seq, std::size_t lq, const T * xkv, std::size_t lk, bool shared_kv,
  T * out)
{
  n_seq_ = n_seq;
  lq_ = lq;
  lk_ = lk;
  shared_ = shared_kv;
  const std::size_t rows_q = n_seq * lq;
  const std::size_t rows_kv = shared_kv ? lk : n_seq * lk;
  qp_.resize(rows_q * dim_);
  kp_.resize(rows_kv * dim_);
  vp_.resize(rows_kv * dim_);
  q_.forward(xq, rows_q, qp_.data());
  k_.forward(xkv, rows_kv, kp_.data());
  v_.forward(xkv, rows_kv, vp_.data());

  probs_.assign(n_seq * heads_ * lq * lk, T(0));
  ctx_.assign(rows_q * dim_, T(0));
  const T scale = static_cast<T>(1.0 / std::sqrt(static_cast<double>(head_dim_)));
  std::vector<T> qh(lq * head_dim_);
  std::vector<T> kh(lk * head_dim_);
  std::vector<T> vh(lk * head_dim_);
  std::vector<T> oh(lq * head_dim_);
  for (std::size_t s = 0; s < n_seq; ++s) {
    const std::size_t kv_row0 = shared_kv ? 0 : s * lk;
    for (std::size_t h = 0; h < heads_; ++h) {
      const std::size_t col = h * head_dim_;
      gather_cols(qp_.data() + s * lq * dim_, lq, dim_, col, head_dim_, qh.data());
      gather_cols(kp_.data() + kv_row0 * dim_, lk, dim_, col, head_dim_, kh.data());
      gather_cols(vp_.data() + kv_row0 * dim_, lk, dim_, col, head_dim_, vh.data());
      T * p = probs_.data() + (s * heads_ + h) * lq * lk;
      kernels::gemm_nt(lq, lk, head_dim_, qh.data(), kh.data(), p);
      for (std::size_t i = 0; i < lq; ++i) {
        T * row = p + i * lk;
        T mx = row[0] * scale;
        for (std::size_t j = 0; j < lk; ++j) {
          row[j] *= scale;
          mx = std::max(mx, row[j]);
        }
        T sum = 0;
        for (std::size_t j = 0; j < lk; ++j) {
          row[j] = std::exp(row[j] - mx);
          sum += row[j];
        }
        const T inv = T(1) / sum;
        for (std::size_t j = 0; j < lk; ++j) {
          row[j] *= inv;
        }
      }
      std::fill(oh.begin(), oh.end(), T(0));
      kernels::gemm_nn(lq, head_dim_, lk, p, vh.data(), oh.data());
      scatter_cols(oh.data(), lq, dim_, col, head_dim_, ctx_.data() + s * lq * dim_);
    }
  }
  o_.forward(ctx_.data(), rows_q, out);
}

template <typename T>
void Attention<T>::backward(const T * dout, T * dxq, T * dxkv)
{
  const std::size_t n_seq = n_seq_;
  const std::size_t lq = lq_;
  const std::size_t lk = lk_;
  const std::size_t rows_q = n_seq * lq;
  const std::size_t rows_kv = shared_ ? lk : n_seq * lk;
  std::vector<T> dctx(rows_q * dim_, T(0));
  o_.backward(dout, rows_q, dctx.data());

  std::vector<T> dqp(rows_q * dim_, T(0));
  std::vector<T> dkp(rows_kv * dim_, T(0));
  std::vector<T> dvp(rows_kv * dim_, T(0));
  const T scale = static_cast<T>(1.0 / std::sqrt(static_cast<double>(head_dim_)));
  std::vector<T> qh(lq * head_dim_);
  std::vector<T> kh(lk * head_dim_);
  std::vector<T> vh(lk * head_dim_);
  std::vector<T> doh(lq * head_dim_);
  std::vector<T> dp(lq * lk);
  std::vector<T> dqh(lq * head_dim_);
  std::vector<T> dkh(lk * head_dim_);
  std::vector<T> dvh(lk * head_dim_);
  for (std::size_t s = 0; s < n_seq; ++s) {
    const std::size_t kv_row0 = shared_ ? 0 : s * lk;
    for (std::size_t h = 0; h < heads_; ++h) {
      const std::size_t col = h * head_dim_;
      gather_cols(qp_.data() + s * lq * dim_, lq, dim_, col, head_dim_, qh.data());
      gather_cols(kp_.data() + kv_row0 * dim_, lk, dim_, col, head_dim_, kh.data());
      gather_cols(vp_.data() + kv_row0 * dim_, lk, dim_, col, head_dim_, vh.data());
      gather_cols(dctx.data() + s * lq * dim_, lq, dim_, col, head_dim_, doh.data());
      const T * p = probs_.data() + (s * heads_ + h) * lq * lk;

      std::fill(dp.begin(), dp.end(), T(0));
      kernels::gemm_nt(lq, lk, head_dim_, doh.data(), vh.data(), dp.data());
      std::fill(dvh.begin(), dvh.end(), T(0));
      kernels::gemm_tn(lk, head_dim_, lq, p, doh.data(), dvh.data());
      for (std::size_t i = 0; i < lq; ++i) {
        const T * pr = p + i * lk;
        T * dr = dp.data() + i * lk;
        T dot = 0;
        for (std::size_t j = 0; j < lk; ++j) {
          dot += pr[j] * dr[j];
        }
        for (std::size_t j = 0; j < lk; ++j) {
          dr[j] = pr[j] * (dr[j] - dot) * scale;
        }
      }
      std::fill(dqh.begin(), dqh.end(), T(0));
      kernels::gemm_nn(lq, head_dim_, lk, dp.data(), kh.data(), dqh.data());
      std::fill(dkh.begin(), dkh.end(), T(0));
      kernels::gemm_tn(lk, head_dim_, lq, dp.data(), qh.data(), dkh.data());

      scatter_add_cols(dqh.data(), lq, dim_, col, head_dim_, dqp.data() + s * lq * dim_);
      scatter_add_cols(dkh.data(), lk, dim_, col, head_dim_, dkp.data() + kv_row0 * dim_);
      scatter_add_cols(dvh.data(), lk, dim_, col, head_dim_, dvp.data() + kv_row0 * dim_);
    }
  }
  q_.backward(dqp.data(), rows_q, dxq);
  k_.backward(dkp.data(), rows_kv, dxkv);
  v_.backward(dvp.data(), rows_kv, dxkv);
}

// ---------------------------------------------------------------- Mlp

template <typename T>
Mlp<T>::Mlp(
  ParamStore<T> & store, const std::string & name, std::size_t dim, std::size_t hidden,
  std::mt19937_64 & rng)
: fc1_(store, name + ".fc1", dim, hidden, rng), fc2_(store, name + ".fc2", hidden, dim, rng), hidden_(hidden)
{
}

template <typename T>
void Mlp<T>::forward(const T * x, std::size_t rows, T * y)
{
  h_.resize(rows * hidden_);
  a_.resize(rows * hidden_);
  fc1_.forward(x, rows, h_.data());
  act_.forward(h_.data(), rows * hidden_, a_.data());
  fc2_.forward(a_.data(), rows, y);
}

template <typename T>
void Mlp<T>::backward(const T * dy, std::size_t rows, T * dx)
{
  std::vector<T> da(rows * hidden_, T(0));
  fc2_.backward(dy, rows, da.data());
  std::vector<T> dh(rows * hidden_, T(0));
  act_.backward(da.data(), rows * hidden_, dh.data());
  fc1_.backward(dh.data(), rows, dx);
}

template class Linear<float>;
template class Linear<double>;
template class LayerNorm<float>;
template class LayerNorm<double>;
template class Gelu<float>;
template class Gelu<double>;
template class Silu<float>;
template class Silu<double>;
template class Attention<float>;
template class Attention<double>;
template class Mlp<float>;
template class Mlp<double>;

}  // namespace twm::nn
