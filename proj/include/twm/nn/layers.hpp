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

#ifndef TWM__NN__LAYERS_HPP_
#define TWM__NN__LAYERS_HPP_

#include "twm/nn/params.hpp"

#include <cstddef>
#include <random>
#include <string>
#include <vector>

// Building blocks with explicit forward/backward passes. Each layer keeps the
// activations of its most recent forward call, so a forward must be followed
// by at most one backward before the next forward. Backward passes accumulate
// into the input-gradient buffers they are given and into Param::grad.

namespace twm::nn
{

template <typename T>
class Linear
{
public:
  Linear() = default;
  /// Weights ~ N(0, init_gain^2 / in).
  Linear(
    ParamStore<T> & store, const std::string & name, std::size_t in, std::size_t out,
    std::mt19937_64 & rng, double init_gain = 1.0);

  std::size_t in() const { return in_; }
  std::size_t out() const { return out_; }

  /// y(rows x out) = x(rows x in) W + b
  void forward(const T * x, std::size_t rows, T * y);
  /// dx += dy W^T; dW += x^T dy; db += sum(dy)
  void backward(const T * dy, std::size_t rows, T * dx);

private:
  std::size_t in_ = 0;
  std::size_t out_ = 0;
  Param<T> * w_ = nullptr;  // in x out
  Param<T> * b_ = nullptr;
  std::vector<T> x_;
};

template <typename T>
class LayerNorm
{
public:
  LayerNorm() = default;
  LayerNorm(ParamStore<T> & store, const std::string & name, std::size_t dim);

  void forward(const T * x, std::size_t rows, T * y);
  void backward(const T * dy, std::size_t rows, T * dx);

private:
  std::size_t dim_ = 0;
  Param<T> * gain_ = nullptr;
  Param<T> * bias_ = nullptr;
  std::vector<T> xhat_;
  std::vector<T> rstd_;
};

/// tanh-approximated GELU.
template <typename T>
class Gelu
{
public:
  void forward(const T * x, std::size_t n, T * y);
  void backward(const T * dy, std::size_t n, T * dx);

private:
  std::vector<T> x_;
};

template <typename T>
class Silu
{
public:
  void forward(const T * x, std::size_t n, T * y);
  void backward(const T * dy, std::size_t n, T * dx);

private:
  std::vector<T> x_;
};

/// Multi-head scaled dot-product attention over independent sequences.
/// Queries: n_seq * lq rows. Keys/values: n_seq * lk rows, or a single block
/// of lk rows shared by every sequence when shared_kv is set.
template <typename T>
class Attention
{
public:
  Attention() = default;
  Attention(
    ParamStore<T> & store, const std::string & name, std::size_t dim, std::size_t heads,
    std::mt19937_64 & rng);

  void forward(
    const T * xq, std::size_t n_seq, std::size_t lq, const T * xkv, std::size_t lk, bool shared_kv,
    T * out);
  void backward(const T * dout, T * dxq, T * dxkv);

private:
  std::size_t dim_ = 0;
  std::size_t heads_ = 0;
  std::size_t head_dim_ = 0;
  Linear<T> q_;
  Linear<T> k_;
  Linear<T> v_;
  Linear<T> o_;
  // Cache of the last forward.
  std::size_t n_seq_ = 0;
  std::size_t lq_ = 0;
  std::size_t lk_ = 0;
  bool shared_ = false;
  std::vector<T> qp_;
  std::vector<T> kp_;
  std::vector<T> vp_;
  std::vector<T> probs_;  // n_seq x heads x lq x lk
  std::vector<T> ctx_;    // concatenated head outputs before o_
};

/// Two-layer perceptron with GELU.
template <typename T>
class Mlp
{
public:
  Mlp() = default;
  Mlp(
    ParamStore<T> & store, const std::string & name, std::size_t dim, std::size_t hidden,
    std::mt19937_64 & rng);

  void forward(const T * x, std::size_t rows, T * y);
  void backward(const T * dy, std::size_t rows, T * dx);

private:
  Linear<T> fc1_;
  Linear<T> fc2_;
  Gelu<T> act_;
  std::size_t hidden_ = 0;
  std::vector<T> h_;
  std::vector<T> a_;
};

}  // namespace twm::nn

#endif  // TWM__NN__LAYERS_HPP_
