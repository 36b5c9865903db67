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

#include "twm/nn/optimizer.hpp"

#include <cmath>

namespace twm::nn
{

double grad_norm(const ParamStore<float> & store)
{
  double acc = 0.0;
  for (const auto & p : store.params()) {
    for (const float g : p.grad) {
      acc += static_cast<double>(g) * g;
    }
  }
  return std::sqrt(acc);
}

AdamW::AdamW(const ParamStore<float> & store, const AdamWConfig & cfg) : cfg_(cfg)
{
  for (const auto & p : store.params()) {
    m_.emplace_back(p.size(), 0.0f);
    v_.emplace_back(p.size(), 0.0f);
  }
}

double AdamW::step(ParamStore<float> & store, double lr)
{
  const double norm = grad_norm(store);
  double scale = 1.0;
  if (cfg_.clip_norm > 0.0 && norm > cfg_.clip_norm) {
    scale = cfg_.clip_norm / norm;
  }
  ++t_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  std::size_t k = 0;
  for (auto & p : store.params()) {
    auto & m = m_[k];
    auto & v = v_[k];
    ++k;
    const double decay = p.decay ? cfg_.weight_decay : 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double g = p.grad[i] * scale;
      m[i] = static_cast<float>(cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * g);
      v[i] = static_cast<float>(cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * g * g);
      const double mhat = m[i] / bc1;
      const double vhat = v[i] / bc2;
      double w = p.value[i];
      w -= lr * decay * w;
      w -= lr * mhat / (std::sqrt(vhat) + cfg_.eps);
      p.value[i] = static_cast<float>(w);
    }
  }
  return norm;
}

}  // namespace twm::nn
