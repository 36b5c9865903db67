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

#ifndef TWM__NN__OPTIMIZER_HPP_
#define TWM__NN__OPTIMIZER_HPP_

#include "twm/nn/params.hpp"

#include <cstdint>
#include <vector>

namespace twm::nn
{

struct AdamWConfig
{
  double lr = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;
  double clip_norm = 1.0;  // <= 0 disables clipping
};

/// AdamW with global gradient-norm clipping. Weight decay is decoupled and
/// skipped for parameters flagged decay = false.
class AdamW
{
public:
  AdamW() = default;
  AdamW(const ParamStore<float> & store, const AdamWConfig & cfg);

  /// Apply one update with learning rate `lr`. Returns the pre-clip gradient norm.
  double step(ParamStore<float> & store, double lr);

  std::int64_t steps() const { return t_; }
  const AdamWConfig & config() const { return cfg_; }

  // Moment access for checkpointing.
  std::vector<std::vector<float>> & first_moments() { return m_; }
  std::vector<std::vector<float>> & second_moments() { return v_; }
  const std::vector<std::vector<float>> & first_moments() const { return m_; }
  const std::vector<std::vector<float>> & second_moments() const { return v_; }
  void set_steps(std::int64_t t) { t_ = t; }

private:
  AdamWConfig cfg_;
  std::int64_t t_ = 0;
  std::vector<std::vector<float>> m_;
  std::vector<std::vector<float>> v_;
};

/// Global L2 norm of all gradients.
double grad_norm(const ParamStore<float> & store);

}  // namespace twm::nn

#endif  // TWM__NN__OPTIMIZER_HPP_
