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

#ifndef TWM__NN__PARAMS_HPP_
#define TWM__NN__PARAMS_HPP_

#include <cstddef>
#include <deque>
#include <functional>
#include <random>
#include <string>
#include <vector>

namespace twm::nn
{

/// One learnable array with its gradient accumulator.
template <typename T>
struct Param
{
  std::string name;
  std::vector<std::size_t> shape;
  std::vector<T> value;
  std::vector<T> grad;
  bool decay = true;  // weight decay applies (false for biases and norm gains)

  std::size_t size() const { return value.size(); }
};

/// Owns every parameter of a model. Addresses are stable for the store's lifetime.
template <typename T>
class ParamStore
{
public:
  ParamStore() = default;
  ParamStore(const ParamStore &) = delete;
  ParamStore & operator=(const ParamStore &) = delete;

  Param<T> & add(std::string name, std::vector<std::size_t> shape, bool decay = true)
  {
    std::size_t n = 1;
    for (auto s : shape) {
      n *= s;
    }
    Param<T> & p = params_.emplace_back();
    p.name = std::move(name);
    p.shape = std::move(shape);
    p.value.assign(n, T(0));
    p.grad.assign(n, T(0));
    p.decay = decay;
    return p;
  }

  void zero_grad()
  {
    for (auto & p : params_) {
      std::fill(p.grad.begin(), p.grad.end(), T(0));
    }
  }

  std::size_t count() const
  {
    std::size_t n = 0;
    for (const auto & p : params_) {
      n += p.size();
    }
    return n;
  }

  std::deque<Param<T>> & params() { return params_; }
  const std::deque<Param<T>> & params() const { return params_; }

  Param<T> * find(const std::string & name)
  {
    for (auto & p : params_) {
      if (p.name == name) {
        return &p;
      }
    }
    return nullptr;
  }

private:
  std::deque<Param<T>> params_;
};

}  // namespace twm::nn

#endif  // TWM__NN__PARAMS_HPP_
