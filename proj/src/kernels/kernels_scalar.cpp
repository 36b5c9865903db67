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

#include "twm/kernels/kernels.hpp"

namespace twm::kernels::scalar
{
namespace
{
template <typename T>
T dot_impl(const T * a, const T * b, std::size_t n)
{
  T acc = 0;
  for (std::size_t i = 0; i < n; ++i) {
    acc += a[i] * b[i];
  }
  return acc;
}

template <typename T>
void axpy_impl(T alpha, const T * x, T * y, std::size_t n)
{
  for (std::size_t i = 0; i < n; ++i) {
    y[i] += alpha * x[i];
  }
}

template <typename T>
void gemm_nn_impl(std::size_t m, std::size_t n, std::size_t k, const T * a, const T * b, T * c)
{
  for (std::size_t i = 0; i < m; ++i) {
    T * crow = c + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const T aip = a[i * k + p];
      const T * brow = b + p * n;
      for (std::size_t j = 0; j < n; ++j) {
        crow[j] += aip * brow[j];
      }
    }
  }
}
}  // namespace

float dot(const float * a, const float * b, std::size_t n) { return dot_impl(a, b, n); }
double dot(const double * a, const double * b, std::size_t n) { return dot_impl(a, b, n); }
void axpy(float alpha, const float * x, float * y, std::size_t n) { axpy_impl(alpha, x, y, n); }
void axpy(double alpha, const double * x, double * y, std::size_t n)
{
  axpy_impl(alpha, x, y, n);
}
void gemm_nn(std::size_t m, std::size_t n, std::size_t k, const float * a, const float * b, float * c)
{
  gemm_nn_impl(m, n, k, a, b, c);
}
void gemm_nn(
  std::size_t m, std::size_t n, std::size_t k, const double * a, const double * b, double * c)
{
  gemm_nn_impl(m, n, k, a, b, c);
}

}  // namespace twm::kernels::scalar
